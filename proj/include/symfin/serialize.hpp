#pragma once

// JSON shapes for the reporting surfaces: symmetry reports, commutator
// tables and closed-form solutions.  Keys are emitted in a fixed order so
// identical runs produce byte-identical documents.

#include "symfin/algebra.hpp"
#include "symfin/reduce.hpp"

#include <json.hpp>

namespace symfin {

using Json = nlohmann::ordered_json;

inline Json to_json(const SymmetryReport& rep) {
    Json j;
    j["model"] = rep.model;
    j["generator"] = rep.generator;
    j["verdict"] = rep.is_symmetry ? "symmetry" : "not-symmetry";
    j["lambda"] = rep.is_symmetry ? to_string(rep.lambda) : "";
    j["residual"] = rep.is_symmetry ? "" : to_string(rep.residual);
    j["repairs"] = rep.repairs;
    return j;
}

inline Json to_json(const CommutatorTable& tab) {
    Json j;
    j["names"] = tab.names;
    j["entries"] = tab.entries;
    return j;
}

inline std::string render_table(const CommutatorTable& tab) {
    std::size_t width = 4;
    for (auto& n : tab.names) width = std::max(width, n.size());
    for (auto& row : tab.entries)
        for (auto& e : row) width = std::max(width, e.size());
    auto pad = [&](const std::string& s) {
        std::string r = s;
        r.resize(width, ' ');
        return r;
    };
    std::string out = pad("[,]");
    for (auto& n : tab.names) out += "  " + pad(n);
    out += "\n";
    for (std::size_t i = 0; i < tab.names.size(); ++i) {
        out += pad(tab.names[i]);
        for (std::size_t j = 0; j < tab.names.size(); ++j)
            out += "  " + pad(tab.entries[i][j]);
        out += "\n";
    }
    return out;
}

inline Json closed_form_json(const ClosedFormSolution& sol, const std::string& k_spec,
                             const std::string& l1_spec, const std::string& l2_spec) {
    Json j;
    j["c1"] = rat_str(sol.c1);
    j["c2"] = rat_str(sol.c2);
    j["w_expression"] = to_string(sol.w);
    j["w_log_rate"] = to_string(sol.w.diff("t") / sol.w); // d/dt log w
    j["k_spec"] = k_spec;
    j["lambda1_spec"] = l1_spec;
    j["lambda2_spec"] = l2_spec;
    return j;
}

} // namespace symfin
