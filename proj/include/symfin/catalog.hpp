#pragma once

// String-keyed model registry shared by the CLI and the integration tests:
// builds catalog equations from parameter bindings given as expression
// strings, with sensible defaults per model.

#include "symfin/algebra.hpp"
#include "symfin/numeric.hpp"
#include "symfin/reduce.hpp"

#include <map>
#include <optional>
#include <string>

namespace symfin {

struct config_error : error {
    using error::error;
};

struct ModelBundle {
    EvolutionPDE pde;
    std::optional<GeneratorCatalog> generators;
    std::string expected_label; // empty when no classification is stored
};

using ParamMap = std::map<std::string, std::string>;

namespace detail {

inline Rational parse_rational(const std::string& s) {
    Workspace tmp;
    Expression e = tmp.parse(s);
    if (!e.is_constant()) throw config_error("expected a numeric value, got '" + s + "'");
    return e.constant_value();
}

inline Rational param_rat(const ParamMap& p, const std::string& key, const Rational& dflt) {
    auto it = p.find(key);
    if (it == p.end()) return dflt;
    return parse_rational(it->second);
}

inline bool param_symbolic(const ParamMap& p, const std::string& key) {
    auto it = p.find(key);
    return it != p.end() && it->second == "symbolic";
}

} // namespace detail

inline std::vector<std::string> model_ids() {
    return {"heat2d",          "heat1d",        "bs2d_canonical",
            "bs2d",            "bs2d_nonauto",  "bs2d_special_nonauto",
            "twofactor",       "twofactor_canonical", "twofactor_q0",
            "twofactor_nonauto", "bs1d",        "onefactor"};
}

/// Build a catalog model; parameter strings are parsed as exact rationals,
/// or the value "symbolic" keeps the parameter as a named constant.
inline ModelBundle make_model(Workspace& ws, const std::string& id,
                              const ParamMap& params = {}) {
    using detail::param_rat;
    ModelBundle mb;
    if (id == "heat2d") {
        mb.pde = build_heat2d(ws);
        mb.generators = catalog_generators(mb.pde);
        mb.expected_label = "{{sl(2,R)+s so(2)}+s W5}";
        return mb;
    }
    if (id == "heat1d") {
        mb.pde = build_heat1d(ws);
        return mb;
    }
    if (id == "bs2d_canonical") {
        Expression phi1 = detail::param_symbolic(params, "phi1")
                              ? ws.constant("phi1")
                              : ws.num(param_rat(params, "phi1", 1));
        Expression phi2 = detail::param_symbolic(params, "phi2")
                              ? ws.constant("phi2")
                              : ws.num(param_rat(params, "phi2", Rational(11, 10)));
        Expression k = detail::param_symbolic(params, "k")
                           ? ws.constant("k")
                           : ws.num(param_rat(params, "k", Rational(1, 20)));
        mb.pde = build_bs2d_canonical(ws, phi1, phi2, k);
        mb.generators = catalog_generators(mb.pde);
        mb.expected_label = "{{sl(2,R)+s so(2)}+s W5}";
        return mb;
    }
    if (id == "bs2d" || id == "twofactor") {
        std::map<std::string, Rational> vals;
        for (const char* key : {"sigma1", "sigma2", "rho", "r", "kappa", "alpha",
                                "lambda", "mu1", "mu2", "k"}) {
            auto it = params.find(key);
            if (it != params.end()) vals[key] = detail::parse_rational(it->second);
        }
        if (!vals.count("kappa")) vals["kappa"] = 1;
        auto mp = constant_market(ws, vals);
        mb.pde = id == "bs2d" ? build_bs2d_financial(ws, mp)
                              : build_twofactor_financial(ws, mp);
        return mb;
    }
    if (id == "twofactor_canonical") {
        std::array<Expression, 3> p = {ws.num(param_rat(params, "p1", 0)),
                                       ws.num(param_rat(params, "p2", 2)),
                                       ws.num(param_rat(params, "p3", 1))};
        std::array<Expression, 3> q = {ws.num(param_rat(params, "q1", 0)),
                                       ws.num(param_rat(params, "q2", 2)),
                                       ws.num(param_rat(params, "q3", 0))};
        mb.pde = build_twofactor_canonical(ws, p, q);
        mb.generators = catalog_generators(mb.pde);
        mb.expected_label = "{A1+s W5}";
        return mb;
    }
    if (id == "twofactor_q0") {
        // market values pinned to the q = 0 manifold unless overridden
        auto mp = constant_market(
            ws, {{"rho", param_rat(params, "rho", Rational(1, 2))},
                 {"kappa", param_rat(params, "kappa", Rational(1, 2))},
                 {"r", param_rat(params, "r", Rational(1, 4))},
                 {"lambda", param_rat(params, "lambda", Rational(1, 8))}});
        auto cf = two_factor_coeffs(ws, mp);
        if (!cf.q1.is_zero() || !cf.q2.is_zero() || !cf.q3.is_zero())
            throw config_error("twofactor_q0: parameters do not lie on the q = 0 manifold");
        mb.pde = build_twofactor_canonical(ws, {cf.p1, cf.p2, cf.p3}, {cf.q1, cf.q2, cf.q3});
        mb.pde.id = "twofactor_q0";
        mb.generators = catalog_generators(mb.pde);
        mb.expected_label = "{A1+s W5}";
        return mb;
    }
    if (id == "twofactor_nonauto") {
        mb.pde = build_twofactor_nonauto(ws);
        return mb;
    }
    if (id == "bs2d_nonauto") {
        mb.pde = build_bs2d_nonauto(ws);
        return mb;
    }
    if (id == "bs2d_special_nonauto") {
        mb.pde = build_bs2d_special_nonauto(ws);
        mb.generators = catalog_generators(mb.pde);
        mb.expected_label = "{{sl(2,R)+s so(2)}+s W5}";
        return mb;
    }
    if (id == "bs1d") {
        mb.pde = build_bs1d(ws, param_rat(params, "sigma", 1),
                            param_rat(params, "r", Rational(1, 20)));
        return mb;
    }
    if (id == "onefactor") {
        mb.pde = build_onefactor(ws, param_rat(params, "sigma", 1),
                                 param_rat(params, "kappa", 1),
                                 param_rat(params, "mu", Rational(1, 10)),
                                 param_rat(params, "lambda", Rational(1, 20)));
        return mb;
    }
    throw config_error("unknown model '" + id + "'");
}

} // namespace symfin
