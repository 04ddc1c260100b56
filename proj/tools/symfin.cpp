// symfin command-line driver: verify generator catalogs, print commutator
// tables and algebra labels, run reductions, solve the catalog equations,
// and emit the oscillating-rate scenario artifacts.
//
// Exit codes: 0 success, 1 verification/threshold failure, 2 configuration
// error, 3 numeric failure.

#include "symfin/catalog.hpp"
#include "symfin/serialize.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace symfin;

namespace {

struct Options {
    std::string model;
    std::string config_path;
    std::string out_path;
    std::string generators_path;
    std::vector<std::string> params; // key=value
    std::string grid_spec;
    double tol = 1e-3;
    // scenario knobs
    double r0 = 0.05, eps = 0.02, omega = 2 * M_PI, c1 = 0.2, c2 = 0.1;
    std::string c1_str = "1/5", c2_str = "1/10";
    // ermakov knobs
    double t1 = 50, slope = 0.1, A = 1, B = 0, C = 1;
    std::string system = "twofactor";
};

std::map<std::string, std::map<std::string, std::string>>
load_config(const std::string& path) {
    std::map<std::string, std::map<std::string, std::string>> cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw config_error("cannot read config file '" + path + "'");
    std::string line, section = "run";
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto strip = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = strip(line.substr(1, line.size() - 2));
            continue;
        }
        auto decl = line.find(":=");
        if (decl != std::string::npos) {
            // symbol declarations, e.g.  I1 := int(Lam1)  or  a := opaque
            cfg["symbols"][strip(line.substr(0, decl))] = strip(line.substr(decl + 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(lineno) +
                               ": expected key = value");
        cfg[section][strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
    }
    return cfg;
}

/// Apply [symbols] declarations: `name := int(expr)` declares an
/// antiderivative atom, `name := opaque` an opaque time function,
/// `name := constant` a named constant.
void apply_symbol_declarations(
    Workspace& ws, const std::map<std::string, std::map<std::string, std::string>>& cfg) {
    auto sec = cfg.find("symbols");
    if (sec == cfg.end()) return;
    for (auto& [name, spec] : sec->second) {
        if (ws.table()->has(name)) continue;
        if (spec == "opaque") {
            ws.opaque(name);
        } else if (spec == "constant") {
            ws.constant(name);
        } else if (spec.rfind("int(", 0) == 0 && spec.back() == ')') {
            Expression integrand = ws.parse(spec.substr(4, spec.size() - 5));
            ws.antideriv(name, integrand);
        } else {
            throw config_error("symbol '" + name +
                               "': expected opaque, constant or int(expr)");
        }
    }
}

ParamMap resolve_params(const Options& opt,
                        const std::map<std::string, std::map<std::string, std::string>>& cfg) {
    ParamMap p;
    auto it = cfg.find("params");
    if (it != cfg.end()) p = it->second;
    for (auto& kv : opt.params) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw config_error("--param expects key=value");
        p[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return p;
}

Grid resolve_grid(const Options& opt,
                  const std::map<std::string, std::map<std::string, std::string>>& cfg,
                  TimeDirection dir) {
    double xmin = -2, xmax = 2, ymin = -2, ymax = 2, t0 = 0, t1 = 1;
    int nx = 101, ny = 101, nt = 400;
    auto sec = cfg.find("grid");
    if (sec != cfg.end()) {
        auto get = [&](const char* k, double& v) {
            auto it = sec->second.find(k);
            if (it != sec->second.end()) v = std::stod(it->second);
        };
        auto geti = [&](const char* k, int& v) {
            auto it = sec->second.find(k);
            if (it != sec->second.end()) v = std::stoi(it->second);
        };
        get("x_min", xmin);
        get("x_max", xmax);
        get("y_min", ymin);
        get("y_max", ymax);
        get("t0", t0);
        get("t1", t1);
        geti("nx", nx);
        geti("ny", ny);
        geti("nt", nt);
    }
    if (!opt.grid_spec.empty()) {
        std::vector<double> v;
        std::string tok;
        std::stringstream ss(opt.grid_spec);
        while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
        if (v.size() != 3 && v.size() != 9)
            throw config_error("--grid expects nx,ny,nt or nx,ny,nt,xmin,xmax,ymin,ymax,t0,t1");
        nx = static_cast<int>(v[0]);
        ny = static_cast<int>(v[1]);
        nt = static_cast<int>(v[2]);
        if (v.size() == 9) {
            xmin = v[3];
            xmax = v[4];
            ymin = v[5];
            ymax = v[6];
            t0 = v[7];
            t1 = v[8];
        }
    }
    return Grid(xmin, xmax, ymin, ymax, nx, ny, t0, t1, nt, dir);
}

void write_manifest(const std::string& command, const Options& opt, const ParamMap& params,
                    const std::vector<std::string>& repairs, const Json& extra) {
    Json m;
    m["command"] = command;
    m["model"] = opt.model;
    m["params"] = params;
    m["tolerance"] = opt.tol;
    m["repairs"] = repairs;
    m["outputs"] = extra;
    std::filesystem::path dir =
        opt.out_path.empty() ? std::filesystem::path(".")
                             : std::filesystem::path(opt.out_path).parent_path();
    if (dir.empty()) dir = ".";
    std::ofstream out(dir / "run-manifest.json");
    out << m.dump(2) << "\n";
}

std::vector<VectorField> load_generators(Workspace& ws, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot read generator file '" + path + "'");
    Json j;
    in >> j;
    std::vector<VectorField> out;
    for (auto& g : j) {
        VectorField X;
        X.name = g.value("name", "G" + std::to_string(out.size()));
        X.xi_t = ws.parse(g.value("xi_t", "0"));
        X.xi = {ws.parse(g.value("xi_x", "0")), ws.parse(g.value("xi_y", "0"))};
        X.eta = ws.parse(g.value("eta", "0"));
        out.push_back(std::move(X));
    }
    return out;
}

int cmd_verify(const Options& opt) {
    auto cfg = load_config(opt.config_path);
    ParamMap params = resolve_params(opt, cfg);
    if (opt.model == "bs2d_canonical") {
        // exact symbolic verification by default
        params.try_emplace("phi1", "symbolic");
        params.try_emplace("phi2", "symbolic");
        params.try_emplace("k", "symbolic");
    }
    Workspace ws;
    auto mb = make_model(ws, opt.model, params);
    apply_symbol_declarations(ws, cfg);
    if (!mb.generators && opt.generators_path.empty())
        throw config_error("no generator catalog for model '" + opt.model + "'");
    std::vector<VectorField> fields =
        opt.generators_path.empty() ? mb.generators->fields
                                    : load_generators(ws, opt.generators_path);
    std::vector<std::string> repairs =
        mb.generators ? mb.generators->repairs : std::vector<std::string>{};

    Json verdicts = Json::array();
    bool all_ok = true;
    for (auto& X : fields) {
        auto rep = check_symmetry(mb.pde, X);
        all_ok = all_ok && rep.is_symmetry;
        std::cout << (rep.is_symmetry ? "OK   " : "FAIL ") << X.name;
        if (rep.is_symmetry)
            std::cout << "   Lambda = " << to_string(rep.lambda) << "\n";
        else
            std::cout << "   residual = " << to_string(rep.residual) << "\n";
        verdicts.push_back(to_json(rep));
    }
    std::cout << (all_ok ? "verified " : "FAILED: ") << fields.size() << " generators for "
              << opt.model << "\n";
    Json report;
    report["model"] = opt.model;
    report["verdicts"] = verdicts;
    report["repairs"] = repairs;
    if (!opt.out_path.empty()) {
        std::ofstream out(opt.out_path);
        out << report.dump(2) << "\n";
    }
    write_manifest("verify", opt, params, repairs,
                   Json{{"report", opt.out_path.empty() ? "-" : opt.out_path}});
    return all_ok ? 0 : 1;
}

int cmd_classify(const Options& opt) {
    auto cfg = load_config(opt.config_path);
    ParamMap params = resolve_params(opt, cfg);
    Workspace ws;
    auto mb = make_model(ws, opt.model, params);
    if (!mb.generators)
        throw config_error("no generator catalog for model '" + opt.model + "'");
    auto tab = commutator_table(ws, mb.pde.ctx, mb.generators->fields);
    std::cout << render_table(tab);
    auto cls = classify(ws, mb.pde.ctx, mb.generators->fields);
    std::cout << "label: " << cls.label << "\n";
    bool ok = mb.expected_label.empty() || cls.label == mb.expected_label;
    if (!mb.expected_label.empty())
        std::cout << "expected: " << mb.expected_label << (ok ? " (match)" : " (MISMATCH)")
                  << "\n";
    if (!opt.out_path.empty()) {
        Json j = to_json(tab);
        j["label"] = cls.label;
        j["expected"] = mb.expected_label;
        std::ofstream out(opt.out_path);
        out << j.dump(2) << "\n";
    }
    write_manifest("classify", opt, params, mb.generators->repairs,
                   Json{{"label", cls.label}});
    return ok ? 0 : 1;
}

int cmd_reduce(const Options& opt) {
    auto cfg = load_config(opt.config_path);
    ParamMap params = resolve_params(opt, cfg);
    Workspace ws;
    std::string model = opt.model.empty() ? "bs2d_special_nonauto" : opt.model;
    if (model != "bs2d_special_nonauto" && model != "heat2d")
        throw config_error("reduce supports bs2d_special_nonauto and heat2d");
    auto mb = make_model(ws, model, params);
    Rational c1 = detail::parse_rational(opt.c1_str);
    Rational c2 = detail::parse_rational(opt.c2_str);

    auto& cat = *mb.generators;
    auto find = [&](const std::string& n) -> const VectorField& {
        for (auto& X : cat.fields)
            if (X.name == n) return X;
        throw config_error("missing generator " + n);
    };
    const VectorField& Xu = find("X_u");
    const VectorField& Z1 = find(model == "heat2d" ? "X1" : "Z1");
    auto X = vf_add(Z1, vf_scale(Xu, c1));
    auto red = reduce_once(mb.pde, X);
    bool maximal = is_maximally_symmetric_1p1(red);
    std::cout << "first reduction: (1+1) equation in the transverse coordinate; "
              << "maximally symmetric: " << (maximal ? "yes" : "no") << "\n";

    VectorField Z3r{"Z3r", ws.num(0), {ws.num(1)},
                    c2 * Expression::atom(ws.table(), red.ctx.u)};
    auto ode = reduce_once(red, Z3r);
    Expression wfun = solve_reduced_ode(ode);
    auto sol = invariant_solution(mb.pde, c1, c2);
    bool match = (wfun.diff("t") / wfun - sol.w.diff("t") / sol.w).is_zero();
    std::cout << "w(t) = " << to_string(sol.w) << "\n";
    std::cout << "two-step reduction reproduces the invariant solution: "
              << (match ? "yes" : "no") << "\n";

    std::string k_spec = model == "heat2d" ? "0" : "k(t) opaque";
    std::string l_spec = model == "heat2d" ? "0" : "Lam(t) opaque";
    Json j = closed_form_json(sol, k_spec, l_spec, l_spec);
    j["reduced_maximally_symmetric"] = maximal;
    if (!opt.out_path.empty()) {
        std::ofstream out(opt.out_path);
        out << j.dump(2) << "\n";
    } else {
        std::cout << j.dump(2) << "\n";
    }
    write_manifest("reduce", opt, params, cat.repairs, Json{{"match", match}});
    return (maximal && match) ? 0 : 1;
}

int cmd_solve(const Options& opt) {
    auto cfg = load_config(opt.config_path);
    ParamMap params = resolve_params(opt, cfg);
    Workspace ws;
    auto mb = make_model(ws, opt.model, params);
    TimeDirection dir = mb.pde.s > 0 ? TimeDirection::Backward : TimeDirection::Forward;
    Grid grid = resolve_grid(opt, cfg, dir);
    CoefficientEnv env = empty_env;
    if (opt.model == "bs2d_special_nonauto") {
        double r0 = opt.r0;
        env = [r0](double) {
            return NumEnv{{"Lam1", 1 + 2 * r0}, {"Lam2", 1 + 2 * r0}, {"k", r0}};
        };
    }
    FdData data;
    data.initial = [](double x, double y) { return std::exp(-(x * x + y * y)); };
    // production run: no oracle, extrapolated boundary
    auto f = solve_fd(mb.pde, grid, data, env);
    f.check_finite();
    double resid = discrete_residual(f, mb.pde, env);
    std::cout << "interior residual (truncation order): " << resid << "\n";
    if (!opt.out_path.empty()) {
        write_slice_csv(f, opt.out_path);
        std::cout << "wrote " << opt.out_path << "\n";
    }
    write_manifest("solve", opt, params, {}, Json{{"residual", resid}});
    return 0;
}

int cmd_fig3(const Options& opt) {
    auto cfg = load_config(opt.config_path);
    ParamMap params = resolve_params(opt, cfg);
    Options g = opt;
    if (g.grid_spec.empty() && cfg.find("grid") == cfg.end())
        g.grid_spec = "101,101,400,-2,2,-2,2,0,2";
    Grid grid = resolve_grid(g, cfg, TimeDirection::Backward);
    auto res = fig3_scenario(opt.r0, opt.eps, opt.omega, opt.c1, opt.c2, grid);
    std::cout << "max FD vs closed-form relative error: " << res.max_rel_err << "\n";
    if (res.peak.oscillation)
        std::cout << "detected oscillation frequency: " << res.peak.omega << " (bin "
                  << res.peak.bin << ", width " << res.omega_bin_width << ")\n";
    else
        std::cout << "detected oscillation frequency: none\n";
    if (!opt.out_path.empty()) {
        write_slice_csv(res.fd, opt.out_path);
        std::cout << "wrote " << opt.out_path << "\n";
    }
    write_manifest("fig3", opt, params, {},
                   Json{{"max_rel_err", res.max_rel_err},
                        {"omega", res.peak.oscillation ? res.peak.omega : 0.0}});
    bool ok = res.max_rel_err <= opt.tol;
    if (opt.eps > 0)
        ok = ok && res.peak.oscillation &&
             std::abs(res.peak.omega - opt.omega) <= res.omega_bin_width + 1e-12;
    else
        ok = ok && !res.peak.oscillation;
    return ok ? 0 : 1;
}

int cmd_ermakov(const Options& opt) {
    double slope = opt.slope;
    auto omega = [slope](double t) { return std::sqrt(1 + slope * t); };
    auto rep = ermakov_suite(omega, opt.A, opt.B, opt.C, 0, opt.t1);
    std::cout << "wronskian drift:     " << rep.wronskian_drift << "\n";
    std::cout << "pinney residual:     " << rep.ep_residual << "\n";
    std::cout << "invariant drift:     " << rep.invariant_drift << "\n";
    std::cout << "time map monotone:   " << (rep.time_map_monotone ? "yes" : "no") << "\n";
    std::cout << "canonical residual:  " << rep.canonical_residual << "\n";
    bool ok = rep.invariant_drift <= 1e-6 && rep.ep_residual <= 1e-8 &&
              rep.time_map_monotone;
    write_manifest("ermakov", opt, {}, {},
                   Json{{"invariant_drift", rep.invariant_drift},
                        {"pinney_residual", rep.ep_residual}});
    return ok ? 0 : 1;
}

int cmd_determining(const Options& opt) {
    DeterminingModel model = opt.system == "bs2d" ? DeterminingModel::TwoAsset
                                                  : DeterminingModel::TwoFactor;
    DeterminingIntegrator integ(model);
    bool ok = true;
    if (model == DeterminingModel::TwoFactor) {
        auto tab = constant_coefficients(
            {{"P1", 0}, {"P2", 2}, {"P3", 1}, {"Q1", 1}, {"Q2", 1}, {"Q3", 0}});
        // translation mode of the eigenvalue-2 direction: b1 = f = e^{t}
        DeterminingInput in;
        in.initial = {0, 1, 1, 1, 1, 0};
        auto res = integ.run(tab, in);
        double worst = 0;
        for (auto& s : res.samples)
            worst = std::max(worst, std::abs(s.state[1] - std::exp(s.t)) / std::exp(s.t));
        std::cout << "constant-coefficient mode error vs e^{c t}: " << worst << "\n";
        std::cout << "max residual along trajectory: " << res.max_solved_residual << "\n";
        ok = worst <= 1e-7 && res.max_solved_residual <= 1e-7;
    } else {
        auto tab = constant_coefficients(
            {{"P1", 1}, {"Q1", 0}, {"Q2", 0}, {"Q3", 1}, {"k", 0.05}});
        DeterminingInput in;
        in.initial = {0, 1, 0.5, 0.2, -0.3, 0};
        auto res = integ.run(tab, in);
        std::cout << "max residual along trajectory: "
                  << std::max(res.max_solved_residual, res.max_constraint_residual)
                  << "\n";
        ok = res.max_solved_residual <= 1e-7 && res.max_constraint_residual <= 1e-7;
    }
    write_manifest("determining", opt, {}, {}, Json{{"ok", ok}});
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"symfin: symmetry analysis and numeric validation for (1+2) "
                 "evolution equations of option and commodity pricing"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&](CLI::App* cmd, bool needs_model) {
        if (needs_model) cmd->add_option("--model", opt.model, "catalog model id");
        cmd->add_option("--config", opt.config_path, "key=value config file");
        cmd->add_option("--out", opt.out_path, "output artifact path");
        cmd->add_option("--param", opt.params, "parameter override key=value");
        cmd->add_option("--grid", opt.grid_spec, "nx,ny,nt[,xmin,xmax,ymin,ymax,t0,t1]");
        cmd->add_option("--tol", opt.tol, "acceptance tolerance");
    };

    auto* verify = app.add_subcommand("verify", "verify a generator catalog");
    add_common(verify, true);
    verify->add_option("--generators", opt.generators_path,
                       "JSON generator list overriding the catalog");
    auto* classify_cmd =
        app.add_subcommand("classify", "commutator table and algebra label");
    add_common(classify_cmd, true);
    auto* reduce_cmd = app.add_subcommand("reduce", "two-step symmetry reduction");
    add_common(reduce_cmd, true);
    reduce_cmd->add_option("--c1", opt.c1_str, "first reduction constant (rational)");
    reduce_cmd->add_option("--c2", opt.c2_str, "second reduction constant (rational)");
    auto* solve_cmd = app.add_subcommand("solve", "ADI solve with CSV slice output");
    add_common(solve_cmd, true);
    solve_cmd->add_option("--r0", opt.r0, "constant rate for the nonautonomous model");
    auto* fig3_cmd = app.add_subcommand("fig3", "oscillating-rate scenario");
    add_common(fig3_cmd, false);
    fig3_cmd->add_option("--r0", opt.r0, "base rate");
    fig3_cmd->add_option("--eps", opt.eps, "oscillation amplitude");
    fig3_cmd->add_option("--omega", opt.omega, "oscillation frequency");
    fig3_cmd->add_option("--c1", opt.c1, "x exponent of the invariant solution");
    fig3_cmd->add_option("--c2", opt.c2, "y exponent of the invariant solution");
    auto* erm = app.add_subcommand("ermakov", "Ermakov-Pinney validation suite");
    add_common(erm, false);
    erm->add_option("--t1", opt.t1, "integration horizon");
    erm->add_option("--slope", opt.slope, "omega(t) = sqrt(1 + slope t)");
    erm->add_option("--A", opt.A, "Pinney constant A");
    erm->add_option("--B", opt.B, "Pinney constant B");
    erm->add_option("--C", opt.C, "Pinney constant C");
    auto* det = app.add_subcommand("determining", "integrate a determining system");
    add_common(det, false);
    det->add_option("--system", opt.system, "twofactor or bs2d");

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify->parsed()) return cmd_verify(opt);
        if (classify_cmd->parsed()) return cmd_classify(opt);
        if (reduce_cmd->parsed()) return cmd_reduce(opt);
        if (solve_cmd->parsed()) return cmd_solve(opt);
        if (fig3_cmd->parsed()) return cmd_fig3(opt);
        if (erm->parsed()) return cmd_ermakov(opt);
        if (det->parsed()) return cmd_determining(opt);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const undeclared_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const parse_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
