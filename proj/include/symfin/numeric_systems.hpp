#pragma once

// Determining-system integration, the Ermakov-Pinney validation suite and
// the oscillating-rate scenario (closed form vs finite differences, with a
// spectral periodicity check).  Included at the end of numeric.hpp.

#include <algorithm>
#include <array>
#include <fstream>

namespace symfin {

// ---------------------------------------------------------------------------
// determining-system integration

enum class DeterminingModel { TwoFactor, TwoAsset };

/// coefficient callbacks: name -> f(order, t) giving the order-th derivative
using CoefficientTable = std::map<std::string, std::function<double(int, double)>>;

struct DeterminingInput {
    double B2 = 0;
    // state: a, b1, b1', f, f', h  (f is the y-translation, h the eta shift)
    std::array<double, 6> initial{};
    double t0 = 0, t1 = 1;
    int samples = 64;
    OdeOptions ode{};
};

struct DeterminingSample {
    double t;
    std::array<double, 6> state;
    std::vector<double> residuals; // appendix residuals, solved-equation order
};

struct DeterminingResult {
    std::vector<DeterminingSample> samples;
    double max_solved_residual = 0;     // equations used to build the RHS
    double max_constraint_residual = 0; // remaining appendix equations
};

/// Integrates the appendix system as an explicit ODE: the highest
/// derivatives b1'', f'' and h' are solved from their equations, a' from the
/// first-order a-equation (the x^2-y^2 component for the two-factor model,
/// the y^2-x^2 component for the two-asset one) and a'' from its time
/// derivative.  A vanishing leading coefficient raises singular_error.
class DeterminingIntegrator {
  public:
    explicit DeterminingIntegrator(DeterminingModel model) : model_(model) {
        if (model == DeterminingModel::TwoFactor) {
            pde_ = build_twofactor_nonauto(ws_);
            names_ = {"P1", "P2", "P3", "Q1", "Q2", "Q3"};
            auto gc = generic_opaque(ws_);
            auto e = determining_residuals_twofactor(pde_, gc);
            eqs_.assign(e.begin(), e.end());
            a_eq_ = 3;      // x^2 - y^2 component, first order in a
            h_coeff_ = -2;  // e1 = ... - 2 h'
        } else {
            pde_ = build_bs2d_nonauto(ws_);
            names_ = {"P1", "Q1", "Q2", "Q3", "k"};
            auto gc = generic_opaque(ws_);
            auto e = determining_residuals_bs2d(pde_, gc);
            eqs_.assign(e.begin(), e.end());
            a_eq_ = 4;     // y^2 - x^2 component
            h_coeff_ = 2;  // e1 = ... + 2 g'
        }
        auto& st = ws_.st();
        AtomId a = st.id_of("a");
        a1_ = st.opaque_order(a, 1);
        a2_ = st.opaque_order(a, 2);
        AtomId b1 = st.id_of("b1");
        b12_ = st.opaque_order(b1, 2);
        AtomId f = st.id_of("f");
        f2_ = st.opaque_order(f, 2);
        AtomId h = st.id_of("h");
        h1_ = st.opaque_order(h, 1);

        const Expression& ea = eqs_[static_cast<std::size_t>(a_eq_)];
        Ca_ = coefficient_of(ea, a1_, 1);
        Ra_ = ea - Ca_ * Expression::atom(ws_.table(), a1_);
        Expression da = ea.diff("t");
        Ca2_ = coefficient_of(da, a2_, 1);
        Ra2_ = da - Ca2_ * Expression::atom(ws_.table(), a2_);
        r_b1_ = eqs_[1].substitute({{b12_, poly_zero()}});
        r_f_ = eqs_[2].substitute({{f2_, poly_zero()}});
        r_h_ = eqs_[0].substitute({{h1_, poly_zero()}});
    }

    DeterminingResult run(const CoefficientTable& coeffs, const DeterminingInput& in) {
        DeterminingResult out;
        auto env_at = [&](double t, const std::vector<double>& y) {
            NumEnv env;
            env["t"] = t;
            for (auto& n : names_) {
                auto it = coeffs.find(n);
                if (it == coeffs.end())
                    throw error("missing coefficient callback '" + n + "'");
                env[n] = it->second(0, t);
                env[n + "'"] = it->second(1, t);
                env[n + "''"] = it->second(2, t);
                env[n + "'''"] = it->second(3, t);
            }
            env["B2"] = in.B2;
            env["a"] = y[0];
            env["b1"] = y[1];
            env["b1'"] = y[2];
            env["f"] = y[3];
            env["f'"] = y[4];
            env["h"] = y[5];
            return env;
        };
        auto close_env = [&](NumEnv& env) {
            // a' from the first-order a-equation; a degenerate-but-consistent
            // equation (0 = 0, e.g. the autonomous two-asset case) leaves a
            // unconstrained here and the minimal closure a' = 0 is taken
            auto solve_or_zero = [&](const Expression& C, const Expression& R,
                                     const char* what) {
                double c = eval_numeric(C, env);
                double r = eval_numeric(R, env);
                if (std::abs(c) < 1e-12) {
                    if (std::abs(r) < 1e-9) return 0.0;
                    throw singular_error(std::string("determining system: singular "
                                                     "leading coefficient for ") +
                                         what);
                }
                return -r / c;
            };
            env["a'"] = solve_or_zero(Ca_, Ra_, "a'");
            env["a''"] = solve_or_zero(Ca2_, Ra2_, "a''");
            env["b1''"] = -eval_numeric(r_b1_, env) / 2.0;
            env["f''"] = -eval_numeric(r_f_, env) / 2.0;
            env["h'"] = -eval_numeric(r_h_, env) / h_coeff_;
        };
        auto rhs = [&](double t, const std::vector<double>& y, std::vector<double>& dy) {
            NumEnv env = env_at(t, y);
            close_env(env);
            dy[0] = env["a'"];
            dy[1] = y[2];
            dy[2] = env["b1''"];
            dy[3] = y[4];
            dy[4] = env["f''"];
            dy[5] = env["h'"];
        };

        double span = in.t1 - in.t0;
        double sample_dt = span / std::max(1, in.samples - 1);
        double next_sample = in.t0;
        auto observe = [&](double t, const std::vector<double>& y) {
            if (t + 1e-12 < next_sample) return;
            next_sample += sample_dt;
            DeterminingSample s;
            s.t = t;
            for (int i = 0; i < 6; ++i) s.state[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)];
            NumEnv env = env_at(t, y);
            close_env(env);
            for (std::size_t e = 0; e < eqs_.size(); ++e) {
                double r = eval_numeric(eqs_[e], env);
                s.residuals.push_back(r);
                bool solved = e == 0 || e == 1 || e == 2 || e == static_cast<std::size_t>(a_eq_);
                double& slot =
                    solved ? out.max_solved_residual : out.max_constraint_residual;
                slot = std::max(slot, std::abs(r));
            }
            out.samples.push_back(std::move(s));
        };
        std::vector<double> y(in.initial.begin(), in.initial.end());
        integrate_ode(rhs, y, in.t0, in.t1, in.ode, observe);
        return out;
    }

    const std::vector<std::string>& coefficient_names() const { return names_; }

  private:
    DeterminingModel model_;
    Workspace ws_;
    EvolutionPDE pde_;
    std::vector<std::string> names_;
    std::vector<Expression> eqs_;
    int a_eq_ = 0;
    double h_coeff_ = 2;
    AtomId a1_ = -1, a2_ = -1, b12_ = -1, f2_ = -1, h1_ = -1;
    Expression Ca_, Ra_, Ca2_, Ra2_, r_b1_, r_f_, r_h_;
};

/// Constant-coefficient callbacks.
inline CoefficientTable constant_coefficients(const std::map<std::string, double>& vals) {
    CoefficientTable tab;
    for (auto& [k, v] : vals) {
        double value = v;
        tab[k] = [value](int order, double) { return order == 0 ? value : 0.0; };
    }
    return tab;
}

// ---------------------------------------------------------------------------
// Ermakov-Pinney suite

struct ErmakovReport {
    bool constraint_ok = true;
    double wronskian_drift = 0;
    double ep_residual = 0;        // max |rho'' + w^2 rho - 1/rho^3|
    double invariant_drift = 0;    // max |I(t) - I(0)|
    bool time_map_monotone = true; // T(t) = int rho^-2 strictly increasing
    double canonical_residual = 0; // max |dQ/dT - P|, |dP/dT + Q|
};

/// Integrates the linear oscillator x'' + w(t)^2 x = 0, forms the
/// Pinney combination rho = sqrt(A v1^2 + 2B v1 v2 + C v2^2) and checks the
/// nonlinear equation, the invariant
/// I = ((rho x' - rho' x)^2 + (x/rho)^2)/2 and the canonical time map.
/// The admissibility constraint is A C - B^2 = 1/W^2 with W the (constant)
/// Wronskian of v1, v2.
inline ErmakovReport ermakov_suite(const std::function<double(double)>& omega, double A,
                                   double B, double C, double t0, double t1,
                                   const OdeOptions& opt = {1e-11, 1e-13, 1e-3, 0.1}) {
    // state: v1, v1', v2, v2', x, x', T
    auto rhs = [&](double t, const std::vector<double>& y, std::vector<double>& dy) {
        double w2 = omega(t);
        w2 *= w2;
        dy[0] = y[1];
        dy[1] = -w2 * y[0];
        dy[2] = y[3];
        dy[3] = -w2 * y[2];
        dy[4] = y[5];
        dy[5] = -w2 * y[4];
        double rho2 = A * y[0] * y[0] + 2 * B * y[0] * y[2] + C * y[2] * y[2];
        dy[6] = rho2 > 0 ? 1.0 / rho2 : 0.0;
    };
    std::vector<double> y0 = {1, 0, 0, 1, 1, 0.3, 0};
    double W0 = y0[0] * y0[3] - y0[1] * y0[2]; // = 1

    ErmakovReport rep;
    if (std::abs(A * C - B * B - 1.0 / (W0 * W0)) > 1e-12) {
        rep.constraint_ok = false;
        throw error("ermakov_suite: constraint A C - B^2 = 1/W^2 violated");
    }

    double I0 = std::numeric_limits<double>::quiet_NaN();
    double lastT = -std::numeric_limits<double>::infinity();
    std::vector<std::array<double, 3>> tqp; // (T, Q, P) samples
    auto observe = [&](double t, const std::vector<double>& y) {
        double v1 = y[0], dv1 = y[1], v2 = y[2], dv2 = y[3], x = y[4], dx = y[5];
        double W = v1 * dv2 - dv1 * v2;
        rep.wronskian_drift = std::max(rep.wronskian_drift, std::abs(W - W0));
        double Q2 = A * v1 * v1 + 2 * B * v1 * v2 + C * v2 * v2;
        double rho = std::sqrt(Q2);
        double Qd = 2 * A * v1 * dv1 + 2 * B * (dv1 * v2 + v1 * dv2) + 2 * C * v2 * dv2;
        double w2 = omega(t);
        w2 *= w2;
        double Qdd = 2 * A * (dv1 * dv1 - w2 * v1 * v1) +
                     2 * B * (2 * dv1 * dv2 - 2 * w2 * v1 * v2) +
                     2 * C * (dv2 * dv2 - w2 * v2 * v2);
        double rhod = Qd / (2 * rho);
        double rhodd = Qdd / (2 * rho) - Qd * Qd / (4 * Q2 * rho);
        rep.ep_residual = std::max(rep.ep_residual,
                                   std::abs(rhodd + w2 * rho - 1.0 / (rho * Q2)));
        double lewis = 0.5 * (std::pow(rho * dx - rhod * x, 2) + std::pow(x / rho, 2));
        if (std::isnan(I0)) I0 = lewis;
        rep.invariant_drift = std::max(rep.invariant_drift, std::abs(lewis - I0));
        double T = y[6];
        if (T <= lastT) rep.time_map_monotone = false;
        lastT = T;
        tqp.push_back({T, x / rho, rho * dx - rhod * x});
    };
    integrate_ode(rhs, y0, t0, t1, opt, observe);

    // canonical check by centered differences in T
    for (std::size_t i = 1; i + 1 < tqp.size(); ++i) {
        double dT = tqp[i + 1][0] - tqp[i - 1][0];
        if (dT <= 1e-12) continue;
        double dQ = (tqp[i + 1][1] - tqp[i - 1][1]) / dT;
        double dP = (tqp[i + 1][2] - tqp[i - 1][2]) / dT;
        rep.canonical_residual = std::max(rep.canonical_residual,
                                          std::abs(dQ - tqp[i][2]));
        rep.canonical_residual = std::max(rep.canonical_residual,
                                          std::abs(dP + tqp[i][1]));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// transform-equivalence solver and interpolation

/// Solve a constant-coefficient canonical equation by mapping to heat
/// coordinates, solving the heat equation there on a padded grid, and
/// mapping the solution back (bicubic resampling).  The exact solution
/// callback supplies initial and boundary data in the original chart.
inline Field solve_via_heat(const EvolutionPDE& pde, const Grid& grid,
                            const std::function<double(double, double, double)>& exact_u) {
    Workspace& ws = *pde.ws;
    auto tr = to_heat(pde);
    const TransformStage& s1 = tr.stages[0];

    // numeric shift and multiplier (t-only expressions)
    auto shift = [&](int i, double t) {
        Expression d = s1.old_of_new[static_cast<std::size_t>(i + 1)] -
                       Expression::atom(ws.table(), s1.to.x[static_cast<std::size_t>(i)]);
        return eval_numeric(d, {{"t", t}});
    };
    auto mult = [&](double t) { return eval_numeric(s1.multiplier, {{"t", t}}); };
    double c2 = to_double(Rational(-1) / pde.s);

    // padded heat grid with the same spacing, aligned time slabs
    double pad = 0;
    for (int n = 0; n <= grid.nt; ++n)
        pad = std::max({pad, std::abs(shift(0, grid.t(n))), std::abs(shift(1, grid.t(n)))});
    int extra = static_cast<int>(std::ceil((pad + 3 * grid.dx()) / grid.dx()));
    if (extra % 2 == 1) ++extra;
    double Ta = c2 * grid.t1, Tb = c2 * grid.t0;
    bool flip = Ta > Tb;
    if (flip) std::swap(Ta, Tb);
    Grid hgrid(grid.x_min - extra * grid.dx(), grid.x_max + extra * grid.dx(),
               grid.y_min - extra * grid.dy(), grid.y_max + extra * grid.dy(),
               grid.nx + 2 * extra, grid.ny + 2 * extra, Ta, Tb, grid.nt,
               TimeDirection::Forward);

    // heat-side equation on the transformed chart
    EvolutionPDE heat = apply_transformation(pde, tr);
    if (!is_heat_form(heat)) throw error("solve_via_heat: pullback is not heat form");

    auto old_t = [&](double T) { return T / c2; };
    auto v_exact = [&](double T, double xb, double yb) {
        double t = old_t(T);
        return exact_u(t, xb + shift(0, t), yb + shift(1, t)) / mult(t);
    };
    FdData hdata;
    // heat marches forward in T; pick the initial slab accordingly
    hdata.initial = [&](double xb, double yb) { return v_exact(hgrid.t0, xb, yb); };
    hdata.boundary = [&](double T, double xb, double yb) { return v_exact(T, xb, yb); };
    Field vfield = solve_fd(heat, hgrid, hdata);

    // map back: u(t,x,y) = m(t) v(c2 t, x - d1(t), y - d2(t))
    Field out;
    out.grid = grid;
    out.provenance = Provenance::Transformed;
    out.slabs.assign(static_cast<std::size_t>(grid.nt) + 1,
                     std::vector<double>(static_cast<std::size_t>(grid.nx * grid.ny), 0.0));
    for (int n = 0; n <= grid.nt; ++n) {
        double t = grid.t(n);
        double T = c2 * t;
        int k = static_cast<int>(std::llround((T - hgrid.t0) / hgrid.dt()));
        double m = mult(t);
        double d1 = shift(0, t), d2 = shift(1, t);
        for (int i = 0; i < grid.nx; ++i)
            for (int j = 0; j < grid.ny; ++j) {
                double v = detail::bicubic(vfield, k, grid.x(i) - d1, grid.y(j) - d2);
                out.at(n, i, j) = m * v;
            }
    }
    out.check_finite();
    return out;
}

inline double max_rel_error(const Field& a, const Field& b) {
    double scale = 0;
    for (auto& slab : b.slabs)
        for (double v : slab) scale = std::max(scale, std::abs(v));
    double worst = 0;
    for (std::size_t n = 0; n < a.slabs.size(); ++n)
        for (std::size_t q = 0; q < a.slabs[n].size(); ++q)
            worst = std::max(worst, std::abs(a.slabs[n][q] - b.slabs[n][q]));
    return scale > 0 ? worst / scale : worst;
}

// ---------------------------------------------------------------------------
// spectra and the oscillating-rate scenario

struct SpectrumPeak {
    bool oscillation = false;
    double omega = 0;
    int bin = 0;
    double amplitude = 0;
};

/// Dominant frequency of samples (uniform dt) after removing a linear trend.
inline SpectrumPeak dominant_frequency(const std::vector<double>& samples, double dt) {
    std::size_t n = samples.size();
    SpectrumPeak peak;
    if (n < 8) return peak;
    // least-squares linear detrend
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double x = static_cast<double>(i);
        sx += x;
        sy += samples[i];
        sxx += x * x;
        sxy += x * samples[i];
    }
    double N = static_cast<double>(n);
    double slope = (N * sxy - sx * sy) / (N * sxx - sx * sx);
    double icept = (sy - slope * sx) / N;
    std::vector<double> d(n);
    double scale = 0, amp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = samples[i] - (icept + slope * static_cast<double>(i));
        amp = std::max(amp, std::abs(d[i]));
        scale = std::max(scale, std::abs(samples[i]));
    }
    if (amp < 1e-4 * (1 + scale)) return peak; // effectively linear: no oscillation
    double T = dt * static_cast<double>(n);
    double best = -1;
    for (std::size_t j = 1; j <= n / 2; ++j) {
        double re = 0, im = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double ph = 2 * M_PI * static_cast<double>(j) * static_cast<double>(i) / N;
            re += d[i] * std::cos(ph);
            im += d[i] * std::sin(ph);
        }
        double p = re * re + im * im;
        if (p > best) {
            best = p;
            peak.bin = static_cast<int>(j);
        }
    }
    peak.oscillation = true;
    peak.omega = 2 * M_PI * static_cast<double>(peak.bin) / T;
    peak.amplitude = amp;
    return peak;
}

struct ScenarioResult {
    Field fd;
    Field exact;
    double max_rel_err = 0;
    SpectrumPeak peak;
    double omega_bin_width = 0;
};

/// Oscillating-rate scenario: mu1 = mu2 = k = r(t) = r0 + eps sin(omega t),
/// unit volatilities and zero correlation, so L1 = L2 = 1 + 2 r(t).
/// The closed form u = w(t) exp(c1 x + c2 y) drives terminal and boundary
/// data; the field is solved backward and compared against it.
inline ScenarioResult fig3_scenario(double r0, double eps, double omega, double c1,
                                    double c2, Grid grid) {
    grid.direction = TimeDirection::Backward;
    Workspace ws;
    auto pde = build_bs2d_special_nonauto(ws);

    auto rfun = [=](double t) { return r0 + eps * std::sin(omega * t); };
    auto Rint = [=](double t) {
        double osc = omega != 0 ? (eps / omega) * (1 - std::cos(omega * t)) : 0.0;
        return r0 * t + osc;
    };
    // log w = (1 + c1 + c2) int r + ((c1+c2)/2 - (c1^2+c2^2)/2) t
    auto logw = [=](double t) {
        return (1 + c1 + c2) * Rint(t) + (0.5 * (c1 + c2) - 0.5 * (c1 * c1 + c2 * c2)) * t;
    };
    auto exact = [=](double t, double x, double y) {
        return std::exp(logw(t) + c1 * x + c2 * y);
    };
    CoefficientEnv env = [=](double t) {
        NumEnv e;
        double r = rfun(t);
        e["Lam1"] = 1 + 2 * r;
        e["Lam2"] = 1 + 2 * r;
        e["k"] = r;
        return e;
    };

    ScenarioResult res;
    FdData data;
    data.initial = [&](double x, double y) { return exact(grid.t1, x, y); };
    data.boundary = [&](double t, double x, double y) { return exact(t, x, y); };
    res.fd = solve_fd(pde, grid, data, env);

    res.exact.grid = grid;
    res.exact.provenance = Provenance::ClosedForm;
    res.exact.slabs.assign(static_cast<std::size_t>(grid.nt) + 1,
                           std::vector<double>(static_cast<std::size_t>(grid.nx * grid.ny)));
    for (int n = 0; n <= grid.nt; ++n)
        for (int i = 0; i < grid.nx; ++i)
            for (int j = 0; j < grid.ny; ++j)
                res.exact.at(n, i, j) = exact(grid.t(n), grid.x(i), grid.y(j));
    res.max_rel_err = max_rel_error(res.fd, res.exact);

    // spectral check on log u along t at the spatial origin
    int i0 = grid.nx / 2, j0 = grid.ny / 2;
    std::vector<double> logs;
    for (int n = 0; n <= grid.nt; ++n) {
        double v = res.fd.at(n, i0, j0);
        logs.push_back(std::log(std::max(v, 1e-300)));
    }
    res.peak = dominant_frequency(logs, grid.dt());
    res.omega_bin_width = 2 * M_PI / (grid.t1 - grid.t0);
    return res;
}

/// CSV slice at y = 0: header t,x,y,u, rows t-major then x, 17 significant
/// digits, deterministic order.
inline void write_slice_csv(const Field& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw error("cannot open '" + path + "' for writing");
    out << "t,x,y,u\n";
    const Grid& g = f.grid;
    int j0 = g.ny / 2;
    char buf[512];
    for (int n = 0; n <= g.nt; ++n)
        for (int i = 0; i < g.nx; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", g.t(n), g.x(i),
                          g.y(j0), f.at(n, i, j0));
            out << buf;
        }
}

} // namespace symfin
