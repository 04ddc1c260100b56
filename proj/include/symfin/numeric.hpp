#pragma once

// Finite-difference validation layer: Peaceman-Rachford ADI for the (1+2)
// catalog equations, discrete residuals, finite-flow checks, an adaptive
// Runge-Kutta integrator, the determining-system integration and the
// Ermakov-Pinney suite.
//
// Everything here works in doubles; symbolic expressions enter only through
// eval_numeric with per-time atom bindings supplied by the caller.

#include "symfin/reduce.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

namespace symfin {

// ---------------------------------------------------------------------------
// small utilities

inline unsigned worker_threads() {
    if (const char* env = std::getenv("SYMFIN_THREADS")) {
        long n = std::strtol(env, nullptr, 10);
        if (n > 0) return static_cast<unsigned>(n);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

inline void parallel_for(int n, const std::function<void(int)>& fn) {
    unsigned workers = std::min<unsigned>(worker_threads(), static_cast<unsigned>(n));
    if (workers <= 1 || n < 64) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// grids and fields

enum class TimeDirection { Forward, Backward };

struct Grid {
    double x_min = -2, x_max = 2, y_min = -2, y_max = 2;
    int nx = 101, ny = 101;
    double t0 = 0, t1 = 1;
    int nt = 400;
    TimeDirection direction = TimeDirection::Forward;

    Grid() = default;
    Grid(double xmin, double xmax, double ymin, double ymax, int nx_, int ny_, double t0_,
         double t1_, int nt_, TimeDirection dir)
        : x_min(xmin), x_max(xmax), y_min(ymin), y_max(ymax), nx(nx_), ny(ny_), t0(t0_),
          t1(t1_), nt(nt_), direction(dir) {
        if (nx < 41 || ny < 41 || nx % 2 == 0 || ny % 2 == 0)
            throw shape_error("grid: node counts must be odd and at least 41");
        if (nt < 1 || t1 <= t0) throw shape_error("grid: bad time range");
    }

    double dx() const { return (x_max - x_min) / (nx - 1); }
    double dy() const { return (y_max - y_min) / (ny - 1); }
    double dt() const { return (t1 - t0) / nt; }
    double x(int i) const { return x_min + i * dx(); }
    double y(int j) const { return y_min + j * dy(); }
    double t(int n) const { return t0 + n * dt(); }
};

enum class Provenance { FiniteDifference, ClosedForm, Transformed };

struct Field {
    Grid grid;
    Provenance provenance = Provenance::FiniteDifference;
    std::vector<std::vector<double>> slabs; // nt+1 slabs of nx*ny, t-ordered

    double& at(int n, int i, int j) {
        return slabs[static_cast<std::size_t>(n)]
                    [static_cast<std::size_t>(i * grid.ny + j)];
    }
    double at(int n, int i, int j) const {
        return slabs[static_cast<std::size_t>(n)]
                    [static_cast<std::size_t>(i * grid.ny + j)];
    }
    void check_finite() const {
        for (std::size_t n = 0; n < slabs.size(); ++n)
            for (double v : slabs[n])
                if (!std::isfinite(v))
                    throw error("field contains a non-finite value at time slab " +
                                std::to_string(n));
    }
};

/// Per-time numeric bindings for the opaque atoms of a model.
using CoefficientEnv = std::function<NumEnv(double t)>;

inline NumEnv empty_env(double) { return {}; }

// ---------------------------------------------------------------------------
// coefficient extraction for the solver

namespace detail {

struct AffineDrift {
    Expression c0, cx, cy;
};

struct SolverCoefficients {
    double diffusion_scale; // A = c I with constant c
    Rational s;
    AffineDrift bx, by;
    Expression source;
    const EvolutionPDE* pde;

    double eval(const Expression& e, double t, const NumEnv& base) const {
        NumEnv env = base;
        env["t"] = t;
        return eval_numeric(e, env);
    }
};

inline SolverCoefficients extract_coefficients(const EvolutionPDE& pde) {
    if (pde.dim() != 2) throw shape_error("solver: (1+2) equations only");
    Expression a11 = pde.A[0][0];
    if (!a11.is_constant() || !pde.A[1][1].is_constant() || !pde.A[0][1].is_zero())
        throw shape_error("solver: principal part must be a constant multiple of the "
                          "identity Laplacian");
    if (a11.constant_value() != pde.A[1][1].constant_value())
        throw shape_error("solver: anisotropic principal part unsupported");
    SolverCoefficients sc;
    sc.diffusion_scale = to_double(a11.constant_value());
    sc.s = pde.s;
    LinearDrift b0 = split_linear_drift(pde, 0);
    LinearDrift b1 = split_linear_drift(pde, 1);
    sc.bx = {b0.c0, b0.cx, b0.cy};
    sc.by = {b1.c0, b1.cx, b1.cy};
    sc.source = pde.source;
    sc.pde = &pde;
    for (int i = 0; i < 2; ++i)
        if (pde.source.contains(pde.ctx.x[static_cast<std::size_t>(i)]))
            throw shape_error("solver: space-dependent source unsupported");
    return sc;
}

inline void thomas_solve(std::vector<double>& a, std::vector<double>& b,
                         std::vector<double>& c, std::vector<double>& d) {
    std::size_t n = b.size();
    for (std::size_t i = 1; i < n; ++i) {
        double m = a[i] / b[i - 1];
        b[i] -= m * c[i - 1];
        d[i] -= m * d[i - 1];
    }
    d[n - 1] /= b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) d[i] = (d[i] - c[i] * d[i + 1]) / b[i];
}

} // namespace detail

// ---------------------------------------------------------------------------
// ADI solver

struct FdData {
    // initial data at the starting time (t0 forward, t1 backward)
    std::function<double(double x, double y)> initial;
    // Dirichlet boundary values; when absent, a zero-curvature extrapolation
    // closes the boundary instead
    std::function<double(double t, double x, double y)> boundary;
};

/// Peaceman-Rachford ADI, drift implicit alongside each direction's
/// diffusion, source split evenly; second order in space and time.
inline Field solve_fd(const EvolutionPDE& pde, const Grid& grid, const FdData& data,
                      const CoefficientEnv& env_of_t = empty_env) {
    auto sc = detail::extract_coefficients(pde);
    double D = -1.0 / to_double(sc.s); // u_t = D (c lap u + B grad u + source u)
    double cdiff = sc.diffusion_scale;

    Field f;
    f.grid = grid;
    f.slabs.assign(static_cast<std::size_t>(grid.nt) + 1,
                   std::vector<double>(static_cast<std::size_t>(grid.nx * grid.ny), 0.0));

    bool forward = grid.direction == TimeDirection::Forward;
    int start = forward ? 0 : grid.nt;
    int stop = forward ? grid.nt : 0;
    int step = forward ? 1 : -1;

    for (int i = 0; i < grid.nx; ++i)
        for (int j = 0; j < grid.ny; ++j)
            f.at(start, i, j) = data.initial(grid.x(i), grid.y(j));

    double dx = grid.dx(), dy = grid.dy();
    int nx = grid.nx, ny = grid.ny;

    std::vector<double> ustar(static_cast<std::size_t>(nx * ny), 0.0);

    for (int n = start; n != stop; n += step) {
        double ta = grid.t(n), tb = grid.t(n + step);
        double h = tb - ta;
        double tm = 0.5 * (ta + tb);
        NumEnv em = env_of_t(tm);
        // affine drifts have t-only coefficients: six numbers per step
        double bx0 = sc.eval(sc.bx.c0, tm, em), bxx = sc.eval(sc.bx.cx, tm, em),
               bxy = sc.eval(sc.bx.cy, tm, em);
        double by0 = sc.eval(sc.by.c0, tm, em), byx = sc.eval(sc.by.cx, tm, em),
               byy = sc.eval(sc.by.cy, tm, em);
        auto drift = [&](const detail::AffineDrift* ad, double x, double y) {
            return ad == &sc.bx ? bx0 + bxx * x + bxy * y : by0 + byx * x + byy * y;
        };
        double gamma = sc.eval(sc.source, tm, em);
        const auto& ua = f.slabs[static_cast<std::size_t>(n)];
        auto& ub = f.slabs[static_cast<std::size_t>(n + step)];

        auto bval = [&](double t, double x, double y) {
            return data.boundary ? data.boundary(t, x, y)
                                 : std::numeric_limits<double>::quiet_NaN();
        };

        // sweep 1: implicit in x, explicit in y
        parallel_for(ny - 2, [&](int jj) {
            int j = jj + 1;
            double yv = grid.y(j);
            std::vector<double> al(static_cast<std::size_t>(nx - 2)),
                bl(static_cast<std::size_t>(nx - 2)), cl(static_cast<std::size_t>(nx - 2)),
                dl(static_cast<std::size_t>(nx - 2));
            for (int i = 1; i < nx - 1; ++i) {
                double xv = grid.x(i);
                double b1 = drift(&sc.bx, xv, yv);
                double b2 = drift(&sc.by, xv, yv);
                // explicit y-part applied to the current slab
                double uy = (ua[static_cast<std::size_t>(i * ny + j + 1)] -
                             ua[static_cast<std::size_t>(i * ny + j - 1)]) /
                            (2 * dy);
                double uyy = (ua[static_cast<std::size_t>(i * ny + j + 1)] -
                              2 * ua[static_cast<std::size_t>(i * ny + j)] +
                              ua[static_cast<std::size_t>(i * ny + j - 1)]) /
                             (dy * dy);
                double L2u = D * (cdiff * uyy + b2 * uy +
                                  0.5 * gamma * ua[static_cast<std::size_t>(i * ny + j)]);
                dl[static_cast<std::size_t>(i - 1)] =
                    ua[static_cast<std::size_t>(i * ny + j)] + 0.5 * h * L2u;
                // implicit x operator
                double ax = D * cdiff / (dx * dx), bx1 = D * b1 / (2 * dx);
                al[static_cast<std::size_t>(i - 1)] = -0.5 * h * (ax - bx1);
                bl[static_cast<std::size_t>(i - 1)] =
                    1.0 - 0.5 * h * (-2 * ax + 0.5 * gamma * D);
                cl[static_cast<std::size_t>(i - 1)] = -0.5 * h * (ax + bx1);
            }
            // boundary closure for u*
            double left, right;
            if (data.boundary) {
                left = 0.5 * (bval(ta, grid.x(0), yv) + bval(tb, grid.x(0), yv));
                right = 0.5 * (bval(ta, grid.x(nx - 1), yv) + bval(tb, grid.x(nx - 1), yv));
            } else {
                left = right = 0.0; // folded below via extrapolation rows
            }
            if (data.boundary) {
                dl[0] -= al[0] * left;
                dl[static_cast<std::size_t>(nx - 3)] -=
                    cl[static_cast<std::size_t>(nx - 3)] * right;
                al[0] = 0;
                cl[static_cast<std::size_t>(nx - 3)] = 0;
            } else {
                // zero second normal derivative: u0 = 2 u1 - u2
                bl[0] += 2 * al[0];
                cl[0] -= al[0];
                al[0] = 0;
                std::size_t last = static_cast<std::size_t>(nx - 3);
                bl[last] += 2 * cl[last];
                al[last] -= cl[last];
                cl[last] = 0;
            }
            detail::thomas_solve(al, bl, cl, dl);
            for (int i = 1; i < nx - 1; ++i)
                ustar[static_cast<std::size_t>(i * ny + j)] =
                    dl[static_cast<std::size_t>(i - 1)];
            if (data.boundary) {
                ustar[static_cast<std::size_t>(0 * ny + j)] = left;
                ustar[static_cast<std::size_t>((nx - 1) * ny + j)] = right;
            } else {
                ustar[static_cast<std::size_t>(0 * ny + j)] =
                    2 * ustar[static_cast<std::size_t>(1 * ny + j)] -
                    ustar[static_cast<std::size_t>(2 * ny + j)];
                ustar[static_cast<std::size_t>((nx - 1) * ny + j)] =
                    2 * ustar[static_cast<std::size_t>((nx - 2) * ny + j)] -
                    ustar[static_cast<std::size_t>((nx - 3) * ny + j)];
            }
        });
        // top/bottom rows of ustar for the y-sweep's explicit part
        for (int i = 0; i < nx; ++i) {
            if (data.boundary) {
                ustar[static_cast<std::size_t>(i * ny + 0)] =
                    0.5 * (bval(ta, grid.x(i), grid.y(0)) + bval(tb, grid.x(i), grid.y(0)));
                ustar[static_cast<std::size_t>(i * ny + ny - 1)] =
                    0.5 * (bval(ta, grid.x(i), grid.y(ny - 1)) +
                           bval(tb, grid.x(i), grid.y(ny - 1)));
            } else {
                ustar[static_cast<std::size_t>(i * ny + 0)] =
                    2 * ustar[static_cast<std::size_t>(i * ny + 1)] -
                    ustar[static_cast<std::size_t>(i * ny + 2)];
                ustar[static_cast<std::size_t>(i * ny + ny - 1)] =
                    2 * ustar[static_cast<std::size_t>(i * ny + ny - 2)] -
                    ustar[static_cast<std::size_t>(i * ny + ny - 3)];
            }
        }

        // sweep 2: implicit in y, explicit in x on u*
        parallel_for(nx - 2, [&](int ii) {
            int i = ii + 1;
            double xv = grid.x(i);
            std::vector<double> al(static_cast<std::size_t>(ny - 2)),
                bl(static_cast<std::size_t>(ny - 2)), cl(static_cast<std::size_t>(ny - 2)),
                dl(static_cast<std::size_t>(ny - 2));
            for (int j = 1; j < ny - 1; ++j) {
                double yv = grid.y(j);
                double b1 = drift(&sc.bx, xv, yv);
                double b2 = drift(&sc.by, xv, yv);
                double uxs = (ustar[static_cast<std::size_t>((i + 1) * ny + j)] -
                              ustar[static_cast<std::size_t>((i - 1) * ny + j)]) /
                             (2 * dx);
                double uxx = (ustar[static_cast<std::size_t>((i + 1) * ny + j)] -
                              2 * ustar[static_cast<std::size_t>(i * ny + j)] +
                              ustar[static_cast<std::size_t>((i - 1) * ny + j)]) /
                             (dx * dx);
                double L1u = D * (cdiff * uxx + b1 * uxs +
                                  0.5 * gamma * ustar[static_cast<std::size_t>(i * ny + j)]);
                dl[static_cast<std::size_t>(j - 1)] =
                    ustar[static_cast<std::size_t>(i * ny + j)] + 0.5 * h * L1u;
                double ay = D * cdiff / (dy * dy), by1 = D * b2 / (2 * dy);
                al[static_cast<std::size_t>(j - 1)] = -0.5 * h * (ay - by1);
                bl[static_cast<std::size_t>(j - 1)] =
                    1.0 - 0.5 * h * (-2 * ay + 0.5 * gamma * D);
                cl[static_cast<std::size_t>(j - 1)] = -0.5 * h * (ay + by1);
            }
            double bot, top;
            if (data.boundary) {
                bot = bval(tb, xv, grid.y(0));
                top = bval(tb, xv, grid.y(ny - 1));
                dl[0] -= al[0] * bot;
                dl[static_cast<std::size_t>(ny - 3)] -=
                    cl[static_cast<std::size_t>(ny - 3)] * top;
                al[0] = 0;
                cl[static_cast<std::size_t>(ny - 3)] = 0;
            } else {
                bl[0] += 2 * al[0];
                cl[0] -= al[0];
                al[0] = 0;
                std::size_t last = static_cast<std::size_t>(ny - 3);
                bl[last] += 2 * cl[last];
                al[last] -= cl[last];
                cl[last] = 0;
            }
            detail::thomas_solve(al, bl, cl, dl);
            double* out = ub.data() + static_cast<std::ptrdiff_t>(i * ny);
            for (int j = 1; j < ny - 1; ++j) out[j] = dl[static_cast<std::size_t>(j - 1)];
            if (data.boundary) {
                out[0] = bot;
                out[ny - 1] = top;
            } else {
                out[0] = 2 * out[1] - out[2];
                out[ny - 1] = 2 * out[ny - 2] - out[ny - 3];
            }
        });
        // x-boundary columns of the new slab
        for (int j = 0; j < ny; ++j) {
            if (data.boundary) {
                ub[static_cast<std::size_t>(0 * ny + j)] = bval(tb, grid.x(0), grid.y(j));
                ub[static_cast<std::size_t>((nx - 1) * ny + j)] =
                    bval(tb, grid.x(nx - 1), grid.y(j));
            } else {
                ub[static_cast<std::size_t>(0 * ny + j)] =
                    2 * ub[static_cast<std::size_t>(1 * ny + j)] -
                    ub[static_cast<std::size_t>(2 * ny + j)];
                ub[static_cast<std::size_t>((nx - 1) * ny + j)] =
                    2 * ub[static_cast<std::size_t>((nx - 2) * ny + j)] -
                    ub[static_cast<std::size_t>((nx - 3) * ny + j)];
            }
        }
        for (double v : ub)
            if (!std::isfinite(v))
                throw error("solve_fd: non-finite value after step " + std::to_string(n));
    }
    return f;
}

/// Max-norm centered-difference residual of Theta over interior nodes and
/// interior times.
inline double discrete_residual(const Field& f, const EvolutionPDE& pde,
                                const CoefficientEnv& env_of_t = empty_env) {
    auto sc = detail::extract_coefficients(pde);
    const Grid& g = f.grid;
    double dx = g.dx(), dy = g.dy(), dt = g.dt();
    double worst = 0;
    double s = to_double(sc.s);
    for (int n = 1; n < g.nt; ++n) {
        double t = g.t(n);
        NumEnv em = env_of_t(t);
        double gamma = sc.eval(sc.source, t, em);
        double c0x = sc.eval(sc.bx.c0, t, em), cxx = sc.eval(sc.bx.cx, t, em),
               cxy = sc.eval(sc.bx.cy, t, em);
        double c0y = sc.eval(sc.by.c0, t, em), cyx = sc.eval(sc.by.cx, t, em),
               cyy = sc.eval(sc.by.cy, t, em);
        for (int i = 1; i < g.nx - 1; ++i)
            for (int j = 1; j < g.ny - 1; ++j) {
                double u = f.at(n, i, j);
                if (!std::isfinite(u)) continue;
                double uxx = (f.at(n, i + 1, j) - 2 * u + f.at(n, i - 1, j)) / (dx * dx);
                double uyy = (f.at(n, i, j + 1) - 2 * u + f.at(n, i, j - 1)) / (dy * dy);
                double ux = (f.at(n, i + 1, j) - f.at(n, i - 1, j)) / (2 * dx);
                double uy = (f.at(n, i, j + 1) - f.at(n, i, j - 1)) / (2 * dy);
                double ut = (f.at(n + 1, i, j) - f.at(n - 1, i, j)) / (2 * dt);
                if (!std::isfinite(uxx) || !std::isfinite(uyy) || !std::isfinite(ux) ||
                    !std::isfinite(uy) || !std::isfinite(ut))
                    continue;
                double bx = c0x + cxx * g.x(i) + cxy * g.y(j);
                double by = c0y + cyx * g.x(i) + cyy * g.y(j);
                double theta = sc.diffusion_scale * (uxx + uyy) + bx * ux + by * uy +
                               gamma * u + s * ut;
                worst = std::max(worst, std::abs(theta));
            }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// finite flows

namespace detail {

inline double catmull_rom(double p0, double p1, double p2, double p3, double s) {
    return 0.5 * ((2 * p1) + (-p0 + p2) * s + (2 * p0 - 5 * p1 + 4 * p2 - p3) * s * s +
                  (-p0 + 3 * p1 - 3 * p2 + p3) * s * s * s);
}

/// C1 bicubic sample; NaN outside the valid interior.
inline double bicubic(const Field& f, int n, double x, double y) {
    const Grid& g = f.grid;
    double fx = (x - g.x_min) / g.dx(), fy = (y - g.y_min) / g.dy();
    int i = static_cast<int>(std::floor(fx)), j = static_cast<int>(std::floor(fy));
    if (i < 1 || j < 1 || i >= g.nx - 2 || j >= g.ny - 2)
        return std::numeric_limits<double>::quiet_NaN();
    double sx = fx - i, sy = fy - j;
    double col[4];
    for (int c = -1; c <= 2; ++c)
        col[c + 1] = catmull_rom(f.at(n, i - 1, j + c), f.at(n, i, j + c),
                                 f.at(n, i + 1, j + c), f.at(n, i + 2, j + c), sx);
    return catmull_rom(col[0], col[1], col[2], col[3], sy);
}

/// Polynomial in (x, y) with numeric coefficients, frozen at one time.
struct XYPoly {
    std::vector<std::array<double, 3>> terms; // (c, i, j) with integer powers

    static XYPoly freeze(const Expression& e, AtomId xa, AtomId ya, double t,
                         const NumEnv& base) {
        XYPoly p;
        auto groups = group_by(e, {xa, ya});
        for (auto& [m, coeff] : groups) {
            NumEnv env = base;
            env["t"] = t;
            double cval = eval_numeric(coeff, env);
            int ix = m.exponent(xa), iy = m.exponent(ya);
            p.terms.push_back({cval, static_cast<double>(ix), static_cast<double>(iy)});
        }
        return p;
    }
    double operator()(double x, double y) const {
        double acc = 0;
        for (auto& [cv, ix, iy] : terms)
            acc += cv * std::pow(x, ix) * std::pow(y, iy);
        return acc;
    }
};

} // namespace detail

/// Apply the finite transformation exp(eps X) to a field (xi_t = 0 fields
/// only) and return the discrete residual of the transformed field.
inline double flow_check(const EvolutionPDE& pde, const VectorField& X, double eps,
                         const Field& f, const CoefficientEnv& env_of_t = empty_env) {
    Workspace& ws = *pde.ws;
    const Coords& c = pde.ctx;
    if (!X.xi_t.is_zero())
        throw shape_error("flow_check: only xi_t = 0 flows are supported");
    Expression gmul = coefficient_of(X.eta, c.u, 1);
    if (!(X.eta - gmul * Expression::atom(ws.table(), c.u)).is_zero())
        throw shape_error("flow_check: eta must be linear homogeneous in u");

    const Grid& g = f.grid;
    Field out;
    out.grid = g;
    out.provenance = Provenance::Transformed;
    out.slabs.assign(f.slabs.size(),
                     std::vector<double>(static_cast<std::size_t>(g.nx * g.ny),
                                         std::numeric_limits<double>::quiet_NaN()));

    auto interp = [&](int n, double x, double y) -> double {
        return detail::bicubic(f, n, x, y);
    };

    for (int n = 0; n <= g.nt; ++n) {
        double t = g.t(n);
        NumEnv base = env_of_t(t);
        auto xi0 = detail::XYPoly::freeze(X.xi[0], c.x[0], c.x[1], t, base);
        auto xi1 = detail::XYPoly::freeze(X.xi[1], c.x[0], c.x[1], t, base);
        auto gm = detail::XYPoly::freeze(gmul, c.x[0], c.x[1], t, base);
        auto rhs = [&](double x, double y, double* d) {
            d[0] = -xi0(x, y);
            d[1] = -xi1(x, y);
            d[2] = gm(x, y);
        };
        parallel_for(g.nx, [&](int i) {
            for (int j = 0; j < g.ny; ++j) {
                // backward flow to the preimage, accumulating log-multiplier
                double st[3] = {g.x(i), g.y(j), 0.0};
                int steps = 16;
                double hh = eps / steps;
                for (int m = 0; m < steps; ++m) {
                    double k1[3], k2[3], k3[3], k4[3], tmp[3];
                    rhs(st[0], st[1], k1);
                    for (int q = 0; q < 3; ++q) tmp[q] = st[q] + 0.5 * hh * k1[q];
                    rhs(tmp[0], tmp[1], k2);
                    for (int q = 0; q < 3; ++q) tmp[q] = st[q] + 0.5 * hh * k2[q];
                    rhs(tmp[0], tmp[1], k3);
                    for (int q = 0; q < 3; ++q) tmp[q] = st[q] + hh * k3[q];
                    rhs(tmp[0], tmp[1], k4);
                    for (int q = 0; q < 3; ++q)
                        st[q] += hh / 6 * (k1[q] + 2 * k2[q] + 2 * k3[q] + k4[q]);
                }
                double v = interp(n, st[0], st[1]);
                out.at(n, i, j) = std::exp(st[2]) * v;
            }
        });
    }
    return discrete_residual(out, pde, env_of_t);
}

// ---------------------------------------------------------------------------
// adaptive Runge-Kutta (Dormand-Prince 5(4))

struct OdeOptions {
    double rtol = 1e-9;
    double atol = 1e-12;
    double h_init = 1e-3;
    double h_max = 0.25;
};

/// Integrate y' = f(t, y) from t0 to t1, calling observe at every accepted
/// step (including the endpoints).
inline void integrate_ode(const std::function<void(double, const std::vector<double>&,
                                                   std::vector<double>&)>& f,
                          std::vector<double> y, double t0, double t1,
                          const OdeOptions& opt,
                          const std::function<void(double, const std::vector<double>&)>&
                              observe = {}) {
    static const double A21 = 1.0 / 5;
    static const double A31 = 3.0 / 40, A32 = 9.0 / 40;
    static const double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
    static const double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                        A54 = -212.0 / 729;
    static const double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247,
                        A64 = 49.0 / 176, A65 = -5103.0 / 18656;
    static const double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192,
                        B5 = -2187.0 / 6784, B6 = 11.0 / 84;
    static const double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920,
                        E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40;

    std::size_t n = y.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y5(n);
    double t = t0;
    double dir = t1 >= t0 ? 1.0 : -1.0;
    double h = dir * std::min(opt.h_init, opt.h_max);
    if (observe) observe(t, y);
    f(t, y, k1);
    int guard = 0;
    while (dir * (t1 - t) > 1e-15 && ++guard < 4000000) {
        if (dir * (t + h - t1) > 0) h = t1 - t;
        auto stage = [&](std::vector<double>& k, double frac,
                         std::initializer_list<std::pair<const std::vector<double>*, double>>
                             terms) {
            for (std::size_t i = 0; i < n; ++i) {
                double acc = y[i];
                for (auto& [kv, cv] : terms) acc += h * cv * (*kv)[i];
                tmp[i] = acc;
            }
            f(t + frac * h, tmp, k);
        };
        stage(k2, 1.0 / 5, {{&k1, A21}});
        stage(k3, 3.0 / 10, {{&k1, A31}, {&k2, A32}});
        stage(k4, 4.0 / 5, {{&k1, A41}, {&k2, A42}, {&k3, A43}});
        stage(k5, 8.0 / 9, {{&k1, A51}, {&k2, A52}, {&k3, A53}, {&k4, A54}});
        stage(k6, 1.0, {{&k1, A61}, {&k2, A62}, {&k3, A63}, {&k4, A64}, {&k5, A65}});
        for (std::size_t i = 0; i < n; ++i)
            y5[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] +
                                B6 * k6[i]);
        f(t + h, y5, k7);
        double err = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] +
                            E6 * k6[i] + E7 * k7[i]);
            double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
            err += (e / sc) * (e / sc);
        }
        err = std::sqrt(err / static_cast<double>(n));
        if (err <= 1.0) {
            t += h;
            y = y5;
            k1 = k7;
            if (observe) observe(t, y);
        }
        double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
        fac = std::min(5.0, std::max(0.2, fac));
        h *= fac;
        if (std::abs(h) > opt.h_max) h = dir * opt.h_max;
        if (std::abs(h) < 1e-14) throw singular_error("integrate_ode: step size underflow");
    }
}

} // namespace symfin

#include "symfin/numeric_systems.hpp"
