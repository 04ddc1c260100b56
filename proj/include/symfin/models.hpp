#pragma once

// PDE catalog, market-parameter maps and point transformations.
//
// All catalog equations are written as
//     Theta = A^{ij} u_{,ij} + B^i u_{,i} + source*u + s*u_t
// with A symmetric (so the cross term carries a factor 2) and the time
// coefficient s stored exactly as the equation is normalised (-1, +2, -2...).
// Parameter maps between financial and canonical coordinates are *derived*
// by pulling the financial equation back through the coordinate change, not
// transcribed: the pullback is the single source of truth for them.

#include "symfin/expr.hpp"

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace symfin {

/// One symbol table shared by every expression of a scenario, plus
/// get-or-declare helpers so independent builders can reuse symbols.
class Workspace {
  public:
    Workspace() : st_(std::make_shared<SymbolTable>()) { st_->declare_time("t"); }

    const std::shared_ptr<SymbolTable>& table() const { return st_; }
    SymbolTable& st() { return *st_; }

    Expression var(const std::string& name, bool positive = false) {
        if (!st_->has(name)) st_->declare_variable(name, positive);
        return sym(name);
    }
    Expression constant(const std::string& name, bool positive = false) {
        if (!st_->has(name)) st_->declare_constant(name, positive);
        return sym(name);
    }
    Expression opaque(const std::string& name, bool positive = false) {
        if (!st_->has(name)) {
            if (positive)
                st_->declare_opaque_positive(name);
            else
                st_->declare_opaque(name);
        }
        return sym(name);
    }
    Expression antideriv(const std::string& name, const Expression& integrand) {
        if (!st_->has(name)) st_->declare_antideriv(name, integrand.poly());
        return sym(name);
    }
    Expression sym(const std::string& name) const {
        return Expression::symbol(st_, name);
    }
    Expression num(const Rational& r) const { return Expression::constant(st_, r); }
    Expression num(long n) const { return Expression::constant(st_, Rational(n)); }
    Expression parse(std::string_view text) const { return symfin::parse(st_, text); }

    /// sqrt(1-rho^2) for a rational correlation; named atom, square folded.
    Expression sqrt_one_minus_sq(const std::string& name, const Rational& rho) {
        Rational sq = 1 - rho * rho;
        if (sq <= 0) throw error("|rho| must be < 1");
        Rational root;
        if (rat_sqrt(sq, root)) return num(root);
        if (!st_->has(name)) st_->declare_sqrt_constant(name, sq);
        return sym(name);
    }

  private:
    std::shared_ptr<SymbolTable> st_;
};

// ---------------------------------------------------------------------------

/// Coordinate chart: time, spatial variables, dependent variable and its
/// jet atoms up to second order.
struct Coords {
    AtomId t = -1;
    std::vector<AtomId> x;
    AtomId u = -1;
    AtomId u_t = -1, u_tt = -1;
    std::vector<AtomId> u_i;
    std::vector<AtomId> u_ti;
    std::vector<std::vector<AtomId>> u_ij;

    int dim() const { return static_cast<int>(x.size()); }
    AtomId jet(int i, int j) const { return u_ij[std::min(i, j)][std::max(i, j)]; }

    std::set<AtomId> jet_atoms() const {
        std::set<AtomId> s{u, u_t, u_tt};
        for (auto a : u_i) s.insert(a);
        for (auto a : u_ti) s.insert(a);
        for (auto& row : u_ij)
            for (auto a : row)
                if (a >= 0) s.insert(a);
        return s;
    }
};

inline Coords make_coords(Workspace& ws, const std::string& time,
                          const std::vector<std::string>& spatial, const std::string& dep,
                          const std::vector<bool>& positive = {}) {
    Coords c;
    c.t = ws.var(time).poly().t[0].m.f[0].first;
    for (std::size_t i = 0; i < spatial.size(); ++i) {
        bool pos = i < positive.size() && positive[i];
        c.x.push_back(ws.var(spatial[i], pos).poly().t[0].m.f[0].first);
    }
    auto vid = [&](const std::string& n) { return ws.var(n).poly().t[0].m.f[0].first; };
    c.u = vid(dep);
    c.u_t = vid(dep + "_" + time);
    c.u_tt = vid(dep + "_" + time + time);
    int d = c.dim();
    c.u_i.resize(static_cast<std::size_t>(d));
    c.u_ti.resize(static_cast<std::size_t>(d));
    c.u_ij.assign(static_cast<std::size_t>(d), std::vector<AtomId>(static_cast<std::size_t>(d), -1));
    for (int i = 0; i < d; ++i) {
        c.u_i[i] = vid(dep + "_" + spatial[i]);
        c.u_ti[i] = vid(dep + "_" + time + spatial[i]);
        for (int j = i; j < d; ++j)
            c.u_ij[i][j] = vid(dep + "_" + spatial[i] + spatial[j]);
    }
    return c;
}

// ---------------------------------------------------------------------------

/// Linear (1+n) evolution equation in catalog form.
struct EvolutionPDE {
    std::string id;
    Workspace* ws = nullptr;
    Coords ctx;
    std::vector<std::vector<Expression>> A;
    std::vector<Expression> B;
    Expression source;
    Rational s{0};

    int dim() const { return ctx.dim(); }

    /// Theta as an expression in the jet atoms.
    Expression theta() const {
        auto& tab = *ws;
        Expression th = source * Expression::atom(tab.table(), ctx.u) +
                        tab.num(s) * Expression::atom(tab.table(), ctx.u_t);
        for (int i = 0; i < dim(); ++i) {
            th = th + B[i] * Expression::atom(tab.table(), ctx.u_i[i]);
            for (int j = i; j < dim(); ++j) {
                Rational mult = (i == j) ? 1 : 2;
                th = th + tab.num(mult) * A[i][j] *
                              Expression::atom(tab.table(), ctx.jet(i, j));
            }
        }
        return th;
    }

    /// Scale every coefficient by a nonzero rational.
    EvolutionPDE scaled(const Rational& c) const {
        EvolutionPDE p = *this;
        for (auto& row : p.A)
            for (auto& a : row) a = a * c;
        for (auto& b : p.B) b = b * c;
        p.source = p.source * c;
        p.s = p.s * c;
        return p;
    }
};

/// Equality of equations up to an overall nonzero rational factor.
inline bool pde_equivalent(const EvolutionPDE& p, const EvolutionPDE& q) {
    if (p.dim() != q.dim()) return false;
    if (p.s == 0 || q.s == 0) throw shape_error("pde_equivalent: zero time coefficient");
    Rational c = p.s / q.s;
    for (int i = 0; i < p.dim(); ++i) {
        if (!(p.B[i] - q.B[i] * c).is_zero()) return false;
        for (int j = 0; j < p.dim(); ++j)
            if (!(p.A[i][j] - q.A[i][j] * c).is_zero()) return false;
    }
    return (p.source - q.source * c).is_zero();
}

// ---------------------------------------------------------------------------
// point transformations

/// One invertible stage: old coordinates as functions of new ones plus a
/// dependent-variable rescale u_old = multiplier(new) * v_new.  Stages that
/// reparametrise time around opaque symbols are illegal; such maps are built
/// as chains (shift with identity time, then a pure rescale).
struct TransformStage {
    Coords from, to;
    std::vector<Expression> old_of_new; // size dim+1, index 0 = time
    std::vector<Expression> new_of_old; // inverse maps, same layout
    Expression multiplier;              // over `to` coordinates
};

struct PointTransformation {
    std::vector<TransformStage> stages;

    PointTransformation chained(const PointTransformation& then) const {
        PointTransformation r = *this;
        r.stages.insert(r.stages.end(), then.stages.begin(), then.stages.end());
        return r;
    }
};

namespace detail {

/// Total derivative in `to` coordinates acting on expressions in
/// (coords, v-jets): d/dN + chain over the dependent variable's jets.
inline Expression total_derivative(const Workspace& ws, const Coords& c, const Expression& e,
                                   int N /* 0 = time, 1.. = spatial */) {
    auto at = [&](AtomId a) { return Expression::atom(ws.table(), a); };
    AtomId coord = N == 0 ? c.t : c.x[static_cast<std::size_t>(N - 1)];
    Expression r = e.diff(coord);
    auto chain = [&](AtomId dep, AtomId d_dep) { r = r + e.diff(dep) * at(d_dep); };
    chain(c.u, N == 0 ? c.u_t : c.u_i[static_cast<std::size_t>(N - 1)]);
    chain(c.u_t, N == 0 ? c.u_tt : c.u_ti[static_cast<std::size_t>(N - 1)]);
    for (int i = 0; i < c.dim(); ++i)
        chain(c.u_i[static_cast<std::size_t>(i)],
              N == 0 ? c.u_ti[static_cast<std::size_t>(i)] : c.jet(i, N - 1));
    return r;
}

inline std::vector<std::vector<Expression>>
matrix_inverse(const Workspace& ws, const std::vector<std::vector<Expression>>& J) {
    std::size_t n = J.size();
    auto det2 = [&](const Expression& a, const Expression& b, const Expression& c,
                    const Expression& d) { return a * d - b * c; };
    Expression det;
    std::vector<std::vector<Expression>> adj(n, std::vector<Expression>(n));
    if (n == 2) {
        det = det2(J[0][0], J[0][1], J[1][0], J[1][1]);
        adj = {{J[1][1], -J[0][1]}, {-J[1][0], J[0][0]}};
    } else if (n == 3) {
        det = J[0][0] * det2(J[1][1], J[1][2], J[2][1], J[2][2]) -
              J[0][1] * det2(J[1][0], J[1][2], J[2][0], J[2][2]) +
              J[0][2] * det2(J[1][0], J[1][1], J[2][0], J[2][1]);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                std::array<std::size_t, 2> r{}, c{};
                std::size_t ri = 0, ci = 0;
                for (std::size_t k = 0; k < 3; ++k) {
                    if (k != j) r[ri++] = k;
                    if (k != i) c[ci++] = k;
                }
                Expression m = det2(J[r[0]][c[0]], J[r[0]][c[1]], J[r[1]][c[0]], J[r[1]][c[1]]);
                Rational sg = ((i + j) % 2 == 0) ? 1 : -1;
                adj[i][j] = m * sg;
            }
    } else {
        throw shape_error("matrix_inverse: dimension not supported");
    }
    auto inv = poly_invert(*ws.table(), det.poly());
    if (!inv) throw shape_error("transformation not invertible: Jacobian determinant '" +
                                to_string(det) + "' is not a unit");
    Expression idet(ws.table(), *inv);
    for (auto& row : adj)
        for (auto& e : row) e = e * idet;
    return adj;
}

} // namespace detail

/// Pull an equation back through one stage: substitute u = m * v(new(old))
/// and re-express Theta in the new chart.  The result is divided by the
/// multiplier and, when needed, by a unit factor so the v_t coefficient is a
/// constant.
inline EvolutionPDE apply_stage(const EvolutionPDE& pde, const TransformStage& sg) {
    Workspace& ws = *pde.ws;
    const auto tab = ws.table();
    int d = pde.dim();
    if (static_cast<int>(sg.old_of_new.size()) != d + 1)
        throw shape_error("transformation dimension mismatch");
    auto at = [&](AtomId a) { return Expression::atom(tab, a); };

    // Jacobian J[i][N] = d old_i / d new_N  (index 0 = time)
    std::vector<std::vector<Expression>> J(static_cast<std::size_t>(d + 1),
                                           std::vector<Expression>(static_cast<std::size_t>(d + 1)));
    for (int i = 0; i <= d; ++i)
        for (int N = 0; N <= d; ++N) {
            AtomId coord = N == 0 ? sg.to.t : sg.to.x[static_cast<std::size_t>(N - 1)];
            J[i][N] = sg.old_of_new[static_cast<std::size_t>(i)].diff(coord);
        }
    auto Jinv = detail::matrix_inverse(ws, J);

    // W = m * v and its first derivatives in the new chart
    Expression v = at(sg.to.u);
    std::vector<Expression> W_N(static_cast<std::size_t>(d + 1));
    for (int N = 0; N <= d; ++N)
        W_N[static_cast<std::size_t>(N)] =
            detail::total_derivative(ws, sg.to, sg.multiplier * v, N);

    // first derivatives of u composed with the map: G_i = sum_N inv[N][i] W_N
    std::vector<Expression> G(static_cast<std::size_t>(d + 1));
    for (int i = 0; i <= d; ++i) {
        Expression g = ws.num(0);
        for (int N = 0; N <= d; ++N)
            g = g + Jinv[static_cast<std::size_t>(N)][static_cast<std::size_t>(i)] *
                        W_N[static_cast<std::size_t>(N)];
        G[static_cast<std::size_t>(i)] = g;
    }
    // second derivatives: U2 = (dG/dnew) * Jinv
    std::vector<std::vector<Expression>> U2(static_cast<std::size_t>(d + 1),
                                            std::vector<Expression>(static_cast<std::size_t>(d + 1)));
    for (int i = 0; i <= d; ++i) {
        std::vector<Expression> DG(static_cast<std::size_t>(d + 1));
        for (int M = 0; M <= d; ++M)
            DG[static_cast<std::size_t>(M)] =
                detail::total_derivative(ws, sg.to, G[static_cast<std::size_t>(i)], M);
        for (int j = 0; j <= d; ++j) {
            Expression s = ws.num(0);
            for (int M = 0; M <= d; ++M)
                s = s + DG[static_cast<std::size_t>(M)] *
                            Jinv[static_cast<std::size_t>(M)][static_cast<std::size_t>(j)];
            U2[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = s;
        }
    }

    // substitute old coordinates in the coefficients
    std::map<AtomId, Poly> bind;
    bind[sg.from.t] = sg.old_of_new[0].poly();
    for (int i = 0; i < d; ++i)
        bind[sg.from.x[static_cast<std::size_t>(i)]] =
            sg.old_of_new[static_cast<std::size_t>(i + 1)].poly();
    auto comp = [&](const Expression& e) { return e.substitute(bind); };

    Expression theta = comp(pde.source) * sg.multiplier * v +
                       ws.num(pde.s) * G[0];
    for (int i = 0; i < d; ++i) {
        theta = theta + comp(pde.B[static_cast<std::size_t>(i)]) * G[static_cast<std::size_t>(i + 1)];
        for (int j = 0; j < d; ++j)
            theta = theta + comp(pde.A[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) *
                                U2[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(j + 1)];
    }

    // divide by the multiplier (a unit by construction)
    auto minv = poly_invert(*tab, sg.multiplier.poly());
    if (!minv) throw shape_error("multiplier is not invertible");
    theta = theta * Expression(tab, *minv);

    // collect by jets of v
    auto groups = group_by(theta, sg.to.jet_atoms());
    auto jet_coeff = [&](AtomId a) {
        Monomial m;
        m.f.push_back({a, 1});
        auto it = groups.find(m);
        return it == groups.end() ? ws.num(0) : it->second;
    };
    for (auto& [mono, coeff] : groups) {
        if (mono.empty())
            throw shape_error("pullback produced an inhomogeneous term");
        if (mono.f.size() != 1 || mono.f[0].second != 1)
            throw shape_error("pullback produced a nonlinear jet term");
    }
    Expression st_coeff = jet_coeff(sg.to.u_t);
    if (!jet_coeff(sg.to.u_tt).is_zero())
        throw shape_error("pullback leaves a second time derivative");
    for (int i = 0; i < d; ++i)
        if (!jet_coeff(sg.to.u_ti[static_cast<std::size_t>(i)]).is_zero())
            throw shape_error("pullback leaves a mixed time derivative");

    Expression unitize = ws.num(1);
    if (!st_coeff.is_constant()) {
        auto inv = poly_invert(*tab, st_coeff.poly());
        if (!inv)
            throw shape_error("pullback leaves non-constant u_t coefficient: " +
                              to_string(st_coeff));
        unitize = Expression(tab, *inv);
        st_coeff = ws.num(1);
    }

    EvolutionPDE out;
    out.id = pde.id + "*";
    out.ws = pde.ws;
    out.ctx = sg.to;
    out.s = st_coeff.constant_value();
    out.A.assign(static_cast<std::size_t>(d), std::vector<Expression>(static_cast<std::size_t>(d), ws.num(0)));
    out.B.assign(static_cast<std::size_t>(d), ws.num(0));
    for (int i = 0; i < d; ++i) {
        out.B[static_cast<std::size_t>(i)] =
            jet_coeff(sg.to.u_i[static_cast<std::size_t>(i)]) * unitize;
        for (int j = i; j < d; ++j) {
            Rational half = (i == j) ? 1 : Rational(1, 2);
            Expression a = jet_coeff(sg.to.jet(i, j)) * unitize * half;
            out.A[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = a;
            out.A[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = a;
        }
    }
    out.source = jet_coeff(sg.to.u) * unitize;
    return out;
}

inline EvolutionPDE apply_transformation(const EvolutionPDE& pde,
                                         const PointTransformation& tr) {
    EvolutionPDE cur = pde;
    for (auto& sg : tr.stages) cur = apply_stage(cur, sg);
    return cur;
}

/// Reverse a transformation (stage multipliers are re-expressed in the old
/// chart; only identity-time or opaque-free stages support this).
inline PointTransformation inverse(const PointTransformation& tr) {
    PointTransformation r;
    for (auto it = tr.stages.rbegin(); it != tr.stages.rend(); ++it) {
        TransformStage s;
        s.from = it->to;
        s.to = it->from;
        s.old_of_new = it->new_of_old;
        s.new_of_old = it->old_of_new;
        std::map<AtomId, Poly> bind;
        bind[it->to.t] = it->new_of_old[0].poly();
        for (std::size_t i = 0; i < it->to.x.size(); ++i)
            bind[it->to.x[i]] = it->new_of_old[i + 1].poly();
        Expression m_old = it->multiplier.substitute(bind);
        auto inv = poly_invert(*m_old.table(), m_old.poly());
        if (!inv) throw shape_error("multiplier not invertible for inverse transformation");
        s.multiplier = Expression(m_old.table(), *inv);
        r.stages.push_back(std::move(s));
    }
    return r;
}

// ---------------------------------------------------------------------------
// market parameters

/// Model parameters; each entry is either a rational constant or an opaque
/// time function, already living in the workspace table.
struct MarketParams {
    Expression sigma1, sigma2, rho, r, kappa, alpha, lambda, mu1, mu2, k;
    Expression w; // sqrt(1 - rho^2)
    bool rho_constant = true;
};

/// All-constant parameter set; declares sqrt(1-rho^2) as needed.
inline MarketParams constant_market(Workspace& ws,
                                    const std::map<std::string, Rational>& vals) {
    auto get = [&](const std::string& n, const Rational& dflt) {
        auto it = vals.find(n);
        return ws.num(it == vals.end() ? dflt : it->second);
    };
    MarketParams mp{get("sigma1", 1), get("sigma2", 1),   get("rho", 0),
                    get("r", 0),      get("kappa", 1),    get("alpha", 0),
                    get("lambda", 0), get("mu1", 0),      get("mu2", 0),
                    get("k", 0),      ws.num(1),          true};
    Rational rho = mp.rho.constant_value();
    if (rho * rho >= 1) throw error("|rho| must be < 1");
    if (mp.sigma1.constant_value() <= 0 || mp.sigma2.constant_value() <= 0)
        throw error("volatilities must be positive");
    mp.w = ws.sqrt_one_minus_sq("w", rho);
    return mp;
}

/// Time-dependent parameter set with sigma1 normalised to 1.  rho(t) and
/// sigma2(t) become opaque atoms; w = sqrt(1-rho^2) carries the rewrite
/// rho^2 -> 1 - w^2 and the derivative rule w' = -rho rho'/w.
inline MarketParams opaque_market(Workspace& ws) {
    MarketParams mp{ws.num(1),
                    ws.opaque("sigma2", true),
                    ws.opaque("rho"),
                    ws.opaque("r"),
                    ws.opaque("kappa"),
                    ws.opaque("alpha"),
                    ws.opaque("lambda"),
                    ws.opaque("mu1"),
                    ws.opaque("mu2"),
                    ws.opaque("k"),
                    ws.num(0),
                    false};
    auto& st = ws.st();
    if (!st.has("w")) {
        AtomId wid = st.declare_derived_function("w", /*positive=*/true);
        Expression w = Expression::atom(ws.table(), wid);
        AtomId rid = st.id_of("rho");
        st.set_square_rule(rid, (ws.num(1) - w * w).poly());
        Expression rhop = Expression::atom(ws.table(), st.opaque_order(rid, 1));
        st.set_derivative_rule(wid, (-mp.rho * rhop * w.pow(-1)).poly());
    }
    mp.w = ws.sym("w");
    return mp;
}

/// Special case sigma2 = sigma0 * sigma1, rho constant but symbolic: both
/// kept as symbols so the verification stays exact.
inline MarketParams symbolic_special_market(Workspace& ws) {
    MarketParams mp{ws.num(1),
                    ws.constant("sigma0", true),
                    ws.constant("rho"),
                    ws.opaque("r"),
                    ws.num(0),
                    ws.num(0),
                    ws.num(0),
                    ws.opaque("mu1"),
                    ws.opaque("mu2"),
                    ws.opaque("k"),
                    ws.num(0),
                    true};
    auto& st = ws.st();
    if (!st.has("w")) {
        AtomId wid = st.declare_constant("w", /*positive=*/true);
        Expression w = Expression::atom(ws.table(), wid);
        st.set_square_rule(st.id_of("rho"), (ws.num(1) - w * w).poly());
        (void)wid;
    }
    mp.w = ws.sym("w");
    return mp;
}

// ---------------------------------------------------------------------------
// model builders

inline EvolutionPDE make_pde(Workspace& ws, const std::string& id, const Coords& c,
                             std::vector<std::vector<Expression>> A, std::vector<Expression> B,
                             Expression source, Rational s) {
    Expression u = Expression::atom(ws.table(), c.u);
    for (auto& row : A)
        for (auto& a : row)
            if (a.contains(c.u)) throw error("principal part must not contain u");
    for (auto& b : B)
        if (b.contains(c.u)) throw error("drift must not contain u");
    if (source.contains(c.u)) throw error("source coefficient must not contain u");
    return EvolutionPDE{id, &ws, c, std::move(A), std::move(B), std::move(source), s};
}

/// Canonical catalog coordinates (t, x, y, u).
inline Coords canonical_coords(Workspace& ws) {
    return make_coords(ws, "t", {"x", "y"}, "u");
}

inline EvolutionPDE build_heat2d(Workspace& ws) {
    Coords c = canonical_coords(ws);
    auto z = ws.num(0), one = ws.num(1);
    return make_pde(ws, "heat2d", c, {{one, z}, {z, one}}, {z, z}, z, Rational(-1));
}

inline EvolutionPDE build_heat1d(Workspace& ws) {
    Coords c = make_coords(ws, "t", {"x"}, "u");
    return make_pde(ws, "heat1d", c, {{ws.num(1)}}, {ws.num(0)}, ws.num(0), Rational(-1));
}

/// u_xx + u_yy - phi1 u_x - phi2 u_y - 2k u + 2 u_t = 0
inline EvolutionPDE build_bs2d_canonical(Workspace& ws, const Expression& phi1,
                                         const Expression& phi2, const Expression& k) {
    Coords c = canonical_coords(ws);
    auto z = ws.num(0), one = ws.num(1);
    return make_pde(ws, "bs2d_canonical", c, {{one, z}, {z, one}}, {-phi1, -phi2},
                    ws.num(-2) * k, Rational(2));
}

/// F_xx + F_yy - (p1 x + p2 y + p3) F_x - (q1 x + q2 y + q3) F_y - 2 F_t = 0
inline EvolutionPDE build_twofactor_canonical(Workspace& ws,
                                              const std::array<Expression, 3>& p,
                                              const std::array<Expression, 3>& q) {
    Coords c = canonical_coords(ws);
    auto z = ws.num(0), one = ws.num(1);
    Expression x = Expression::atom(ws.table(), c.x[0]);
    Expression y = Expression::atom(ws.table(), c.x[1]);
    return make_pde(ws, "twofactor_canonical", c, {{one, z}, {z, one}},
                    {-(p[0] * x + p[1] * y + p[2]), -(q[0] * x + q[1] * y + q[2])}, z,
                    Rational(-2));
}

/// u_xx + u_yy - L1(t) u_x - L2(t) u_y - 2k(t) u + 2 u_t = 0
inline EvolutionPDE build_bs2d_special_nonauto(Workspace& ws) {
    Coords c = canonical_coords(ws);
    auto z = ws.num(0), one = ws.num(1);
    Expression L1 = ws.opaque("Lam1"), L2 = ws.opaque("Lam2"), k = ws.opaque("k");
    return make_pde(ws, "bs2d_special_nonauto", c, {{one, z}, {z, one}}, {-L1, -L2},
                    ws.num(-2) * k, Rational(2));
}

/// u_xx + u_yy - P1(t) u_x - (Q1 x + Q2 y + Q3) u_y - 2k(t) u + 2 u_t = 0
inline EvolutionPDE build_bs2d_nonauto(Workspace& ws) {
    Coords c = canonical_coords(ws);
    auto z = ws.num(0), one = ws.num(1);
    Expression x = Expression::atom(ws.table(), c.x[0]);
    Expression y = Expression::atom(ws.table(), c.x[1]);
    Expression P1 = ws.opaque("P1"), Q1 = ws.opaque("Q1"), Q2 = ws.opaque("Q2"),
               Q3 = ws.opaque("Q3"), k = ws.opaque("k");
    return make_pde(ws, "bs2d_nonauto", c, {{one, z}, {z, one}},
                    {-P1, -(Q1 * x + Q2 * y + Q3)}, ws.num(-2) * k, Rational(2));
}

/// F_xx + F_yy - (P1 x + P2 y + P3) F_x - (Q1 x + Q2 y + Q3) F_y - 2 F_t = 0
inline EvolutionPDE build_twofactor_nonauto(Workspace& ws) {
    Coords c = canonical_coords(ws);
    auto z = ws.num(0), one = ws.num(1);
    Expression x = Expression::atom(ws.table(), c.x[0]);
    Expression y = Expression::atom(ws.table(), c.x[1]);
    Expression P1 = ws.opaque("P1"), P2 = ws.opaque("P2"), P3 = ws.opaque("P3");
    Expression Q1 = ws.opaque("Q1"), Q2 = ws.opaque("Q2"), Q3 = ws.opaque("Q3");
    return make_pde(ws, "twofactor_nonauto", c, {{one, z}, {z, one}},
                    {-(P1 * x + P2 * y + P3), -(Q1 * x + Q2 * y + Q3)}, z, Rational(-2));
}

/// Two-factor commodity equation in financial coordinates (S, delta):
/// 1/2 s1^2 S^2 F_SS + rho s1 s2 S F_Sd + 1/2 s2^2 F_dd
///   + (r - delta) S F_S + (kappa (alpha - delta) - lambda) F_d - F_t = 0
inline EvolutionPDE build_twofactor_financial(Workspace& ws, const MarketParams& mp) {
    Coords c = make_coords(ws, "t", {"S", "delta"}, "F", {true, false});
    Expression S = Expression::atom(ws.table(), c.x[0]);
    Expression del = Expression::atom(ws.table(), c.x[1]);
    Expression half = ws.num(Rational(1, 2));
    std::vector<std::vector<Expression>> A = {
        {half * mp.sigma1 * mp.sigma1 * S * S, half * mp.rho * mp.sigma1 * mp.sigma2 * S},
        {half * mp.rho * mp.sigma1 * mp.sigma2 * S, half * mp.sigma2 * mp.sigma2}};
    std::vector<Expression> B = {(mp.r - del) * S,
                                 mp.kappa * (mp.alpha - del) - mp.lambda};
    return make_pde(ws, "twofactor", c, A, B, ws.num(0), Rational(-1));
}

/// Two-asset equation in financial coordinates (S1, S2):
/// 1/2 s1^2 S1^2 u_11 + rho s1 s2 S1 S2 u_12 + 1/2 s2^2 S2^2 u_22
///   - mu1 S1 u_1 - mu2 S2 u_2 - k u + u_t = 0
inline EvolutionPDE build_bs2d_financial(Workspace& ws, const MarketParams& mp) {
    Coords c = make_coords(ws, "t", {"S1", "S2"}, "u", {true, true});
    Expression S1 = Expression::atom(ws.table(), c.x[0]);
    Expression S2 = Expression::atom(ws.table(), c.x[1]);
    Expression half = ws.num(Rational(1, 2));
    std::vector<std::vector<Expression>> A = {
        {half * mp.sigma1 * mp.sigma1 * S1 * S1,
         half * mp.rho * mp.sigma1 * mp.sigma2 * S1 * S2},
        {half * mp.rho * mp.sigma1 * mp.sigma2 * S1 * S2,
         half * mp.sigma2 * mp.sigma2 * S2 * S2}};
    std::vector<Expression> B = {-mp.mu1 * S1, -mp.mu2 * S2};
    return make_pde(ws, "bs2d", c, A, B, -mp.k, Rational(1));
}

/// 1D Black-Scholes: 1/2 s^2 S^2 u_SS + r S u_S - r u + u_t = 0
inline EvolutionPDE build_bs1d(Workspace& ws, const Rational& sigma, const Rational& r) {
    Coords c = make_coords(ws, "t", {"S"}, "u", {true});
    Expression S = Expression::atom(ws.table(), c.x[0]);
    return make_pde(ws, "bs1d", c, {{ws.num(sigma * sigma / 2) * S * S}}, {ws.num(r) * S},
                    ws.num(-r), Rational(1));
}

/// One-factor commodity model:
/// 1/2 s^2 S^2 F_SS + kappa (mu - lambda - log S) S F_S - F_t = 0
inline EvolutionPDE build_onefactor(Workspace& ws, const Rational& sigma, const Rational& kappa,
                                    const Rational& mu, const Rational& lambda) {
    Coords c = make_coords(ws, "t", {"S"}, "F", {true});
    Expression S = Expression::atom(ws.table(), c.x[0]);
    Expression lS = log(S);
    return make_pde(ws, "onefactor", c, {{ws.num(sigma * sigma / 2) * S * S}},
                    {ws.num(kappa) * (ws.num(mu - lambda) - lS) * S}, ws.num(0),
                    Rational(-1));
}

// ---------------------------------------------------------------------------
// the financial -> canonical coordinate changes

/// S = exp(s1 x), delta = s2 (rho x + w y); the log-price chart of the
/// two-factor equation.  Time is unchanged, multiplier 1.
inline PointTransformation twofactor_log_chart(Workspace& ws, const MarketParams& mp,
                                               const EvolutionPDE& fin) {
    Coords to = canonical_coords(ws);
    Expression x = Expression::atom(ws.table(), to.x[0]);
    Expression y = Expression::atom(ws.table(), to.x[1]);
    Expression t = Expression::atom(ws.table(), to.t);
    Expression S = Expression::atom(ws.table(), fin.ctx.x[0]);
    Expression del = Expression::atom(ws.table(), fin.ctx.x[1]);
    TransformStage sg;
    sg.from = fin.ctx;
    sg.to = to;
    sg.old_of_new = {t, exp(mp.sigma1 * x), mp.sigma2 * (mp.rho * x + mp.w * y)};
    Expression lS = log(S);
    sg.new_of_old = {t, lS / mp.sigma1,
                     del / (mp.sigma2 * mp.w) - mp.rho * lS / (mp.sigma1 * mp.w)};
    sg.multiplier = ws.num(1);
    return {{sg}};
}

/// S1 = exp(s1 x), S2 = exp(s2 rho x + s2 w y); two-asset log-price chart.
inline PointTransformation bs2d_log_chart(Workspace& ws, const MarketParams& mp,
                                          const EvolutionPDE& fin) {
    Coords to = canonical_coords(ws);
    Expression x = Expression::atom(ws.table(), to.x[0]);
    Expression y = Expression::atom(ws.table(), to.x[1]);
    Expression t = Expression::atom(ws.table(), to.t);
    Expression S1 = Expression::atom(ws.table(), fin.ctx.x[0]);
    Expression S2 = Expression::atom(ws.table(), fin.ctx.x[1]);
    TransformStage sg;
    sg.from = fin.ctx;
    sg.to = to;
    sg.old_of_new = {t, exp(mp.sigma1 * x), exp(mp.sigma2 * mp.rho * x + mp.sigma2 * mp.w * y)};
    Expression l1 = log(S1), l2 = log(S2);
    sg.new_of_old = {t, l1 / mp.sigma1,
                     l2 / (mp.sigma2 * mp.w) - mp.rho * l1 / (mp.sigma1 * mp.w)};
    sg.multiplier = ws.num(1);
    return {{sg}};
}

// ---------------------------------------------------------------------------
// parameter maps (derived through the pullback, see module note)

/// Linear drift decomposition B = c0 + cx*x + cy*y of a canonical-chart pde.
struct LinearDrift {
    Expression cx, cy, c0;
};

inline LinearDrift split_linear_drift(const EvolutionPDE& pde, int i) {
    Workspace& ws = *pde.ws;
    AtomId x = pde.ctx.x[0], y = pde.ctx.x[1];
    const Expression& b = pde.B[static_cast<std::size_t>(i)];
    Expression cx = coefficient_of(b, x, 1);
    Expression cy = coefficient_of(b, y, 1);
    if (cx.contains(y) || cy.contains(x) || degree_in(b, x) > 1 || degree_in(b, y) > 1)
        throw shape_error("drift is not affine in the spatial variables");
    Expression c0 = b - cx * Expression::atom(ws.table(), x) -
                    cy * Expression::atom(ws.table(), y);
    return {cx, cy, c0};
}

struct TwoFactorCoefficients {
    Expression p1, p2, p3, q1, q2, q3;
};

/// Coefficients of the canonical two-factor equation, obtained by pulling
/// the financial equation through the log chart and normalising to
/// F_xx + F_yy - (p1 x + p2 y + p3)F_x - (q1 x + q2 y + q3)F_y - 2F_t = 0.
inline TwoFactorCoefficients two_factor_coeffs(Workspace& ws, const MarketParams& mp) {
    if (!mp.sigma1.is_constant())
        throw error("time-dependent sigma1 must be normalised away (sigma1 = 1) before "
                    "the canonical map");
    EvolutionPDE fin = build_twofactor_financial(ws, mp);
    EvolutionPDE can = apply_transformation(fin, twofactor_log_chart(ws, mp, fin));
    // scale so the principal part is the identity
    Expression a11 = can.A[0][0];
    if (!a11.is_constant()) throw shape_error("principal part did not become constant");
    can = can.scaled(Rational(1) / a11.constant_value());
    if (!(can.A[1][1] - ws.num(1)).is_zero() || !can.A[0][1].is_zero())
        throw shape_error("log chart did not produce the identity Laplacian");
    if (can.s != -2) throw shape_error("time term did not normalise to -2 F_t");
    if (!can.source.is_zero()) throw shape_error("unexpected source term");
    LinearDrift bx = split_linear_drift(can, 0);
    LinearDrift by = split_linear_drift(can, 1);
    return {-bx.cx, -bx.cy, -bx.c0, -by.cx, -by.cy, -by.c0};
}

struct Bs2dCoefficients {
    Expression P1, Q1, Q2, Q3, k;
};

/// Coefficients of the canonical two-asset equation,
/// u_xx + u_yy - P1 u_x - (Q1 x + Q2 y + Q3) u_y - 2k u + 2u_t = 0.
/// In the autonomous case P1 and Q3 are the drift constants phi1, phi2.
inline Bs2dCoefficients bs2d_coeffs(Workspace& ws, const MarketParams& mp) {
    EvolutionPDE fin = build_bs2d_financial(ws, mp);
    EvolutionPDE can = apply_transformation(fin, bs2d_log_chart(ws, mp, fin));
    Expression a11 = can.A[0][0];
    if (!a11.is_constant()) throw shape_error("principal part did not become constant");
    can = can.scaled(Rational(1) / a11.constant_value());
    if (!(can.A[1][1] - ws.num(1)).is_zero() || !can.A[0][1].is_zero())
        throw shape_error("log chart did not produce the identity Laplacian");
    if (can.s != 2) throw shape_error("time term did not normalise to +2 u_t");
    LinearDrift bx = split_linear_drift(can, 0);
    LinearDrift by = split_linear_drift(can, 1);
    if (!bx.cx.is_zero() || !bx.cy.is_zero())
        throw shape_error("x-drift unexpectedly space-dependent");
    return {-bx.c0, -by.cx, -by.cy, -by.c0, can.source * Rational(-1, 2)};
}

/// Autonomous drift constants (phi1, phi2) of the canonical two-asset
/// equation for constant parameters.
inline std::pair<Expression, Expression> bs2d_params(Workspace& ws, const MarketParams& mp) {
    if (mp.sigma2.is_constant() && mp.sigma2.constant_value() == 0)
        throw error("sigma2 must be nonzero");
    Bs2dCoefficients c = bs2d_coeffs(ws, mp);
    return {c.P1, c.Q3};
}

} // namespace symfin
