#pragma once

// Reductions: canonical-to-heat point transformations, the invariant
// closed-form solution of the special nonautonomous equation, and the
// one-step symmetry reduction to (1+1) form.
//
// The heat map is self-validating: the time-rescale constant is determined
// by requiring a zero pullback residual, not transcribed (the printed value
// is dimensionally inconsistent with the +2 u_t convention).

#include "symfin/symmetry.hpp"

#include <string>
#include <vector>

namespace symfin {

namespace detail {

/// Antiderivative of a t-only expression: closed form for constants and for
/// expressions with an obvious polynomial antiderivative; otherwise a fresh
/// antiderivative atom.
inline Expression antiderivative_t(Workspace& ws, const Expression& e,
                                   const std::string& hint) {
    if (e.is_zero()) return ws.num(0);
    AtomId t = ws.table()->time_atom;
    if (!e.diff(t).is_zero() || true) {
        // try symbolic polynomial-in-t integration: sum c * t^k * (t-free part)
        Poly out;
        bool ok = true;
        for (auto& term : e.poly().t) {
            // t-free factors only, apart from powers of t itself
            Monomial rest = term.m;
            int k = 0;
            for (std::size_t i = 0; i < rest.f.size(); ++i)
                if (rest.f[i].first == t) {
                    k = rest.f[i].second;
                    rest.f.erase(rest.f.begin() + static_cast<long>(i));
                    break;
                }
            Expression restx(ws.table(), normalize_term(ws.st(), Rational(1), rest));
            if (!restx.diff(t).is_zero()) {
                ok = false;
                break;
            }
            Monomial m = term.m;
            detail::mono_insert(m.f, t, 1);
            out = poly_add(out, normalize_term(ws.st(), term.c / (k + 1), m));
        }
        if (ok) return Expression(ws.table(), out);
    }
    std::string name = hint;
    int n = 0;
    while (ws.table()->has(name)) name = hint + std::to_string(++n);
    return ws.antideriv(name, e);
}

} // namespace detail

/// Transformation taking a canonical drift-and-source equation
/// A = I, B = B(t), source = C(t), s*u_t to the heat equation
/// v_xb,xb + v_yb,yb - v_T = 0.  Two stages: a moving shift with multiplier
/// at identity time, then a pure time rescale whose constant is forced by
/// the zero-residual requirement.
inline PointTransformation to_heat(const EvolutionPDE& pde) {
    Workspace& ws = *pde.ws;
    const Coords& c = pde.ctx;
    int d = c.dim();
    if (pde.s == 0) throw shape_error("to_heat: no time derivative");
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            Expression want = ws.num(i == j ? 1 : 0);
            if (!(pde.A[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] - want)
                     .is_zero())
                throw shape_error("to_heat: principal part must be the identity Laplacian");
        }
        for (int j = 0; j < d; ++j)
            if (!pde.B[static_cast<std::size_t>(i)]
                     .diff(c.x[static_cast<std::size_t>(j)])
                     .is_zero())
                throw shape_error("to_heat: drift must be space-independent");
    }
    for (int j = 0; j < d; ++j)
        if (!pde.source.diff(c.x[static_cast<std::size_t>(j)]).is_zero())
            throw shape_error("to_heat: source must be space-independent");

    auto at = [&](AtomId a) { return Expression::atom(ws.table(), a); };
    Expression t = at(c.t);

    // stage 1: x_i = xb_i + d_i(t) with s d_i' = B_i, u = exp(M) v, M' = -C/s
    std::vector<std::string> mid_names;
    for (int i = 0; i < d; ++i) mid_names.push_back(d == 1 ? "xb" : (i == 0 ? "xb" : "yb"));
    Coords mid = make_coords(ws, "t", mid_names, "vmid");
    TransformStage s1;
    s1.from = c;
    s1.to = mid;
    s1.old_of_new.push_back(t);
    s1.new_of_old.push_back(t);
    std::vector<Expression> shifts;
    for (int i = 0; i < d; ++i) {
        Expression di = detail::antiderivative_t(
            ws, pde.B[static_cast<std::size_t>(i)] * (Rational(1) / pde.s),
            "heatshift" + std::to_string(i));
        shifts.push_back(di);
        s1.old_of_new.push_back(at(mid.x[static_cast<std::size_t>(i)]) + di);
        s1.new_of_old.push_back(at(c.x[static_cast<std::size_t>(i)]) - di);
    }
    Expression M =
        detail::antiderivative_t(ws, pde.source * (Rational(-1) / pde.s), "heatlog");
    s1.multiplier = exp(M);

    // stage 2: T = c2 * t; the intermediate equation is Lap v + s v_t, so the
    // rescale constant must be -1/s for the -v_T convention
    Coords heat = make_coords(ws, "Theat", mid_names, "vheat");
    TransformStage s2;
    s2.from = mid;
    s2.to = heat;
    Rational c2 = Rational(-1) / pde.s;
    Expression T = at(heat.t);
    s2.old_of_new.push_back(T * (Rational(1) / c2));
    s2.new_of_old.push_back(t * c2);
    for (int i = 0; i < d; ++i) {
        s2.old_of_new.push_back(at(heat.x[static_cast<std::size_t>(i)]));
        s2.new_of_old.push_back(at(mid.x[static_cast<std::size_t>(i)]));
    }
    s2.multiplier = ws.num(1);
    return {{s1, s2}};
}

/// True when the pulled-back equation is exactly the heat equation.
inline bool is_heat_form(const EvolutionPDE& pde) {
    Workspace& ws = *pde.ws;
    if (pde.s == 0) return false;
    Rational r = Rational(-1) / pde.s;
    for (int i = 0; i < pde.dim(); ++i) {
        if (!(pde.B[static_cast<std::size_t>(i)] * r).is_zero()) return false;
        for (int j = 0; j < pde.dim(); ++j) {
            Expression want = ws.num(i == j ? 1 : 0);
            if (!(pde.A[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * r - want)
                     .is_zero())
                return false;
        }
    }
    return (pde.source * r).is_zero();
}

// ---------------------------------------------------------------------------
// invariant closed-form solution

struct ClosedFormSolution {
    Rational c1, c2;
    Expression w;        // w(t), an exponential of an antiderivative atom
    Expression solution; // u(t,x,y) = w * exp(c1 x + c2 y)
};

/// Residual of substituting a closed-form expression into the equation.
inline Expression substitute_solution(const EvolutionPDE& pde, const Expression& u) {
    const Coords& c = pde.ctx;
    Expression th = pde.source * u + Expression(u).diff(c.t) * pde.s;
    for (int i = 0; i < pde.dim(); ++i) {
        Expression ui = u.diff(c.x[static_cast<std::size_t>(i)]);
        th = th + pde.B[static_cast<std::size_t>(i)] * ui;
        for (int j = i; j < pde.dim(); ++j) {
            Rational mult = (i == j) ? 1 : 2;
            th = th + pde.A[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                          u.diff(c.x[static_cast<std::size_t>(i)])
                              .diff(c.x[static_cast<std::size_t>(j)]) *
                          mult;
        }
    }
    return th;
}

/// u = w(t) exp(c1 x + c2 y) with s w' = -(A-quadratic + B-linear + source) w;
/// for the special nonautonomous equation this reproduces
/// w = exp( (1/2) int (2k - (c1^2+c2^2) + L1 c1 + L2 c2) dt ).
inline ClosedFormSolution invariant_solution(const EvolutionPDE& pde, const Rational& c1,
                                             const Rational& c2) {
    Workspace& ws = *pde.ws;
    const Coords& c = pde.ctx;
    if (c.dim() != 2) throw shape_error("invariant_solution: (1+2) equations only");
    auto at = [&](AtomId a) { return Expression::atom(ws.table(), a); };
    Expression x = at(c.x[0]), y = at(c.x[1]);
    // exponent rate: s G' + (A11 c1^2 + 2 A12 c1 c2 + A22 c2^2 + B1 c1 + B2 c2 + C) = 0
    Expression quad = pde.A[0][0] * (c1 * c1) + pde.A[0][1] * (2 * c1 * c2) +
                      pde.A[1][1] * (c2 * c2) + pde.B[0] * c1 + pde.B[1] * c2 + pde.source;
    for (int i = 0; i < 2; ++i)
        if (quad.contains(c.x[static_cast<std::size_t>(i)]))
            throw shape_error("invariant_solution: drifts must be space-independent");
    Expression G =
        detail::antiderivative_t(ws, quad * (Rational(-1) / pde.s), "wlog");
    ClosedFormSolution sol;
    sol.c1 = c1;
    sol.c2 = c2;
    sol.w = exp(G);
    sol.solution = exp(G + ws.num(c1) * x + ws.num(c2) * y);
    if (!substitute_solution(pde, sol.solution).is_zero())
        throw error("internal: invariant solution failed to satisfy the equation");
    return sol;
}

// ---------------------------------------------------------------------------
// one-step symmetry reduction

/// Reduce along X = r . grad + c u d/du (xi_t = 0, r constant rational):
/// the ansatz u = exp(c theta) v(t, z) with theta = r.x/|r|^2, z = r-perp . x
/// produces the (1+1) equation in (t, z); for one spatial dimension the
/// result is the w-ODE (dim 0).
inline EvolutionPDE reduce_once(const EvolutionPDE& pde, const VectorField& X) {
    Workspace& ws = *pde.ws;
    const Coords& c = pde.ctx;
    if (!X.xi_t.is_zero()) throw shape_error("reduce_once: xi_t must vanish");
    std::vector<Rational> r;
    for (auto& xi : X.xi) {
        if (!xi.is_constant())
            throw shape_error("reduce_once: only translation-type generators supported");
        r.push_back(xi.constant_value());
    }
    Expression cu = coefficient_of(X.eta, c.u, 1);
    if (!cu.is_constant() || !(X.eta - cu * Expression::atom(ws.table(), c.u)).is_zero())
        throw shape_error("reduce_once: eta must be a rational multiple of u");
    Rational cc = cu.constant_value();
    if (!check_symmetry(pde, X).is_symmetry)
        throw error("reduce_once: the field is not a symmetry of the equation");

    auto at = [&](AtomId a) { return Expression::atom(ws.table(), a); };
    std::string tag = "r" + std::to_string(ws.table()->atom_count());

    if (c.dim() == 2) {
        Rational n2 = r[0] * r[0] + r[1] * r[1];
        if (n2 == 0) throw shape_error("reduce_once: zero spatial part");
        Coords nc = make_coords(ws, "t", {"th" + tag, "z" + tag}, "v" + tag);
        Expression th = at(nc.x[0]), z = at(nc.x[1]);
        TransformStage sg;
        sg.from = c;
        sg.to = nc;
        // theta = r.x / |r|^2, z = r1 y - r2 x (so reducing along d/dx keeps y)
        sg.old_of_new = {at(nc.t), ws.num(r[0]) * th - ws.num(r[1] / n2) * z,
                         ws.num(r[1]) * th + ws.num(r[0] / n2) * z};
        sg.new_of_old = {at(c.t),
                         (ws.num(r[0]) * at(c.x[0]) + ws.num(r[1]) * at(c.x[1])) *
                             (Rational(1) / n2),
                         ws.num(r[0]) * at(c.x[1]) - ws.num(r[1]) * at(c.x[0])};
        sg.multiplier = exp(ws.num(cc) * th);
        EvolutionPDE full = apply_stage(pde, sg);
        // invariance: nothing may depend on theta, and no theta-derivatives
        auto check_free = [&](const Expression& e) {
            if (e.contains(nc.x[0]))
                throw error("reduce_once: reduced coefficients depend on the invariant "
                            "coordinate; " + to_string(e));
        };
        if (!full.A[0][1].is_zero())
            throw error("reduce_once: cross second derivative survives");
        check_free(full.A[1][1]);
        check_free(full.B[1]);
        check_free(full.source);
        // reduced (1+1) equation in (t, z)
        Coords rc;
        rc.t = nc.t;
        rc.x = {nc.x[1]};
        rc.u = nc.u;
        rc.u_t = nc.u_t;
        rc.u_tt = nc.u_tt;
        rc.u_i = {nc.u_i[1]};
        rc.u_ti = {nc.u_ti[1]};
        rc.u_ij = {{nc.u_ij[1][1]}};
        EvolutionPDE red;
        red.id = pde.id + "_reduced";
        red.ws = pde.ws;
        red.ctx = rc;
        red.A = {{full.A[1][1]}};
        red.B = {full.B[1]};
        red.source = full.source;
        red.s = full.s;
        return red;
    }
    if (c.dim() == 1) {
        if (r[0] == 0) throw shape_error("reduce_once: zero spatial part");
        Coords nc = make_coords(ws, "t", {"th" + tag}, "v" + tag);
        Expression th = at(nc.x[0]);
        TransformStage sg;
        sg.from = c;
        sg.to = nc;
        sg.old_of_new = {at(nc.t), ws.num(r[0]) * th};
        sg.new_of_old = {at(c.t), at(c.x[0]) * (Rational(1) / r[0])};
        sg.multiplier = exp(ws.num(cc) * th);
        EvolutionPDE full = apply_stage(pde, sg);
        if (full.source.contains(nc.x[0]))
            throw error("reduce_once: reduced source depends on the invariant coordinate");
        EvolutionPDE red;
        red.id = pde.id + "_ode";
        red.ws = pde.ws;
        red.ctx = Coords{};
        red.ctx.t = nc.t;
        red.ctx.u = nc.u;
        red.ctx.u_t = nc.u_t;
        red.ctx.u_tt = nc.u_tt;
        red.A = {};
        red.B = {};
        red.source = full.source;
        red.s = full.s;
        return red;
    }
    throw shape_error("reduce_once: unsupported dimension");
}

/// Solve the 0-dimensional remnant s w' + source w = 0 as an exponential.
inline Expression solve_reduced_ode(const EvolutionPDE& ode) {
    if (ode.dim() != 0) throw shape_error("solve_reduced_ode: expected an ODE");
    Workspace& ws = *ode.ws;
    Expression G = detail::antiderivative_t(ws, ode.source * (Rational(-1) / ode.s),
                                            "odelog");
    return exp(G);
}

// ---------------------------------------------------------------------------

/// Maximal-symmetry test for (1+1) linear equations with constant principal
/// coefficient: builds the explicit point transformation from the heat
/// equation and checks a zero pullback residual.  Supported drifts are
/// beta(t) + b1 x with rational constant b1; the source must be t-only.
inline bool is_maximally_symmetric_1p1(const EvolutionPDE& pde) {
    Workspace& ws = *pde.ws;
    const Coords& c = pde.ctx;
    if (c.dim() != 1) throw shape_error("is_maximally_symmetric_1p1: (1+1) input expected");
    if (!pde.A[0][0].is_constant())
        throw shape_error("principal coefficient must be constant");
    Rational a = pde.A[0][0].constant_value();
    if (a == 0 || pde.s == 0) throw shape_error("degenerate equation");
    AtomId xv = c.x[0];
    if (degree_in(pde.B[0], xv) > 1)
        throw shape_error("drift of degree >= 2 in the spatial variable is unsupported");
    Expression b1x = coefficient_of(pde.B[0], xv, 1);
    if (!b1x.is_constant())
        throw shape_error("time-dependent linear drift coefficient is unsupported");
    Rational b1 = b1x.constant_value();
    Expression beta = pde.B[0] - b1x * Expression::atom(ws.table(), xv);
    if (beta.contains(xv) || pde.source.contains(xv) || degree_in(pde.source, xv) > 0)
        throw shape_error("source must not depend on the spatial variable");

    auto at = [&](AtomId aid) { return Expression::atom(ws.table(), aid); };
    Expression t = at(c.t), x = at(xv);
    std::string tag = "m" + std::to_string(ws.table()->atom_count());

    // forward chain u = exp(M) v(tau(t), chi(t) x + D(t)):
    //   M' = -source/s, chi = exp(-(b1/s) t), s D' = -beta chi + ... derived:
    //   beta chi + s D' = 0, and tau' = -(a/s) chi^2.
    Expression M = detail::antiderivative_t(ws, pde.source * (Rational(-1) / pde.s),
                                            "mslog" + tag);
    Expression chi = exp(ws.num(-b1 / pde.s) * t);
    Expression D = detail::antiderivative_t(ws, beta * chi * (Rational(-1) / pde.s),
                                            "msshift" + tag);
    Rational ac = -a / pde.s;
    Expression tau;
    if (b1 == 0) {
        tau = ws.num(ac) * t;
    } else {
        // integral of ac * exp(-2 b1 t / s) in closed form
        Rational rate = Rational(-2) * b1 / pde.s;
        tau = ws.num(ac / rate) * (exp(ws.num(rate) * t) - ws.num(1));
    }

    // reverse stage: pull the heat equation back into our chart
    Coords heat = make_coords(ws, "Th" + tag, {"xh" + tag}, "vh" + tag);
    EvolutionPDE heat_pde =
        make_pde(ws, "heat1p1", heat, {{ws.num(1)}}, {ws.num(0)}, ws.num(0), Rational(-1));
    TransformStage sg;
    sg.from = heat;
    sg.to = c;
    sg.old_of_new = {tau, chi * x + D};
    sg.new_of_old = {};
    auto minv = poly_invert(ws.st(), exp(M).poly());
    sg.multiplier = Expression(ws.table(), *minv);
    EvolutionPDE back = apply_stage(heat_pde, sg);
    return pde_equivalent(back, pde);
}

} // namespace symfin
