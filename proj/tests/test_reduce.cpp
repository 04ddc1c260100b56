#include "symfin/reduce.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace symfin;

TEST_CASE("to_heat on the autonomous canonical two-asset equation") {
    SECTION("drift-free case: pure time rescale") {
        Workspace ws;
        auto pde = build_bs2d_canonical(ws, ws.num(0), ws.num(0), ws.num(0));
        auto tr = to_heat(pde);
        auto out = apply_transformation(pde, tr);
        CHECK(is_heat_form(out));
    }
    SECTION("general constants, including the multiplier") {
        Workspace ws;
        auto pde = build_bs2d_canonical(ws, ws.constant("phi1"), ws.constant("phi2"),
                                        ws.constant("k"));
        auto tr = to_heat(pde);
        auto out = apply_transformation(pde, tr);
        CHECK(is_heat_form(out));
        // the resolved rescale is T = -t/2 for the +2 u_t convention
        CHECK((tr.stages[1].new_of_old[0] -
               Expression::symbol(ws.table(), "t") * Rational(-1, 2))
                  .is_zero());
        // shifts use half the drift: x = xb - phi1 t / 2
        Expression shift =
            tr.stages[0].old_of_new[1] - Expression::symbol(ws.table(), "xb");
        CHECK((shift + ws.sym("phi1") * ws.sym("t") * Rational(1, 2)).is_zero());
    }
    SECTION("opaque-coefficient special nonautonomous case") {
        Workspace ws;
        auto pde = build_bs2d_special_nonauto(ws);
        auto tr = to_heat(pde);
        auto out = apply_transformation(pde, tr);
        CHECK(is_heat_form(out));
    }
    SECTION("non-identity principal part is rejected") {
        Workspace ws;
        auto mp = constant_market(ws, {{"rho", 0}});
        auto fin = build_bs2d_financial(ws, mp);
        CHECK_THROWS_AS(to_heat(fin), shape_error);
    }
}

TEST_CASE("invariant closed-form solution") {
    Workspace ws;
    auto pde = build_bs2d_special_nonauto(ws);

    SECTION("c1 = c2 = 0 gives w = exp(int k dt)") {
        auto sol = invariant_solution(pde, 0, 0);
        Expression lw = sol.w.diff("t") / sol.w;
        CHECK((lw - ws.sym("k")).is_zero());
        CHECK(substitute_solution(pde, sol.solution).is_zero());
    }
    SECTION("k = 0, L = 0, c1 = 1: rate is -1/2") {
        Workspace w2;
        auto p = build_bs2d_special_nonauto(w2);
        auto& st = w2.st();
        std::map<AtomId, Poly> z;
        for (const char* n : {"Lam1", "Lam2", "k"}) {
            z[st.id_of(n)] = poly_zero();
            for (int o = 1; o <= 3; ++o) z[st.opaque_order(st.id_of(n), o)] = poly_zero();
        }
        auto sol = invariant_solution(p, 1, 0);
        Expression lw = sol.w.diff("t") / sol.w;
        CHECK((lw.substitute(z) + w2.num(Rational(1, 2))).is_zero());
        CHECK(substitute_solution(p, sol.solution).is_zero());
    }
    SECTION("general rational c's satisfy the equation exactly") {
        auto sol = invariant_solution(pde, Rational(1, 5), Rational(1, 10));
        CHECK(substitute_solution(pde, sol.solution).is_zero());
    }
}

TEST_CASE("reduce_once") {
    SECTION("heat2d by d/dx gives the (1+1) heat equation") {
        Workspace ws;
        auto heat = build_heat2d(ws);
        VectorField X{"Z1", ws.num(0), {ws.num(1), ws.num(0)}, ws.num(0)};
        auto red = reduce_once(heat, X);
        CHECK(red.dim() == 1);
        CHECK(is_heat_form(red));
    }
    SECTION("special nonautonomous equation by Z1 + c1 X_u") {
        Workspace ws;
        auto pde = build_bs2d_special_nonauto(ws);
        auto cat = bs2d_special_nonauto_generators(pde);
        auto Xu = cat.fields[0];
        auto Z1 = cat.fields[1];
        Rational c1(1, 3);
        auto X = vf_add(Z1, vf_scale(Xu, c1));
        auto red = reduce_once(pde, X);
        REQUIRE(red.dim() == 1);
        // drift stays proportional to -Lam2, source shifts by (c1^2 - Lam1 c1) terms
        Rational ratio = red.s / 2;
        CHECK((red.B[0] + ws.sym("Lam2") * ratio).is_zero());
        Expression expect_source =
            (ws.num(c1 * c1) - ws.sym("Lam1") * c1 - ws.num(2) * ws.sym("k")) * ratio;
        CHECK((red.source - expect_source).is_zero());

        SECTION("second reduction reproduces the closed-form rate") {
            VectorField Z3r{"Z3r", ws.num(0), {ws.num(1)},
                            Rational(1, 7) * Expression::atom(ws.table(), red.ctx.u)};
            auto ode = reduce_once(red, Z3r);
            CHECK(ode.dim() == 0);
            Expression wfun = solve_reduced_ode(ode);
            Expression rate = wfun.diff("t") / wfun;
            Rational c2(1, 7);
            Expression expect = ws.sym("k") - ws.num((c1 * c1 + c2 * c2) / 2) +
                                (ws.sym("Lam1") * c1 + ws.sym("Lam2") * c2) *
                                    Rational(1, 2);
            CHECK((rate - expect).is_zero());
            auto sol = invariant_solution(pde, c1, c2);
            Expression rate2 = sol.w.diff("t") / sol.w;
            CHECK((rate - rate2).is_zero());
        }
    }
    SECTION("rotation-type field is rejected") {
        Workspace ws;
        auto heat = build_heat2d(ws);
        auto at = [&](AtomId a) { return Expression::atom(ws.table(), a); };
        VectorField rot{"rot", ws.num(0), {at(heat.ctx.x[1]), -at(heat.ctx.x[0])},
                        ws.num(0)};
        CHECK_THROWS_AS(reduce_once(heat, rot), shape_error);
    }
    SECTION("non-symmetries are rejected") {
        Workspace ws;
        auto pde = build_bs2d_special_nonauto(ws);
        VectorField X{"bad", ws.num(0), {ws.num(1), ws.num(0)},
                      Expression::atom(ws.table(), pde.ctx.x[0]) *
                          Expression::atom(ws.table(), pde.ctx.u)};
        CHECK_THROWS(reduce_once(pde, X));
    }
}

TEST_CASE("is_maximally_symmetric_1p1") {
    SECTION("the (1+1) heat equation itself") {
        Workspace ws;
        auto heat = build_heat1d(ws);
        CHECK(is_maximally_symmetric_1p1(heat));
    }
    SECTION("reduction of the special nonautonomous equation") {
        Workspace ws;
        auto pde = build_bs2d_special_nonauto(ws);
        auto cat = bs2d_special_nonauto_generators(pde);
        auto X = vf_add(cat.fields[1], vf_scale(cat.fields[0], Rational(1, 4)));
        auto red = reduce_once(pde, X);
        CHECK(is_maximally_symmetric_1p1(red));
    }
    SECTION("constant linear drift (exponential rescale route)") {
        Workspace ws;
        Coords c = make_coords(ws, "t", {"x"}, "u");
        Expression x = Expression::atom(ws.table(), c.x[0]);
        auto pde = make_pde(ws, "ou", c, {{ws.num(1)}}, {ws.num(-1) * x}, ws.num(0),
                            Rational(2));
        CHECK(is_maximally_symmetric_1p1(pde));
    }
    SECTION("quadratic drift is an unsupported shape") {
        Workspace ws;
        Coords c = make_coords(ws, "t", {"x"}, "u");
        Expression x = Expression::atom(ws.table(), c.x[0]);
        auto pde = make_pde(ws, "quad", c, {{ws.num(1)}}, {x * x}, ws.num(0), Rational(2));
        CHECK_THROWS_AS(is_maximally_symmetric_1p1(pde), shape_error);
    }
}

TEST_CASE("pullback invariants for to_heat") {
    Workspace ws;
    auto pde = build_bs2d_canonical(ws, ws.num(1), ws.num(Rational(11, 10)),
                                    ws.num(Rational(1, 20)));
    auto tr = to_heat(pde);
    REQUIRE(tr.stages.size() == 2);
    PointTransformation first{{tr.stages[0]}}, second{{tr.stages[1]}};
    auto seq = apply_transformation(apply_transformation(pde, first), second);
    auto once = apply_transformation(pde, tr);
    CHECK(pde_equivalent(seq, once));
    auto back = apply_transformation(once, inverse(tr));
    CHECK(pde_equivalent(back, pde));
}
