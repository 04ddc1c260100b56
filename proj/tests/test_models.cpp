#include "symfin/models.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace symfin;

TEST_CASE("heat2d catalog entry") {
    Workspace ws;
    auto pde = build_heat2d(ws);
    CHECK(pde.s == -1);
    CHECK(pde.B[0].is_zero());
    CHECK(pde.B[1].is_zero());
    CHECK(pde.source.is_zero());
    CHECK((pde.A[0][0] - ws.num(1)).is_zero());
    CHECK(pde.A[0][1].is_zero());
}

TEST_CASE("two-factor canonical coefficients from the log-chart pullback") {
    SECTION("uncorrelated unit-volatility case") {
        // rho=0, s1=s2=1, r=0, kappa=1, alpha=lambda=0
        Workspace ws;
        auto mp = constant_market(ws, {{"rho", 0}, {"kappa", 1}});
        auto c = two_factor_coeffs(ws, mp);
        CHECK(c.p1.is_zero());
        CHECK((c.p2 - ws.num(2)).is_zero());
        // p3 carries the Ito term: (s1^2 - 2r)/s1 = 1, not -2r
        CHECK((c.p3 - ws.num(1)).is_zero());
        CHECK(c.q1.is_zero());
        CHECK((c.q2 - ws.num(2)).is_zero());
        CHECK(c.q3.is_zero());
    }
    SECTION("rho = 1/2 keeps sqrt(1-rho^2) as an exact atom") {
        Workspace ws;
        auto mp = constant_market(ws, {{"rho", Rational(1, 2)}, {"kappa", 1}});
        auto c = two_factor_coeffs(ws, mp);
        Expression w = ws.sym("w"); // w^2 = 3/4
        CHECK((c.p1 - ws.num(1)).is_zero());
        CHECK((c.p2 - ws.num(2) * w).is_zero());
        CHECK(((c.p2 * c.p2) - ws.num(3)).is_zero());
    }
    SECTION("q vanishes exactly for kappa*s1 = rho*s2 with balanced alpha, lambda") {
        Workspace ws;
        auto mp = constant_market(ws, {{"rho", Rational(1, 2)},
                                       {"kappa", Rational(1, 2)},
                                       {"r", Rational(1, 4)},
                                       {"lambda", Rational(1, 8)}});
        auto c = two_factor_coeffs(ws, mp);
        CHECK(c.q1.is_zero());
        CHECK(c.q2.is_zero());
        CHECK(c.q3.is_zero());
        CHECK((c.p1 - ws.num(1)).is_zero());
        CHECK((c.p3 - ws.num(Rational(1, 2))).is_zero());
    }
    SECTION("|rho| >= 1 is rejected") {
        Workspace ws;
        CHECK_THROWS(constant_market(ws, {{"rho", 1}}));
    }
}

TEST_CASE("two-factor nonautonomous coefficients vs an independent chain-rule route") {
    Workspace ws;
    auto mp = opaque_market(ws);
    auto c = two_factor_coeffs(ws, mp);

    Expression rho = ws.sym("rho"), s2 = ws.sym("sigma2"), w = ws.sym("w");
    Expression kap = ws.sym("kappa"), r = ws.sym("r"), alp = ws.sym("alpha"),
               lam = ws.sym("lambda");
    auto d = [&](const Expression& e) { return e.diff("t"); };

    // P's: same formulas as the autonomous map with time-dependent entries
    CHECK((c.p1 - ws.num(2) * rho * s2).is_zero());
    CHECK((c.p2 - ws.num(2) * s2 * w).is_zero());
    CHECK((c.p3 - (ws.num(1) - ws.num(2) * r)).is_zero());

    // Q's: autonomous part plus the dy/dt correction of the moving chart,
    // assembled here by hand as an independent oracle.
    Expression q1_auto = ws.num(2) * rho * (kap - rho * s2) / w;
    Expression q2_auto = ws.num(2) * (kap - rho * s2);
    Expression q3_auto =
        -(rho * s2 - ws.num(2) * rho * r * s2 + ws.num(2) * (kap * alp - lam)) / (s2 * w);
    Expression yt_x = -d(rho * s2) / (s2 * w);
    Expression yt_y = -d(s2 * w) / (s2 * w);
    CHECK((c.q1 - (q1_auto + ws.num(2) * yt_x)).is_zero());
    CHECK((c.q2 - (q2_auto + ws.num(2) * yt_y)).is_zero());
    CHECK((c.q3 - q3_auto).is_zero());

    SECTION("derivative atoms zeroed reduce to the autonomous formulas") {
        auto& st = ws.st();
        std::map<AtomId, Poly> zero;
        for (const char* n : {"rho", "sigma2", "kappa", "r", "alpha", "lambda"}) {
            AtomId base = st.id_of(n);
            zero[st.opaque_order(base, 1)] = poly_zero();
        }
        CHECK((c.q1.substitute(zero) - q1_auto).is_zero());
        CHECK((c.q2.substitute(zero) - q2_auto).is_zero());
    }
    SECTION("rho == 0 kills Q1 entirely") {
        // rho and w are tied by w^2 = 1 - rho^2: substitute both consistently
        auto& st = ws.st();
        std::map<AtomId, Poly> z;
        z[st.id_of("rho")] = poly_zero();
        z[st.opaque_order(st.id_of("rho"), 1)] = poly_zero();
        z[st.id_of("w")] = poly_const(Rational(1));
        CHECK(c.q1.substitute(z).is_zero());
    }
}

TEST_CASE("two-asset canonical coefficients") {
    SECTION("autonomous phi: unit volatilities") {
        Workspace ws;
        auto mp = constant_market(ws, {{"rho", 0}});
        auto [phi1, phi2] = bs2d_params(ws, mp);
        CHECK((phi1 - ws.num(1)).is_zero());
        CHECK((phi2 - ws.num(1)).is_zero());
    }
    SECTION("autonomous phi: mu1 = mu2 = r") {
        Workspace ws;
        auto mp = constant_market(
            ws, {{"rho", 0}, {"mu1", Rational(1, 20)}, {"mu2", Rational(1, 20)}});
        auto [phi1, phi2] = bs2d_params(ws, mp);
        CHECK((phi1 - ws.num(Rational(11, 10))).is_zero());
        CHECK((phi2 - ws.num(Rational(11, 10))).is_zero());
    }
    SECTION("correlated case carries the cross-drift term") {
        Workspace ws;
        auto mp = constant_market(ws, {{"rho", Rational(1, 2)},
                                       {"mu1", Rational(1, 8)},
                                       {"mu2", Rational(1, 8)}});
        auto [phi1, phi2] = bs2d_params(ws, mp);
        Expression w = ws.sym("w");
        CHECK((phi1 - ws.num(Rational(5, 4))).is_zero());
        // phi2 = ((s2^2 + 2 mu2)/s2 - rho*phi1)/w
        Expression expect = (ws.num(Rational(5, 4)) - ws.num(Rational(1, 2)) * phi1) / w;
        CHECK((phi2 - expect).is_zero());
    }
    SECTION("nonautonomous Q's against the chain-rule oracle") {
        Workspace ws;
        auto mp = opaque_market(ws);
        auto c = bs2d_coeffs(ws, mp);
        Expression rho = ws.sym("rho"), s2 = ws.sym("sigma2"), w = ws.sym("w");
        Expression mu1 = ws.sym("mu1"), mu2 = ws.sym("mu2");
        auto d = [&](const Expression& e) { return e.diff("t"); };
        CHECK((c.P1 - (ws.num(1) + ws.num(2) * mu1)).is_zero());
        CHECK((c.Q1 - ws.num(2) * d(rho * s2) / (s2 * w)).is_zero());
        CHECK((c.Q2 - ws.num(2) * d(s2 * w) / (s2 * w)).is_zero());
        Expression q3 = ((s2 * s2 + ws.num(2) * mu2) / s2 - rho * c.P1) / w;
        CHECK((c.Q3 - q3).is_zero());
        CHECK((c.k - ws.sym("k")).is_zero());
    }
}

TEST_CASE("apply_transformation basics") {
    SECTION("identity transformation returns the same equation") {
        Workspace ws;
        auto pde = build_bs2d_canonical(ws, ws.constant("phi1"), ws.constant("phi2"),
                                        ws.constant("k"));
        TransformStage sg;
        sg.from = pde.ctx;
        sg.to = pde.ctx;
        auto at = [&](AtomId a) { return Expression::atom(ws.table(), a); };
        sg.old_of_new = {at(pde.ctx.t), at(pde.ctx.x[0]), at(pde.ctx.x[1])};
        sg.new_of_old = sg.old_of_new;
        sg.multiplier = ws.num(1);
        auto out = apply_transformation(pde, {{sg}});
        CHECK(pde_equivalent(out, pde));
    }
    SECTION("log chart round trip differs by a constant factor only") {
        Workspace ws;
        auto mp = constant_market(ws, {{"rho", Rational(1, 2)}, {"kappa", 1}});
        auto fin = build_twofactor_financial(ws, mp);
        auto tr = twofactor_log_chart(ws, mp, fin);
        auto there = apply_transformation(fin, tr);
        auto back = apply_transformation(there, inverse(tr));
        CHECK(pde_equivalent(back, fin));
    }
    SECTION("chained stages equal sequential application") {
        Workspace ws;
        auto mp = constant_market(ws, {{"rho", 0}, {"kappa", 1}});
        auto fin = build_twofactor_financial(ws, mp);
        auto tr = twofactor_log_chart(ws, mp, fin);
        auto seq = apply_transformation(apply_transformation(fin, tr), inverse(tr));
        auto chained = apply_transformation(fin, tr.chained(inverse(tr)));
        CHECK(pde_equivalent(seq, chained));
    }
}

TEST_CASE("regression-only catalog entries build") {
    Workspace ws;
    auto bs = build_bs1d(ws, 1, Rational(1, 20));
    CHECK(bs.s == 1);
    auto onef = build_onefactor(ws, 1, 1, Rational(1, 10), Rational(1, 20));
    CHECK(onef.s == -1);
    // log S differentiates to 1/S
    Expression S = Expression::atom(ws.table(), onef.ctx.x[0]);
    CHECK((log(S).diff("S") - S.pow(-1)).is_zero());
}
