#include "symfin/expr.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace symfin;

namespace {

std::shared_ptr<SymbolTable> base_table() {
    auto st = std::make_shared<SymbolTable>();
    st->declare_time("t");
    st->declare_variable("x");
    st->declare_variable("y");
    st->declare_variable("u");
    st->declare_constant("phi1");
    st->declare_constant("phi2");
    st->declare_constant("rho");
    st->declare_opaque_positive("sigma2");
    st->declare_opaque("P1");
    st->declare_opaque("Q3");
    return st;
}

} // namespace

TEST_CASE("parse produces canonical sums and products") {
    auto st = base_table();
    auto e = parse(st, "x^2 + y");
    CHECK(to_string(e) == "x^2 + y");
    CHECK((parse(st, "x*x") - parse(st, "x^2")).is_zero());
    CHECK((parse(st, "(x+y)^2") - parse(st, "x^2 + 2*x*y + y^2")).is_zero());

    // whitespace insignificant, decimals exact
    CHECK((parse(st, " 0.5 * x ") - parse(st, "x/2")).is_zero());
}

TEST_CASE("parse reports syntax errors with positions") {
    auto st = base_table();
    CHECK_THROWS_AS(parse(st, "x +"), parse_error);
    CHECK_THROWS_AS(parse(st, "x + zz"), undeclared_error);
    try {
        parse(st, "x +");
    } catch (const parse_error& pe) {
        CHECK(pe.offset == 3);
    }
}

TEST_CASE("round trip parse(print(e)) == e") {
    auto st = base_table();
    const char* cases[] = {
        "x^2 + y",
        "2*rho*sigma2 - x*y^3",
        "P1'*x + Q3''*y",
        "exp(2*t)*x + exp(-t)",
        "3/4*x^2 - 7*y + 1/3",
        "sigma2^-2*x",
    };
    for (const char* c : cases) {
        auto e = parse(st, c);
        auto rt = parse(st, to_string(e));
        CHECK((e - rt).is_zero());
        CHECK(e == rt);
    }
}

TEST_CASE("differentiate: polynomials, chain rule on opaque symbols") {
    auto st = base_table();
    CHECK((parse(st, "x^2*y").diff("x") - parse(st, "2*x*y")).is_zero());
    CHECK((parse(st, "P1*x").diff("t") - parse(st, "P1'*x")).is_zero());
    CHECK(parse(st, "7/3").diff("x").is_zero());
    CHECK(parse(st, "P1*x").diff("x").diff("y").is_zero());

    // derivative of opaque f(t) w.r.t. x is zero
    CHECK(parse(st, "P1").diff("x").is_zero());

    // exp chain rule
    auto e = parse(st, "exp(x^2)");
    CHECK((e.diff("x") - parse(st, "2*x*exp(x^2)")).is_zero());
}

TEST_CASE("derivative order cap") {
    auto st = base_table();
    auto e = parse(st, "P1");
    e = e.diff("t").diff("t").diff("t"); // order 3 == default cap
    CHECK_THROWS_AS(e.diff("t"), derivative_cap_error);
}

TEST_CASE("substitute performs simultaneous substitution then canonicalizes") {
    auto st = base_table();
    // x -> xbar - phi1*t/2 in x + phi1*t/2 gives xbar
    auto st2 = std::make_shared<SymbolTable>();
    st2->declare_time("t");
    st2->declare_variable("x");
    st2->declare_constant("phi1");
    st2->declare_variable("xbar");
    auto e = parse(st2, "x + phi1*t/2");
    auto r = e.substitute({{"x", parse(st2, "xbar - phi1*t/2")}});
    CHECK((r - parse(st2, "xbar")).is_zero());

    // empty bindings -> identity
    CHECK(e.substitute(std::map<std::string, Expression>{}) == e);

    // u -> exp(2*k*t)*v in 2*k*u
    auto st3 = std::make_shared<SymbolTable>();
    st3->declare_time("t");
    st3->declare_variable("u");
    st3->declare_variable("v");
    st3->declare_constant("k");
    auto g = parse(st3, "2*k*u").substitute({{"u", parse(st3, "exp(2*k*t)*v")}});
    CHECK((g - parse(st3, "2*k*exp(2*k*t)*v")).is_zero());

    // swap x and y simultaneously
    auto swap = parse(st, "x^2*y").substitute(
        {{"x", Expression::symbol(st, "y")}, {"y", Expression::symbol(st, "x")}});
    CHECK((swap - parse(st, "y^2*x")).is_zero());
}

TEST_CASE("is_zero is sound and complete on the supported class") {
    auto st = base_table();
    CHECK((parse(st, "(x+y)^2 - x^2 - 2*x*y - y^2")).is_zero());
    CHECK((parse(st, "P1' - P1'")).is_zero());
    CHECK_FALSE(parse(st, "x - y").is_zero());
    // exponential merging
    CHECK((parse(st, "exp(x)*exp(y) - exp(x+y)")).is_zero());
    CHECK((parse(st, "exp(x+1) - exp(1)*exp(x)")).is_zero());
    CHECK((parse(st, "exp(x)^2 - exp(2*x)")).is_zero());
    CHECK_FALSE(parse(st, "exp(x) - exp(y)").is_zero());
}

TEST_CASE("sqrt constants reduce by their defining relation") {
    auto st = std::make_shared<SymbolTable>();
    st->declare_time("t");
    st->declare_variable("x");
    st->declare_sqrt_constant("w", Rational(3, 4)); // w = sqrt(3)/2
    auto w = Expression::symbol(st, "w");
    CHECK(((w * w) - Expression::constant(st, Rational(3, 4))).is_zero());
    CHECK((w.pow(3) - Rational(3, 4) * w).is_zero());
    // negative powers fold back: w^-1 = (4/3) w
    CHECK((w.pow(-1) - Rational(4, 3) * w).is_zero());
}

TEST_CASE("square-reduced symbols: rho^2 = 1 - w^2 with w kept Laurent") {
    auto st = std::make_shared<SymbolTable>();
    st->declare_time("t");
    auto wid = st->declare_derived_function("w", /*positive=*/true);
    auto rid = st->declare_opaque("rho");
    auto w = Expression::atom(st, wid);
    auto rho = Expression::atom(st, rid);
    st->set_square_rule(rid, (Expression::constant(st, 1) - w * w).poly());
    auto rhop = Expression::atom(st, st->opaque_order(rid, 1));
    st->set_derivative_rule(wid, (-rho * rhop * w.pow(-1)).poly());

    CHECK((rho * rho - (Expression::constant(st, 1) - w * w)).is_zero());
    // (1-rho^2) * w^-2 == 1
    auto one = (Expression::constant(st, 1) - rho * rho) * w.pow(-2);
    CHECK((one - Expression::constant(st, 1)).is_zero());
    // d/dt w = -rho*rho'/w
    CHECK((w.diff("t") + rho * rhop * w.pow(-1)).is_zero());
}

TEST_CASE("antiderivative atoms rewrite d/dt I to the integrand") {
    auto st = std::make_shared<SymbolTable>();
    st->declare_time("t");
    auto lam = st->declare_opaque("Lam1");
    auto I = st->declare_antideriv("I1", Poly{{Term{Rational(1), Monomial{{{lam, 1}}}}}});
    auto Ie = Expression::atom(st, I);
    CHECK((Ie.diff("t") - Expression::atom(st, lam)).is_zero());
    CHECK(Ie.diff("t").diff("t") ==
          Expression::atom(st, st->opaque_order(lam, 1)));
    // I1' also available through the parser
    CHECK((parse(st, "I1'") - Expression::atom(st, lam)).is_zero());
}

TEST_CASE("eval_numeric matches symbolic semantics") {
    auto st = base_table();
    CHECK(eval_numeric(parse(st, "x^2"), {{"x", 3.0}}) == Catch::Approx(9.0));
    CHECK(eval_numeric(parse(st, "2*rho*sigma2/sigma2"), {{"rho", 0.5}, {"sigma2", 1.0}}) ==
          Catch::Approx(1.0));
    // 1/x needs a declared-positive variable to be representable at all
    auto stp = std::make_shared<SymbolTable>();
    stp->declare_variable("S", /*positive=*/true);
    CHECK_THROWS_AS(eval_numeric(parse(stp, "1/S"), {{"S", 0.0}}), eval_error);
    CHECK_THROWS_AS(eval_numeric(parse(st, "sigma2^-1"), {{"sigma2", 0.0}}), eval_error);
    CHECK_THROWS_AS(eval_numeric(parse(st, "x + y"), {{"x", 1.0}}), eval_error);
    CHECK(eval_numeric(parse(st, "exp(2*t)"), {{"t", 0.5}}) == Catch::Approx(std::exp(1.0)));
}

TEST_CASE("division rules") {
    auto st = base_table();
    CHECK_THROWS(parse(st, "x/(x+y)"));
    CHECK_NOTHROW(parse(st, "x/sigma2"));
    CHECK_NOTHROW(parse(st, "x/3"));
    CHECK_THROWS_AS(parse(st, "x/0"), eval_error);
    CHECK((parse(st, "x/exp(t)") - parse(st, "x*exp(-t)")).is_zero());
}

namespace {

/// Small random expression generator over {t, x, y, P1 and derivatives}.
Expression random_expr(const std::shared_ptr<SymbolTable>& st, std::mt19937& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, depth > 0 ? 6 : 2);
    switch (pick(rng)) {
    case 0: {
        std::uniform_int_distribution<int> c(-4, 4);
        return Expression::constant(st, Rational(c(rng)));
    }
    case 1:
    case 2: {
        const char* names[] = {"t", "x", "y", "P1"};
        std::uniform_int_distribution<int> n(0, 3);
        return Expression::symbol(st, names[static_cast<std::size_t>(n(rng))]);
    }
    case 3:
        return random_expr(st, rng, depth - 1) + random_expr(st, rng, depth - 1);
    case 4:
        return random_expr(st, rng, depth - 1) * random_expr(st, rng, depth - 1);
    case 5:
        return random_expr(st, rng, depth - 1) - random_expr(st, rng, depth - 1);
    default: {
        std::uniform_int_distribution<int> e(2, 3);
        return random_expr(st, rng, depth - 1).pow(e(rng));
    }
    }
}

} // namespace

TEST_CASE("property: linearity and commuting mixed partials") {
    auto st = base_table();
    std::mt19937 rng(12345);
    for (int i = 0; i < 40; ++i) {
        auto e1 = random_expr(st, rng, 3);
        auto e2 = random_expr(st, rng, 3);
        // linearity of d/dx
        auto lhs = (Rational(3) * e1 + Rational(-2) * e2).diff("x");
        auto rhs = Rational(3) * e1.diff("x") + Rational(-2) * e2.diff("x");
        CHECK((lhs - rhs).is_zero());
        // mixed partials commute
        CHECK((e1.diff("x").diff("y") - e1.diff("y").diff("x")).is_zero());
        // round trip through printing
        CHECK(parse(st, to_string(e1)) == e1);
    }
}

TEST_CASE("property: numeric derivative consistency") {
    auto st = base_table();
    std::mt19937 rng(777);
    std::uniform_real_distribution<double> val(0.3, 1.7);
    int checked = 0;
    for (int i = 0; i < 40; ++i) {
        auto e = random_expr(st, rng, 3);
        NumEnv env{{"t", val(rng)}, {"x", val(rng)}, {"y", val(rng)}, {"P1", val(rng)},
                   {"P1'", val(rng)}};
        double h = 1e-5;
        NumEnv ep = env, em = env;
        ep["x"] += h;
        em["x"] -= h;
        double fd = (eval_numeric(e, ep) - eval_numeric(e, em)) / (2 * h);
        double sym = eval_numeric(e.diff("x"), env);
        if (std::abs(sym) > 1e8) continue; // steep cases dominated by fd truncation
        CHECK(std::abs(sym - fd) <= 1e-6 * (1 + std::abs(sym)) + 1e-4 * std::abs(fd) * h);
        ++checked;
    }
    CHECK(checked > 20);
}
