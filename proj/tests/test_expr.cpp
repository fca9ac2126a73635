#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stopflow/expr.hpp"
#include "stopflow/rng.hpp"

using stopflow::Expr;
using stopflow::ExprError;

TEST_CASE("arithmetic over t and x") {
    Expr e = Expr::parse("x*(1-x)*2");
    CHECK(e.eval(0.5, 0.5) == 0.5);
    CHECK(e.eval(3.0, 0.25) == doctest::Approx(0.375).epsilon(1e-15));

    // 2 e^{-1}, checked against the frozen high-precision value.
    Expr d = Expr::parse("exp(-t)*x");
    CHECK(d.eval(1.0, 2.0) == doctest::Approx(0.73575888234288467).epsilon(1e-15));

    CHECK(Expr::parse("2^3^2").eval(0, 0) == 512.0);         // right-associative
    CHECK(Expr::parse("-x^2").eval(0, 3.0) == -9.0);         // unary binds looser than ^
    CHECK(Expr::parse("min(3, max(1, t))").eval(7.0, 0) == 3.0);
    CHECK(Expr::parse("sqrt(x)").eval(0, 16.0) == 4.0);
    CHECK(Expr::parse("log(e)").eval(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("determinism: repeated evaluation is bit-identical") {
    Expr e = Expr::parse("exp(x*t)/(1+x^2)+sqrt(x+2)");
    double a = e.eval(0.7, 1.3);
    Expr e2 = Expr::parse("exp(x*t)/(1+x^2)+sqrt(x+2)");
    for (int i = 0; i < 10; ++i) {
        CHECK(e.eval(0.7, 1.3) == a);
        CHECK(e2.eval(0.7, 1.3) == a);
    }
}

TEST_CASE("syntax errors carry a position") {
    CHECK_THROWS_AS(Expr::parse("2*"), ExprError);
    CHECK_THROWS_AS(Expr::parse("foo(x)"), ExprError);
    CHECK_THROWS_AS(Expr::parse("(x+1"), ExprError);
    CHECK_THROWS_AS(Expr::parse("x+1)"), ExprError);
    CHECK_THROWS_AS(Expr::parse("min(x)"), ExprError);
    try {
        Expr::parse("x + unknown");
    } catch (const ExprError& e) {
        CHECK(e.position == 4);
    }
}

TEST_CASE("symbolic derivatives: polynomial identities") {
    Expr e = Expr::parse("x^2");
    auto dx = e.derivative('x');
    REQUIRE(dx);
    CHECK(dx->eval(0, 3.0) == doctest::Approx(6.0).epsilon(1e-15));
    auto dxx = dx->derivative('x');
    REQUIRE(dxx);
    CHECK(dxx->eval(0, 3.0) == doctest::Approx(2.0).epsilon(1e-15));

    CHECK(!Expr::parse("max(x,1-x)").derivative('x'));
    CHECK(Expr::parse("max(x,1-x)").has_kink());
}

TEST_CASE("symbolic vs central-difference partials on smooth expressions") {
    const char* exprs[] = {
        "x^2+t*x",       "exp(-t)*x",           "sqrt(x+1.5)*log(t+2)", "x^3/(1+t)",
        "(x+t)^2.5",     "exp(x*t)/(1+x^2)",    "2/(1+t)*x*(1-x)",      "0.3*(1-0.05*t)*x",
        "x^2*exp(-x-t)", "log(x+2)+sqrt(t+1)*x",
    };
    stopflow::rng::CounterStream rs(42, 0);
    for (const char* src : exprs) {
        Expr e = Expr::parse(src);
        auto dt = e.derivative('t');
        auto dx = e.derivative('x');
        REQUIRE(dt);
        REQUIRE(dx);
        for (int i = 0; i < 100; ++i) {
            double t = 2.0 * rs.uniform();
            double x = 0.1 + 0.8 * rs.uniform();
            double h = 1e-6;
            double fd_t = (e.eval(t + h, x) - e.eval(t - h, x)) / (2 * h);
            double fd_x = (e.eval(t, x + h) - e.eval(t, x - h)) / (2 * h);
            double st = dt->eval(t, x), sx = dx->eval(t, x);
            CHECK(std::abs(st - fd_t) <= 1e-4 * std::max(1.0, std::abs(st)));
            CHECK(std::abs(sx - fd_x) <= 1e-4 * std::max(1.0, std::abs(sx)));
        }
    }
}

TEST_CASE("freezing the time argument") {
    Expr e = Expr::parse("(1+t)*x");
    Expr f = e.with_t_fixed(3.0);
    CHECK(!f.depends_on('t'));
    CHECK(f.eval(99.0, 2.0) == 8.0);
    CHECK(Expr::parse(f.source()).eval(0.0, 2.0) == 8.0);
}

TEST_CASE("source round-trip") {
    for (const char* src : {"x*(1-x)*2", "exp(-t)*x", "max(x,1-x)", "-(x+1)/(t+2)^2"}) {
        Expr e = Expr::parse(src);
        Expr r = Expr::parse(e.source());
        CHECK(r.eval(0.3, 0.7) == e.eval(0.3, 0.7));
    }
}
