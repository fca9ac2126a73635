#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "stopflow/problem.hpp"

using namespace stopflow;

namespace {

StoppingProblem wald_like(const char* sigma_src, const char* flow_src, double r) {
    StoppingProblem p;
    p.x_lo = 0.0;
    p.x_hi = 1.0;
    p.horizon = Horizon::forever();
    p.mu = CoefficientField::constant(0.0);
    p.sigma = CoefficientField::expression(sigma_src);
    p.flow = CoefficientField::expression(flow_src);
    p.discount = CoefficientField::constant(r);
    p.payoff.branch_a = CoefficientField::expression("x");
    p.payoff.branch_b = CoefficientField::expression("1-x");
    return p;
}

}  // namespace

TEST_CASE("payoff crossing located by bisection") {
    StoppingPayoff pay;
    pay.branch_a = CoefficientField::expression("2*x");
    pay.branch_b = CoefficientField::expression("1-x");
    CHECK(pay.crossing(0.0, 0.0, 1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));

    pay.branch_a = CoefficientField::expression("x");
    CHECK(pay.crossing(0.0, 0.0, 1.0) == doctest::Approx(0.5).epsilon(1e-9));

    // A hint short-circuits the search.
    pay.crossing_hint = 0.25;
    CHECK(pay.crossing(0.0, 0.0, 1.0) == 0.25);
}

TEST_CASE("payoff branch selection and slopes") {
    StoppingPayoff pay;
    pay.branch_a = CoefficientField::expression("x");
    pay.branch_b = CoefficientField::expression("1-x");
    CHECK(pay.value(0.0, 0.8) == doctest::Approx(0.8));
    CHECK(pay.active_branch(0.0, 0.8) == +1);
    CHECK(pay.active_branch(0.0, 0.2) == -1);
    CHECK(pay.slope_x(0.0, 0.8) == doctest::Approx(1.0));
    CHECK(pay.slope_x(0.0, 0.2) == doctest::Approx(-1.0));
}

TEST_CASE("degenerate diffusion is rejected with a witness") {
    StoppingProblem p = wald_like("0", "-0.02", 0.1);
    try {
        p.validate();
        CHECK(false);
    } catch (const InvariantError& e) {
        CHECK(std::string(e.what()).find("sigma") != std::string::npos);
    }
}

TEST_CASE("negative discount is rejected") {
    StoppingProblem p = wald_like("x*(1-x)", "0", 0.1);
    p.discount = CoefficientField::constant(-0.01);
    CHECK_THROWS_AS(p.validate(), InvariantError);
}

TEST_CASE("perpetual admissibility follows the escape clause") {
    // r = 0 with strictly negative flow cost: admissible.
    StoppingProblem ok = wald_like("x*(1-x)", "-0.02", 0.0);
    CHECK_NOTHROW(ok.validate());
    // r = 0 with zero flow: ill-posed.
    StoppingProblem bad = wald_like("x*(1-x)", "0", 0.0);
    CHECK_THROWS_AS(bad.validate(), InvariantError);
}

TEST_CASE("branches crossing twice are rejected when stationary") {
    StoppingProblem p = wald_like("x*(1-x)", "0", 0.1);
    p.payoff.branch_a = CoefficientField::constant(0.2);
    p.payoff.branch_b = CoefficientField::expression("x*(1-x)");
    CHECK_THROWS_AS(p.validate(), InvariantError);
}

TEST_CASE("grids: construction, pinning, validation") {
    Grid g = Grid::uniform(3, 0.0, 1.0, 11, 0.0, 1.0);
    CHECK(g.nt() == 3);
    CHECK(g.nx() == 11);
    g.pin_x_node(0.47);
    CHECK(std::count(g.x_nodes.begin(), g.x_nodes.end(), 0.47) == 1);

    Grid lg = Grid::log_spaced(2, 0.0, 1.0, 11, 0.01, 100.0);
    CHECK(lg.x_nodes.front() == 0.01);
    CHECK(lg.x_nodes.back() == 100.0);
    for (std::size_t i = 1; i < lg.nx(); ++i) CHECK(lg.x_nodes[i] > lg.x_nodes[i - 1]);

    Grid bad;
    bad.t_nodes = {0.0, 1.0};
    bad.x_nodes = {0.0, 0.5};
    CHECK_THROWS_AS(bad.validate(), InvariantError);
}

TEST_CASE("problem grids keep the kink on a node and respect the margin") {
    StoppingProblem p = wald_like("x*(1-x)", "-0.02", 0.1);
    p.validate();
    Grid g = p.make_grid(5, 101, 0.0, 1.0);
    double m = p.default_margin();
    CHECK(g.x_nodes.front() == doctest::Approx(m));
    CHECK(g.x_nodes.back() == doctest::Approx(1.0 - m));
    bool has_xc = false;
    for (double x : g.x_nodes) has_xc = has_xc || x == 0.5;
    CHECK(has_xc);
}

TEST_CASE("time-invariance detection") {
    StoppingProblem p = wald_like("x*(1-x)", "-0.02", 0.1);
    CHECK(p.coefficients_time_invariant());
    p.flow = CoefficientField::expression("-0.01-0.02*t");
    CHECK(!p.coefficients_time_invariant());
}
