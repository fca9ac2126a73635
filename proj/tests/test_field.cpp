#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stopflow/field.hpp"

using stopflow::CoefficientField;
using stopflow::Table;

TEST_CASE("constant fields have zero partials") {
    auto f = CoefficientField::constant(3.5);
    CHECK(f.eval(1.0, 2.0) == 3.5);
    CHECK(f.partial_t(1, 2) == 0.0);
    CHECK(f.partial_x(1, 2) == 0.0);
    CHECK(f.partial_xx(1, 2) == 0.0);
    CHECK(f.constant_in_t());
    CHECK(f.constant_in_x());
}

TEST_CASE("expression partials are symbolic") {
    auto f = CoefficientField::expression("x^2");
    CHECK(f.partial_x(0, 3.0) == doctest::Approx(6.0).epsilon(1e-14));
    CHECK(f.partial_xx(0, 3.0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(f.partial_t(0, 3.0) == 0.0);
    CHECK(f.constant_in_t());
    CHECK(!f.constant_in_x());
}

TEST_CASE("kinked expressions fall back to finite differences") {
    auto f = CoefficientField::expression("max(x,1-x)");
    CHECK(f.partial_x(0, 0.8) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(f.partial_x(0, 0.2) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("tabulated fields return stored samples exactly at the nodes") {
    Table tb;
    tb.t_nodes = {0.0, 1.0, 2.0};
    tb.x_nodes = {0.0, 0.5, 1.0};
    tb.values = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0};
    auto f = CoefficientField::tabulated(tb);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(f.eval(tb.t_nodes[i], tb.x_nodes[j]) == tb.values[i * 3 + j]);
    // Bilinear interior value.
    CHECK(f.eval(0.5, 0.25) == doctest::Approx(0.25 * (1 + 2 + 4 + 5)).epsilon(1e-15));
    // Clamped outside the sampled rectangle.
    CHECK(f.eval(-1.0, -1.0) == 1.0);
    CHECK(f.eval(9.0, 9.0) == 9.0);
}

TEST_CASE("tabulated exponential decay: d/dt at the edge within 1e-5") {
    Table tb;
    const double dt = 1e-3;
    for (int i = 0; i <= 2000; ++i) tb.t_nodes.push_back(i * dt);
    tb.x_nodes = {0.0, 1.0};
    for (double t : tb.t_nodes) {
        tb.values.push_back(std::exp(-t));
        tb.values.push_back(std::exp(-t));
    }
    auto f = CoefficientField::tabulated(tb);
    CHECK(std::abs(f.partial_t(0.0, 0.5) - (-1.0)) <= 1e-5);
    CHECK(std::abs(f.partial_t(1.0, 0.5) - (-std::exp(-1.0))) <= 1e-5);
}

TEST_CASE("table validation") {
    Table bad;
    bad.t_nodes = {0.0, 0.0};
    bad.x_nodes = {0.0, 1.0};
    bad.values = {1, 2, 3, 4};
    CHECK_THROWS(CoefficientField::tabulated(bad));
    Table wrong_count;
    wrong_count.t_nodes = {0.0, 1.0};
    wrong_count.x_nodes = {0.0, 1.0};
    wrong_count.values = {1, 2, 3};
    CHECK_THROWS(CoefficientField::tabulated(wrong_count));
}

TEST_CASE("freezing a field in time") {
    auto f = CoefficientField::expression("(1+t)*x");
    auto frozen = f.frozen_at(2.0);
    CHECK(frozen.constant_in_t());
    CHECK(frozen.eval(77.0, 2.0) == 6.0);

    Table tb;
    tb.t_nodes = {0.0, 1.0};
    tb.x_nodes = {0.0, 1.0};
    tb.values = {0.0, 1.0, 10.0, 11.0};
    auto g = CoefficientField::tabulated(tb).frozen_at(1.0);
    CHECK(g.constant_in_t());
    CHECK(g.eval(5.0, 1.0) == 11.0);
}
