#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "stopflow/catalog.hpp"
#include "stopflow/config.hpp"

using namespace stopflow;

namespace {

const char* kPutDoc = R"([domain]
x_lo = 0.005
x_hi = 70.0

[horizon]
type = "perpetual"

[coefficients]
mu = "0.05*x"
sigma = "0.3*x"
flow = 0
discount = 0.05

[payoff]
branch_a = "1-x"
branch_b = 0
x_c = 1.0

[grid]
nt = 2
nx = 400
spacing = "log"

[solve]
mode = "stationary"
)";

bool fields_equal_on_probe(const CoefficientField& a, const CoefficientField& b, double x_lo,
                           double x_hi, bool exact) {
    for (int i = 0; i < 100; ++i) {
        double t = 5.0 * i / 99.0;
        for (int j = 0; j < 100; ++j) {
            double x = x_lo + (x_hi - x_lo) * (j + 0.5) / 100.0;
            double va = a.eval(t, x), vb = b.eval(t, x);
            if (exact ? (va != vb) : (std::abs(va - vb) > 1e-12 * std::max(1.0, std::abs(va))))
                return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("perpetual-put document maps to the expected fields") {
    ParsedConfig cfg = parse_problem(kPutDoc);
    const StoppingProblem& p = cfg.problem;
    CHECK(p.horizon.perpetual);
    CHECK(p.mu.eval(0.0, 2.0) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(p.sigma.eval(0.0, 2.0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(p.payoff.value(0.0, 0.4) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(p.payoff.value(0.0, 3.0) == 0.0);
    CHECK(cfg.grid.spacing == Spacing::Log);
    CHECK(cfg.solve.mode == "stationary");
}

TEST_CASE("degenerate diffusion in a document is an invariant violation") {
    std::string doc = kPutDoc;
    auto pos = doc.find("sigma = \"0.3*x\"");
    doc.replace(pos, std::string("sigma = \"0.3*x\"").size(), "sigma = \"0\"");
    CHECK_THROWS_AS(parse_problem(doc), InvariantError);
}

TEST_CASE("Wald document with unit intensity and noise") {
    StoppingProblem wald = make_wald(1.0, 1.0, 0.1, CoefficientField::constant(1.0),
                                     CoefficientField::constant(1.0),
                                     CoefficientField::constant(0.02));
    for (double x : {0.1, 0.3, 0.5, 0.9})
        CHECK(wald.sigma.eval(0.7, x) == doctest::Approx(2.0 * x * (1.0 - x)).epsilon(1e-15));
}

TEST_CASE("syntax errors are position-annotated") {
    try {
        parse_problem("[domain\nx_lo = 0");
        CHECK(false);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_problem("x_lo = 0"), ConfigError);        // key outside section
    CHECK_THROWS_AS(parse_problem("{ not json"), ConfigError);      // broken JSON
    CHECK_THROWS_AS(parse_problem("[domain]\nx_lo = 0\n"), ConfigError);  // missing keys
}

TEST_CASE("catalog problems round-trip through print/parse") {
    for (const std::string& name :
         {std::string("wald_stationary"), std::string("wald_rising_cost"),
          std::string("put_stationary"), std::string("investment_stationary"),
          std::string("leland_base"), std::string("controlled_wald_menu"),
          std::string("nonbinary_3pt")}) {
        CatalogEntry e = catalog_get(name);
        ParsedConfig cfg;
        cfg.problem = e.problem;
        cfg.grid.nt = e.nt;
        cfg.grid.nx = e.nx;
        cfg.grid.spacing = e.spacing;
        std::string doc = print_problem(cfg);
        ParsedConfig back = parse_problem(doc);

        const StoppingProblem& a = e.problem;
        const StoppingProblem& b = back.problem;
        CHECK(a.x_lo == b.x_lo);
        CHECK(a.x_hi == b.x_hi);
        double lo = a.x_lo + a.default_margin(), hi = a.x_hi - a.default_margin();
        bool tab = a.sigma.kind() == CoefficientField::Kind::Tabulated;
        CHECK(fields_equal_on_probe(a.mu, b.mu, lo, hi, true));
        CHECK(fields_equal_on_probe(a.sigma, b.sigma, lo, hi, !tab));
        CHECK(fields_equal_on_probe(a.flow, b.flow, lo, hi, true));
        CHECK(fields_equal_on_probe(a.discount, b.discount, lo, hi, true));
        CHECK(fields_equal_on_probe(a.payoff.branch_a, b.payoff.branch_a, lo, hi, true));
        CHECK(fields_equal_on_probe(a.payoff.branch_b, b.payoff.branch_b, lo, hi, true));
        CHECK(a.actions.size() == b.actions.size());
        for (std::size_t i = 0; i < a.actions.size(); ++i) {
            CHECK(a.actions[i].label == b.actions[i].label);
            CHECK(fields_equal_on_probe(a.actions[i].sigma, b.actions[i].sigma, lo, hi, true));
            CHECK(fields_equal_on_probe(a.actions[i].flow, b.actions[i].flow, lo, hi, true));
        }
    }
}

TEST_CASE("text rendering round-trips for expression-only problems") {
    CatalogEntry e = catalog_get("wald_rising_cost");
    ParsedConfig cfg;
    cfg.problem = e.problem;
    std::string doc = print_problem_text(cfg);
    ParsedConfig back = parse_problem(doc);
    double lo = 1e-4, hi = 1.0 - 1e-4;
    CHECK(fields_equal_on_probe(e.problem.sigma, back.problem.sigma, lo, hi, true));
    CHECK(fields_equal_on_probe(e.problem.flow, back.problem.flow, lo, hi, true));
}

TEST_CASE("table coefficients survive the JSON rendering") {
    CatalogEntry e = catalog_get("nonbinary_3pt");
    ParsedConfig cfg;
    cfg.problem = e.problem;
    std::string doc = print_problem(cfg);
    ParsedConfig back = parse_problem(doc);
    const Table& ta = e.problem.sigma.table();
    const Table& tb = back.problem.sigma.table();
    REQUIRE(ta.values.size() == tb.values.size());
    for (std::size_t i = 0; i < ta.values.size(); ++i) CHECK(ta.values[i] == tb.values[i]);
}
