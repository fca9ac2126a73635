#include "stopflow/problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace stopflow {

namespace {

std::string witness(const char* field, double t, double x, double v) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s at (t=%.6g, x=%.6g) evaluates to %.6g", field, t, x, v);
    return buf;
}

}  // namespace

double StoppingPayoff::value(double t, double x) const {
    return std::fmax(branch_a.eval(t, x), branch_b.eval(t, x));
}

int StoppingPayoff::active_branch(double t, double x) const {
    return branch_a.eval(t, x) >= branch_b.eval(t, x) ? +1 : -1;
}

double StoppingPayoff::slope_x(double t, double x) const {
    return branch(active_branch(t, x)).partial_x(t, x);
}

double StoppingPayoff::curvature_x(double t, double x) const {
    return branch(active_branch(t, x)).partial_xx(t, x);
}

double StoppingPayoff::partial_t(double t, double x) const {
    return branch(active_branch(t, x)).partial_t(t, x);
}

bool StoppingPayoff::time_dependent() const {
    return !branch_a.constant_in_t() || !branch_b.constant_in_t();
}

double StoppingPayoff::crossing(double t, double x_lo, double x_hi) const {
    if (crossing_hint) return *crossing_hint;
    auto diff = [&](double x) { return branch_a.eval(t, x) - branch_b.eval(t, x); };
    const double m = 1e-9 * (x_hi - x_lo);
    double a = x_lo + m, b = x_hi - m;
    double fa = diff(a), fb = diff(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (fa * fb > 0.0) {
        // No crossing: one branch dominates everywhere. Scan a coarse mesh
        // in case the sign change hides between the probes.
        const int n = 257;
        double prev = a, fprev = fa;
        bool found = false;
        for (int i = 1; i <= n; ++i) {
            double xi = a + (b - a) * i / n;
            double fi = diff(xi);
            if (fprev * fi <= 0.0) {
                b = xi;
                fb = fi;
                a = prev;
                fa = fprev;
                found = true;
                break;
            }
            prev = xi;
            fprev = fi;
        }
        if (!found) return fa > 0.0 ? b : a;
    }
    const double tol = 1e-10 * (x_hi - x_lo);
    while (b - a > tol) {
        double mid = 0.5 * (a + b);
        double fm = diff(mid);
        if (fm == 0.0) return mid;
        if (fa * fm < 0.0) {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    return 0.5 * (a + b);
}

Grid Grid::uniform(std::size_t nt, double t0, double t1, std::size_t nx, double x_lo,
                   double x_hi) {
    Grid g;
    g.spacing = Spacing::Uniform;
    g.t_nodes.resize(nt);
    for (std::size_t i = 0; i < nt; ++i)
        g.t_nodes[i] = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(nt - 1);
    g.x_nodes.resize(nx);
    for (std::size_t j = 0; j < nx; ++j)
        g.x_nodes[j] = x_lo + (x_hi - x_lo) * static_cast<double>(j) / static_cast<double>(nx - 1);
    g.validate();
    return g;
}

Grid Grid::log_spaced(std::size_t nt, double t0, double t1, std::size_t nx, double x_lo,
                      double x_hi) {
    if (x_lo <= 0.0) throw InvariantError("log spacing requires a positive lower bound");
    Grid g;
    g.spacing = Spacing::Log;
    g.t_nodes.resize(nt);
    for (std::size_t i = 0; i < nt; ++i)
        g.t_nodes[i] = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(nt - 1);
    g.x_nodes.resize(nx);
    const double u0 = std::log(x_lo), u1 = std::log(x_hi);
    for (std::size_t j = 0; j < nx; ++j)
        g.x_nodes[j] =
            std::exp(u0 + (u1 - u0) * static_cast<double>(j) / static_cast<double>(nx - 1));
    g.x_nodes.front() = x_lo;
    g.x_nodes.back() = x_hi;
    g.validate();
    return g;
}

void Grid::pin_x_node(double x) {
    if (x <= x_nodes.front() || x >= x_nodes.back()) return;
    auto it = std::min_element(x_nodes.begin() + 1, x_nodes.end() - 1,
                               [x](double a, double b) { return std::abs(a - x) < std::abs(b - x); });
    *it = x;
    validate();
}

void Grid::validate() const {
    if (t_nodes.size() < 2) throw InvariantError("grid needs at least 2 t-nodes");
    if (x_nodes.size() < 3) throw InvariantError("grid needs at least 3 x-nodes");
    for (std::size_t i = 1; i < t_nodes.size(); ++i)
        if (t_nodes[i] <= t_nodes[i - 1])
            throw InvariantError("grid t-nodes must be strictly increasing");
    for (std::size_t j = 1; j < x_nodes.size(); ++j)
        if (x_nodes[j] <= x_nodes[j - 1])
            throw InvariantError("grid x-nodes must be strictly increasing");
}

bool StoppingProblem::coefficients_time_invariant() const {
    bool base = mu.constant_in_t() && sigma.constant_in_t() && flow.constant_in_t() &&
                discount.constant_in_t() && !payoff.time_dependent();
    for (const auto& a : actions)
        base = base && a.mu.constant_in_t() && a.sigma.constant_in_t() &&
               a.flow.constant_in_t() && a.discount.constant_in_t();
    return base;
}

void StoppingProblem::validate() const {
    if (!(x_lo < x_hi)) throw InvariantError("domain must satisfy x_lo < x_hi");
    if (!horizon.perpetual && !(horizon.T > 0.0)) throw InvariantError("finite horizon requires T > 0");

    const double m = default_margin();
    const double t_hi = horizon.perpetual ? 10.0 : horizon.T;
    const int n_probe = 17;

    double r_min = std::numeric_limits<double>::infinity();

    auto probe_fields = [&](const CoefficientField& muf, const CoefficientField& sigmaf,
                            const CoefficientField& flowf, const CoefficientField& rf,
                            const std::string& tag) {
        for (int i = 0; i < n_probe; ++i) {
            double t = t_hi * i / (n_probe - 1);
            for (int j = 0; j < n_probe; ++j) {
                double x = (x_lo + m) + (x_hi - x_lo - 2 * m) * j / (n_probe - 1);
                double mv = muf.eval(t, x);
                double sv = sigmaf.eval(t, x);
                double fv = flowf.eval(t, x);
                double rv = rf.eval(t, x);
                double ga = payoff.branch_a.eval(t, x);
                double gb = payoff.branch_b.eval(t, x);
                if (!std::isfinite(mv)) throw InvariantError(witness((tag + "mu").c_str(), t, x, mv));
                if (!std::isfinite(sv) || sv <= 0.0)
                    throw InvariantError((tag + "sigma must be strictly positive: ") +
                                         witness("sigma", t, x, sv));
                if (!std::isfinite(fv)) throw InvariantError(witness((tag + "flow").c_str(), t, x, fv));
                if (!std::isfinite(rv) || rv < 0.0)
                    throw InvariantError((tag + "discount must be nonnegative: ") +
                                         witness("discount", t, x, rv));
                if (!std::isfinite(ga)) throw InvariantError(witness("payoff branch_a", t, x, ga));
                if (!std::isfinite(gb)) throw InvariantError(witness("payoff branch_b", t, x, gb));
                r_min = std::min(r_min, rv);
            }
        }
    };

    probe_fields(mu, sigma, flow, discount, "");
    for (const auto& a : actions)
        probe_fields(a.mu, a.sigma, a.flow, a.discount, "action '" + a.label + "': ");

    // Perpetual admissibility: positive discounting somewhere on the probe,
    // or flow eventually bounded away from zero from below.
    if (horizon.perpetual && r_min <= 0.0) {
        double f_max_late = -std::numeric_limits<double>::infinity();
        for (double t_late : {50.0, 200.0, 1000.0})
            for (int j = 0; j < n_probe; ++j) {
                double x = (x_lo + m) + (x_hi - x_lo - 2 * m) * j / (n_probe - 1);
                f_max_late = std::max(f_max_late, flow.eval(t_late, x));
            }
        if (!(f_max_late < 0.0))
            throw InvariantError(
                "perpetual problem with zero discount requires the flow payoff to be eventually "
                "negative");
    }

    // Single sign change of branch_a - branch_b when both are stationary.
    if (!payoff.time_dependent()) {
        int changes = 0;
        double prev = payoff.branch_a.eval(0.0, x_lo + m) - payoff.branch_b.eval(0.0, x_lo + m);
        const int n_scan = 201;
        for (int j = 1; j < n_scan; ++j) {
            double x = (x_lo + m) + (x_hi - x_lo - 2 * m) * j / (n_scan - 1);
            double d = payoff.branch_a.eval(0.0, x) - payoff.branch_b.eval(0.0, x);
            if (prev != 0.0 && d != 0.0 && (prev < 0.0) != (d < 0.0)) ++changes;
            if (d != 0.0) prev = d;
        }
        if (changes > 1)
            throw InvariantError("payoff branches cross more than once in x");
    }
}

Grid StoppingProblem::make_grid(std::size_t nt, std::size_t nx, double t0, double t1,
                                Spacing spacing) const {
    const double m = default_margin();
    Grid g = spacing == Spacing::Log ? Grid::log_spaced(nt, t0, t1, nx, x_lo + m, x_hi - m)
                                     : Grid::uniform(nt, t0, t1, nx, x_lo + m, x_hi - m);
    g.pin_x_node(payoff.crossing(t0, x_lo, x_hi));
    return g;
}

}  // namespace stopflow
