#pragma once

#include <vector>

#include "stopflow/problem.hpp"

namespace stopflow {

/// Prior over the unknown drift parameter with finite support, plus the
/// signal noise scale. Weights are normalized; the decision problem is
/// nontrivial only when the support carries both signs.
struct FiniteSupportPrior {
    std::vector<double> support;  // strictly increasing
    std::vector<double> weights;  // positive, sum to 1 within 1e-12
    double zeta = 1.0;

    void validate() const;
    bool binary() const { return support.size() == 2; }
};

/// Exact Bayesian filter for a finite-support prior observed through the
/// signal dZ = i(t) theta dt + zeta(t) dB. Posterior weights depend on the
/// path only through the sufficient statistics
///   s = integral of i/zeta^2 dZ,   q = integral of i^2/zeta^2 dt:
/// log w_k = log p_k + theta_k s - theta_k^2 q / 2  (then normalized).
class ExactFilter {
public:
    explicit ExactFilter(FiniteSupportPrior prior);

    const FiniteSupportPrior& prior() const { return prior_; }

    void posterior_weights(double s, double q, std::vector<double>& w) const;

    /// P(theta >= 0 | s, q) -- the belief-state coordinate.
    double posterior_up(double s, double q) const;

    /// Cov(theta, 1{theta >= 0}) under the posterior at (s, q).
    double cov_indicator(double s, double q) const;

    /// Inverts x = posterior_up(s, q) for s by bisection (the map is
    /// strictly increasing in s). Throws on inversion failure.
    double solve_s(double q, double x) const;

    /// Belief volatility sigma(t, x) = Cov(theta, 1{theta>=0}) / zeta for
    /// the unit-intensity model, where q = t / zeta^2.
    double belief_volatility(double t, double x) const;

private:
    FiniteSupportPrior prior_;
    std::vector<double> log_p_;
};

}  // namespace stopflow
