#include "stopflow/filter.hpp"

#include <algorithm>
#include <cmath>

namespace stopflow {

void FiniteSupportPrior::validate() const {
    if (support.size() < 2) throw InvariantError("prior needs at least two support points");
    if (support.size() != weights.size())
        throw InvariantError("prior support and weights differ in length");
    for (std::size_t i = 1; i < support.size(); ++i)
        if (support[i] <= support[i - 1])
            throw InvariantError("prior support must be strictly increasing");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) throw InvariantError("prior weights must be positive");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InvariantError("prior weights must sum to 1");
    if (!(zeta > 0.0)) throw InvariantError("noise scale zeta must be positive");
    bool has_up = false, has_down = false;
    for (double th : support) {
        if (th >= 0.0) has_up = true;
        if (th < 0.0) has_down = true;
    }
    if (!has_up || !has_down)
        throw InvariantError("prior support must carry both signs for a nontrivial decision");
}

ExactFilter::ExactFilter(FiniteSupportPrior prior) : prior_(std::move(prior)) {
    prior_.validate();
    log_p_.reserve(prior_.weights.size());
    for (double w : prior_.weights) log_p_.push_back(std::log(w));
}

void ExactFilter::posterior_weights(double s, double q, std::vector<double>& w) const {
    const std::size_t n = prior_.support.size();
    w.resize(n);
    double lmax = -1e300;
    for (std::size_t k = 0; k < n; ++k) {
        double th = prior_.support[k];
        w[k] = log_p_[k] + th * s - 0.5 * th * th * q;
        lmax = std::fmax(lmax, w[k]);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        w[k] = std::exp(w[k] - lmax);
        sum += w[k];
    }
    for (std::size_t k = 0; k < n; ++k) w[k] /= sum;
}

double ExactFilter::posterior_up(double s, double q) const {
    std::vector<double> w;
    posterior_weights(s, q, w);
    double up = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k)
        if (prior_.support[k] >= 0.0) up += w[k];
    return up;
}

double ExactFilter::cov_indicator(double s, double q) const {
    std::vector<double> w;
    posterior_weights(s, q, w);
    double mean = 0.0, up = 0.0, up_mean = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        double th = prior_.support[k];
        mean += w[k] * th;
        if (th >= 0.0) {
            up += w[k];
            up_mean += w[k] * th;
        }
    }
    return up_mean - mean * up;
}

double ExactFilter::solve_s(double q, double x) const {
    if (!(x > 0.0 && x < 1.0)) throw InvariantError("belief must lie strictly inside (0,1)");
    double lo = -1.0, hi = 1.0;
    int guard = 0;
    while (posterior_up(lo, q) > x) {
        lo *= 2.0;
        if (++guard > 200) throw InvariantError("belief inversion failed: lower bracket");
    }
    guard = 0;
    while (posterior_up(hi, q) < x) {
        hi *= 2.0;
        if (++guard > 200) throw InvariantError("belief inversion failed: upper bracket");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::fmax(1.0, std::abs(lo) + std::abs(hi));
         ++it) {
        double mid = 0.5 * (lo + hi);
        if (posterior_up(mid, q) < x)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double ExactFilter::belief_volatility(double t, double x) const {
    double q = t / (prior_.zeta * prior_.zeta);
    double s = solve_s(q, x);
    return cov_indicator(s, q) / prior_.zeta;
}

}  // namespace stopflow
