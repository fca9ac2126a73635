// Closed-form benchmarks used as independent oracles by the test suites.
// Everything here is derived from the stationary models directly (value
// matching / smooth pasting on the ODE), not from the solver under test.
#pragma once

#include <cmath>
#include <stdexcept>

namespace oracles {

// ---- perpetual American put (gBM, drift r x, payoff (K-x)^+) -----------

inline double put_threshold(double K, double r, double sigma) {
    return K / (1.0 + sigma * sigma / (2.0 * r));
}

inline double put_value(double x, double K, double r, double sigma) {
    double b = put_threshold(K, r, sigma);
    if (x <= b) return K - x;
    double gamma = 2.0 * r / (sigma * sigma);
    return (K - b) * std::pow(x / b, -gamma);
}

// ---- irreversible investment (gBM, payoff (x - I)^+) --------------------

// Positive root of (1/2) sigma^2 k (k - 1) + mu k - r = 0.
inline double investment_kappa(double mu, double sigma, double r) {
    double mh = mu - 0.5 * sigma * sigma;
    return (std::sqrt(mh * mh + 2.0 * sigma * sigma * r) - mh) / (sigma * sigma);
}

inline double investment_threshold(double mu, double sigma, double r, double I) {
    double k = investment_kappa(mu, sigma, r);
    if (k <= 1.0) throw std::runtime_error("investment problem ill-posed (kappa <= 1)");
    return I / (1.0 - 1.0 / k);
}

inline double investment_value(double x, double mu, double sigma, double r, double I) {
    double k = investment_kappa(mu, sigma, r);
    double b = investment_threshold(mu, sigma, r, I);
    if (x >= b) return x - I;
    return (b - I) * std::pow(x / b, k);
}

// ---- endogenous default (gBM, flow delta x - c, payoff G) ---------------

// Magnitude of the negative root of (1/2) sigma^2 m (m - 1) + mu m - r = 0.
inline double leland_kappa(double mu, double sigma, double r) {
    double mh = mu - 0.5 * sigma * sigma;
    return (mh + std::sqrt(mh * mh + 2.0 * r * sigma * sigma)) / (sigma * sigma);
}

// Default threshold for penalty G <= 0 (G = 0 gives the textbook formula
// kappa/(kappa+1) (1 - mu/r) c / delta); increasing in G.
inline double leland_threshold(double mu, double sigma, double r, double delta, double c,
                               double G = 0.0) {
    double k = leland_kappa(mu, sigma, r);
    return k / (k + 1.0) * (1.0 - mu / r) * (c + r * G) / delta;
}

// Shifted (V - G) value: particular part delta x/(r-mu) - (c+rG)/r plus the
// homogeneous decay A (x/b)^{-kappa}, with A from smooth pasting at b.
inline double leland_value_shifted(double x, double mu, double sigma, double r, double delta,
                                   double c, double G) {
    double k = leland_kappa(mu, sigma, r);
    double b = leland_threshold(mu, sigma, r, delta, c, G);
    if (x <= b) return 0.0;
    double slope = delta / (r - mu);
    double A = slope * b / k;
    return slope * x - (c + r * G) / r + A * std::pow(x / b, -k);
}

}  // namespace oracles
