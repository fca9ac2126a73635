#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>

#include "stopflow/filter.hpp"
#include "stopflow/surface.hpp"

namespace stopflow {

struct SimParams {
    std::size_t n_paths = 10000;
    double dt = 1e-3;
    std::uint64_t seed = 1;
    double x0 = 0.5;
    double t0 = 0.0;
    /// Simulation horizon; paths still running stop here with the stopping
    /// payoff. Perpetual problems need an explicit cap.
    double horizon = 0.0;
    bool parallel = true;
};

struct PathResult {
    double tau = 0.0;
    double x_tau = 0.0;
    double payoff = 0.0;
    /// +1 upper boundary (a-branch), -1 lower boundary (b-branch), 0 horizon
    /// or deadline.
    int alternative = 0;
    bool deadline_hit = false;
    bool censored = false;  // left the numeric domain before stopping
};

struct PathEnsemble {
    std::uint64_t seed = 0;
    std::size_t n_paths = 0;
    double dt_sim = 0.0;
    std::vector<PathResult> paths;
    std::size_t censored_count = 0;

    double mean_payoff() const;
    double stderr_payoff() const;
    void write_csv(std::ostream& os) const;
};

/// Stopping rule driven by extracted boundaries (piecewise linear in t,
/// frozen beyond the last node). `shift` moves both boundaries toward the
/// middle of the band, deliberately degrading the rule.
struct BoundaryRule {
    const FreeBoundary* boundary = nullptr;
    double shift = 0.0;

    double lower_at(double t) const;
    double upper_at(double t) const;
    bool stops(double t, double x) const;
};

/// Euler-Maruyama simulation of the problem's diffusion under a boundary
/// stopping rule. Boundary crossings are located by linear interpolation
/// inside the step; flow payoffs accumulate with a trapezoidal discount
/// integral. Deterministic for fixed (seed, n_paths, dt): paths use
/// counter-based streams keyed by (seed, path index), so the parallel and
/// serial schedules produce identical ensembles.
PathEnsemble simulate_stopped(const StoppingProblem& problem, const BoundaryRule& rule,
                              const SimParams& params);

/// Serial reference implementation (same bits as the parallel kernel).
PathEnsemble simulate_stopped_serial(const StoppingProblem& problem, const BoundaryRule& rule,
                                     const SimParams& params);

/// One shared trajectory driven through two stopping rules; admissible only
/// when the problems share drift and volatility fields.
struct CoupledRanking {
    std::vector<double> tau_lo, tau_hi;
    std::size_t violations = 0;  // paths with tau_hi < tau_lo - dt
    bool pass = false;
};

CoupledRanking coupled_stopping_rank(const StoppingProblem& lo, const StoppingProblem& hi,
                                     const BoundaryRule& rule_lo, const BoundaryRule& rule_hi,
                                     const SimParams& params);

enum class McRuleKind { Boundary, Immediate, HorizonOnly };

struct ValueEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

ValueEstimate estimate_value_mc(const StoppingProblem& problem, McRuleKind kind,
                                const BoundaryRule& rule, const SimParams& params);

/// Learning-model simulation with ground truth: theta is drawn from the
/// prior, the signal is simulated, and beliefs are computed by the exact
/// filter, so decision accuracy is measured against the true parameter.
/// i and zeta fields depend on t only.
struct LearningModel {
    FiniteSupportPrior prior;
    CoefficientField i_field = CoefficientField::constant(1.0);
    CoefficientField zeta_field = CoefficientField::constant(1.0);
};

struct LearningPath {
    double tau = 0.0;
    double x_tau = 0.0;
    int decision = 0;  // +1 / -1, 0 when stopped by the horizon
    bool correct = false;
};

struct LearningEnsemble {
    std::vector<LearningPath> paths;
};

LearningEnsemble simulate_learning(const LearningModel& model, const BoundaryRule& rule,
                                   const SimParams& params);

/// Simulates the belief SDE dX = sigma(t,X) dW directly (no ground truth);
/// used to cross-check the exact-filter route.
std::vector<double> simulate_belief_sde_terminal(const CoefficientField& sigma, double t_end,
                                                 const SimParams& params);

/// Terminal beliefs from the signal + exact-filter route at t_end (no
/// stopping); pairs with simulate_belief_sde_terminal.
std::vector<double> simulate_filter_terminal(const LearningModel& model, double t_end,
                                             const SimParams& params);

struct AccuracyBin {
    double t_lo = 0.0, t_hi = 0.0;
    int alternative = 0;
    double accuracy = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    std::size_t count = 0;
    bool absent = false;  // fewer than 30 stops in the bin
};

struct AccuracyProfile {
    std::vector<AccuracyBin> bins;
    void write_csv(std::ostream& os) const;

    /// Cochran-Armitage style trend z-statistic on the pooled per-bin
    /// accuracies (negative = accuracy falls with time).
    double trend_z() const;
};

AccuracyProfile accuracy_profile(const LearningEnsemble& ensemble, std::size_t n_bins,
                                 double t_max, std::size_t min_count = 30);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_distance(std::vector<double> a, std::vector<double> b);

/// Poisson deadline overlay for simulating the *original* random-termination
/// problem (the PDE route uses the transformed problem instead).
struct DeadlineOverlay {
    CoefficientField alpha;
    CoefficientField gamma;
};

PathEnsemble simulate_stopped_with_deadline(const StoppingProblem& problem,
                                            const DeadlineOverlay& deadline,
                                            const BoundaryRule& rule, const SimParams& params);

}  // namespace stopflow
