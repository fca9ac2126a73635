#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stopflow/hjb.hpp"

namespace stopflow {

/// Shape profile of h(t,x) = f + (1/2) sigma^2 g_xx + mu g_x - r g on the
/// active payoff branch: nondecreasing below the crossing level and
/// nonincreasing above it (single crossing), strengthened to unique sign
/// changes with located crossing points.
struct SCProfile {
    bool verdict_sc = false;
    bool verdict_ssc = false;
    bool inconclusive = false;
    std::vector<double> t_nodes;
    std::vector<double> x_minus;  // NaN when SSC fails on that layer
    std::vector<double> x_plus;
    std::string note;
};

SCProfile check_single_crossing(const StoppingProblem& problem, const Grid& grid);

enum class MonotoneClass {
    IncreasingStrict,
    Increasing,
    Flat,
    Decreasing,
    DecreasingStrict,
    Mixed,
};

const char* to_string(MonotoneClass c);

struct WitnessNode {
    double t = 0.0, x = 0.0, value = 0.0;
};

struct MonotoneVerdict {
    MonotoneClass classification = MonotoneClass::Mixed;
    double vt_min = 0.0, vt_max = 0.0;
    double iov_min = 0.0, dov_max = 0.0;
    /// Extremes of V_t away from the boundary collar, where the strict sign
    /// test is performed (discrete V_t degenerates at the contact set).
    double vt_collar_min = 0.0, vt_collar_max = 0.0;
    std::size_t continue_nodes = 0;
    std::size_t skipped_kink_nodes = 0;
    std::vector<WitnessNode> witnesses;
    std::string note;
};

struct ClassifySettings {
    std::optional<double> t_min, t_max;  // classification window
    std::size_t collar_cells = 2;
};

MonotoneVerdict classify_environment(const StoppingProblem& problem, const ValueSurface& surface,
                                     const ClassifySettings& cs = {});

namespace detail {

struct CoeffSet {
    const CoefficientField* mu;
    const CoefficientField* sigma;
    const CoefficientField* flow;
    const CoefficientField* discount;
};

/// Classification over one or more coefficient sets: the IOV/DOV integrand
/// extremes are taken across every set (per-action conditions for the
/// control overlay).
MonotoneVerdict classify_core(const StoppingProblem& problem, const std::vector<CoeffSet>& sets,
                              const ValueSurface& surface, const ClassifySettings& cs);

}  // namespace detail

struct BoundaryCheck {
    bool pass = false;
    std::size_t weak_violations = 0;    // movement against the direction beyond one cell
    std::size_t strict_violations = 0;  // windows without the required strict movement
    double worst_reversal = 0.0;        // largest wrong-direction move, in x units
    double cumulative_lower = 0.0;      // signed movement over the horizon
    double cumulative_upper = 0.0;
    std::string note;
};

struct BoundaryCheckSettings {
    std::size_t window_steps = 20;  // strictness window in time steps
    double strict_cells = 2.0;      // required movement per window, in cells
};

/// Checks the boundary directions implied by the classification: a
/// decreasing verdict needs a narrowing band (lower nondecreasing, upper
/// nonincreasing) up to one grid cell, strict verdicts additionally need
/// sustained movement over sliding windows while the boundary is interior.
BoundaryCheck verify_boundary_monotonicity(const FreeBoundary& boundary,
                                           const MonotoneVerdict& verdict,
                                           const Grid& grid,
                                           const BoundaryCheckSettings& bs = {});

enum class CompareMode { FlowDiscount, Volatility, Drift, StoppingPayoff };

const char* to_string(CompareMode m);

struct ComparisonReport {
    CompareMode mode = CompareMode::FlowDiscount;
    bool precondition_ok = false;
    std::string precondition_note;
    /// Theorem-3 modes: the endogenous hypothesis verified on the solved
    /// surfaces ("convex"/"concave" or "nondecreasing"/"nonincreasing").
    std::string hypothesis;
    bool hypothesis_ok = true;
    bool reversed = false;  // concave / nonincreasing branch: conclusions flip
    double dominance_fraction = 0.0;
    double worst_violation = 0.0;
    std::size_t inclusion_violations = 0;
    double tol_compare = 0.0;
    bool pass = false;
    std::string json() const;
};

struct CompareSettings {
    double tol_compare_rel = 1e-6;
    SolveOptions lo_options, hi_options;
};

/// Solves both problems on the shared grid and tests pointwise value
/// dominance V_hi >= V_lo and region inclusion C_lo within C_hi (one cell of
/// slack), with the conclusions flipped for concave / nonincreasing
/// hypotheses. `lo` must be the dominated side of the mode's ordering.
ComparisonReport compare_problems(const StoppingProblem& lo, const StoppingProblem& hi,
                                  CompareMode mode, const Grid& grid,
                                  const SolverSettings& settings, const CompareSettings& cs = {});

/// Ito reduction for stopping-payoff comparative statics: V - g solves the
/// zero-payoff problem with flow f + mu g_x + (1/2) sigma^2 g_xx - r g.
/// Both payoffs must be kink-free expressions; the transformed pair is then
/// compared in flow mode.
StoppingProblem transform_to_zero_payoff(const StoppingProblem& problem,
                                         const CoefficientField& g_smooth);
ComparisonReport shifted_payoff_compare(const StoppingProblem& problem,
                                        const CoefficientField& g_alternate, const Grid& grid,
                                        const SolverSettings& settings,
                                        const CompareSettings& cs = {});

enum class BandPrediction { Widening, Narrowing, Flat, NoPrediction };

const char* to_string(BandPrediction p);

struct SignTableReport {
    // Sign classes over the probe: +1 nonnegative, -1 nonpositive, 0 zero,
    // +2/-2 with a strict node, 9 mixed.
    int sign_f = 0, sign_neg_r = 0, sign_mu_gx = 0, sign_sigma = 0;
    BandPrediction prediction = BandPrediction::NoPrediction;
    bool verified = false;  // solver run agreed with the prediction
    std::string note;
    std::string json() const;
};

/// Evaluates the four time-derivative sign conditions for problems whose
/// coefficients depend on t only (state factor allowed for gBM), predicts
/// the band direction, and confirms the prediction with a solve.
SignTableReport corollary2_sign_table(const StoppingProblem& problem, const Grid& grid,
                                      const SolverSettings& settings,
                                      const SolveOptions& options = {});

std::string verdict_json(const MonotoneVerdict& v);
std::string sc_profile_json(const SCProfile& p);

}  // namespace stopflow
