#pragma once

#include <optional>

#include "stopflow/filter.hpp"
#include "stopflow/hjb.hpp"
#include "stopflow/sde.hpp"

namespace stopflow {

/// Information acquisition between two alternatives: belief state on (0,1),
/// driftless, learning speed 2 i(t)/zeta(t) x(1-x), flow cost -c(t), payoff
/// branches b(1-x) and a x crossing at b/(a+b).
StoppingProblem make_wald(double a, double b, double r, const CoefficientField& i_field,
                          const CoefficientField& zeta_field, const CoefficientField& c_field);

struct NonbinaryModel {
    StoppingProblem problem;  // sigma tabulated on the build grid
    ExactFilter filter;       // exact evaluator + ground-truth simulator input
    LearningModel learning;
};

/// Learning with a finite-support prior: the belief volatility comes from
/// the exact filter (posterior weights in the sufficient statistics), is
/// strictly decreasing in t for non-binary priors, and is tabulated on the
/// given grid for the solver.
NonbinaryModel make_nonbinary(const FiniteSupportPrior& prior, double a, double b, double r,
                              double c, const Grid& sigma_grid);

struct DeadlineSpec {
    CoefficientField alpha;  // arrival rate, nonnegative
    CoefficientField gamma;  // termination payoff over x
    std::string news_direction = "unknown";  // good | bad | unknown
};

/// Poisson-deadline reformulation: discount r + alpha(t,x), flow
/// f + alpha(t,x) gamma(x). Requires a constant base discount.
StoppingProblem apply_deadline(const StoppingProblem& base, const DeadlineSpec& spec);

struct LelandModel {
    StoppingProblem problem;  // shifted: payoff 0, flow delta - c - r G
    double shift = 0.0;       // G; V = V_shifted + G
    /// Never-default continuation value, used as the far-field Dirichlet
    /// condition at the upper grid edge.
    CoefficientField far_field = CoefficientField::constant(0.0);
    SolveOptions solve_options() const;
};

/// Endogenous default: gBM cash-flow state, flow delta(x) - c(x), default
/// penalty G <= 0 handled by the exact constant-shift to V - G.
LelandModel make_leland(const CoefficientField& delta_field, const CoefficientField& c_field,
                        double r, const CoefficientField& mu_field,
                        const CoefficientField& sigma_field, double penalty_G);

/// Irreversible investment: gBM profitability, payoff (x - I(t))^+.
StoppingProblem make_investment(const CoefficientField& mu_field,
                                const CoefficientField& sigma_field,
                                const CoefficientField& r_field,
                                const CoefficientField& I_field);

/// Perpetual American put under the risk-neutral gBM: drift r(t) x, payoff
/// (K - x)^+.
StoppingProblem make_put(double K, const CoefficientField& r_field,
                         const CoefficientField& sigma_field);

/// A named, fully-specified solve: problem + grid + window plan + metadata.
struct CatalogEntry {
    std::string name;
    std::string description;
    StoppingProblem problem;

    enum class Mode { Stationary, Finite, Windowed };
    Mode mode = Mode::Finite;
    double t_solve = 0.0;   // solve horizon (Finite/Windowed)
    double t_report = 0.0;  // reporting window (Windowed)
    bool stationary_seed = false;
    std::size_t nt = 101, nx = 401;
    Spacing spacing = Spacing::Uniform;

    std::optional<double> x0;           // simulation start
    std::optional<double> shift;        // Leland constant shift
    SolveOptions solve_options;         // far-field overrides etc.
    std::optional<LearningModel> learning;
    std::string transform_note;

    Grid build_grid() const;
    /// Runs the entry's solve plan: stationary fixed point, plain finite
    /// solve, or windowed solve seeded with the frozen-coefficient
    /// stationary layer, sliced to the reporting window.
    ValueSurface run(const SolverSettings& settings) const;
};

std::vector<std::string> catalog_names();
CatalogEntry catalog_get(const std::string& name);

}  // namespace stopflow
