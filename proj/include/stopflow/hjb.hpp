#pragma once

#include <optional>
#include <vector>

#include "stopflow/surface.hpp"

namespace stopflow {

struct SolveError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolveOptions {
    /// Seed for the last time layer. Default: the stopping payoff g(T, x).
    /// Supplying a stationary continuation value restricts a perpetual
    /// problem to a finite window without introducing a horizon effect.
    std::optional<std::vector<double>> terminal_values;

    /// Dirichlet values at the outermost x-nodes, overriding the default
    /// stopping-dominant closure v = g. Needed when the continuation region
    /// reaches a grid edge with a growing value (the far field of the
    /// default model), where forcing v = g would be wrong.
    std::optional<CoefficientField> lower_dirichlet;
    std::optional<CoefficientField> upper_dirichlet;
};

/// Backward-in-time theta-scheme for the obstacle form of the HJB equation.
/// Each layer's linear complementarity problem is solved by projected SOR;
/// the spatial operator uses central differences for the diffusion term and
/// upwind differences for the drift, so the discrete comparison principle
/// holds. The outermost x-nodes carry the stopping-dominant closure v = g.
ValueSurface solve_hjb(const StoppingProblem& problem, const Grid& grid,
                       const SolverSettings& settings, const SolveOptions& options = {});

/// Fixed-point continuation for perpetual problems with time-invariant
/// coefficients: implicit layers are repeated until the sup-norm change
/// drops below stationary_tol. Returns the converged single-layer surface.
ValueSurface solve_stationary(const StoppingProblem& problem, const Grid& grid,
                              const SolverSettings& settings, const SolveOptions& options = {});

/// Copy of the surface restricted to time layers in [t_lo, t_hi].
ValueSurface slice_surface(const ValueSurface& surface, double t_lo, double t_hi);

/// Splits each time layer into lower/upper stopping boundaries around the
/// payoff crossing level. Boundary locations are refined inside the
/// bracketing cell from the contact behaviour of V - g; a continuation hole
/// clears `convex_sections` and the outermost bracketing is returned.
FreeBoundary extract_boundaries(const ValueSurface& surface, double x_c);
FreeBoundary extract_boundaries(const ValueSurface& surface, const std::vector<double>& x_c);

struct SmoothFitGap {
    std::vector<double> t_nodes;
    std::vector<double> lower;  // NaN when the boundary is absent or on the grid edge
    std::vector<double> upper;
    double max_gap() const;
};

/// One-sided slope mismatch between V on the continuation side and g_x at
/// each boundary point, in payoff-slope units.
SmoothFitGap smooth_fit_gap(const ValueSurface& surface, const FreeBoundary& boundary,
                            const StoppingPayoff& payoff);

namespace detail {

struct LayerCoeffs {
    std::vector<double> sig2, mu, r, f, g;
};

/// Samples the problem coefficients along one time layer. The OpenMP variant
/// and the serial reference produce identical bits.
void eval_layer(const StoppingProblem& problem, double t, const std::vector<double>& x,
                LayerCoeffs& out);
void eval_layer_serial(const StoppingProblem& problem, double t, const std::vector<double>& x,
                       LayerCoeffs& out);

/// Row-sum-zero generator stencil: G v |_i = dn[i] v_{i-1} + ct[i] v_i + up[i] v_{i+1}.
struct Stencil {
    std::vector<double> dn, ct, up;
};
void build_generator(const std::vector<double>& x, const std::vector<double>& sig2,
                     const std::vector<double>& mu, Stencil& out);

struct PsorResult {
    bool converged = false;
    std::size_t sweeps = 0;
    std::size_t worst_node = 0;
    double worst_violation = 0.0;
};

/// Solves max{g - v, b - A v} = 0 for tridiagonal M-matrix A by projected
/// SOR. `v` enters as the warm start; edge values are held fixed.
PsorResult psor(const Stencil& A_off, const std::vector<double>& A_diag,
                const std::vector<double>& b, const std::vector<double>& g,
                std::vector<double>& v, const SolverSettings& settings, double tol_pde,
                double tol_obstacle);

}  // namespace detail

}  // namespace stopflow
