#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stopflow/field.hpp"

namespace stopflow {

struct InvariantError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Stopping payoff g(t,x) = max(branch_a, branch_b). The branches may depend
/// on time. `x_c(t)` is the indifference level where the branches cross; it
/// is located by bisection on branch_a - branch_b unless a hint is supplied.
struct StoppingPayoff {
    CoefficientField branch_a;
    CoefficientField branch_b;
    std::optional<double> crossing_hint;

    double value(double t, double x) const;
    /// +1 when branch_a is active at (t,x), -1 for branch_b.
    int active_branch(double t, double x) const;
    const CoefficientField& branch(int which) const { return which >= 0 ? branch_a : branch_b; }

    /// Slope / curvature of the active branch (callers exclude the kink).
    double slope_x(double t, double x) const;
    double curvature_x(double t, double x) const;
    double partial_t(double t, double x) const;

    bool time_dependent() const;

    /// Crossing level of branch_a - branch_b at time t inside (x_lo, x_hi),
    /// to tolerance 1e-10 * (x_hi - x_lo). Falls back to the domain edge
    /// nearer the dominant branch when the branches never cross.
    double crossing(double t, double x_lo, double x_hi) const;
};

enum class Spacing { Uniform, Log, Custom };

/// Solver mesh. Nodes live strictly inside the open state domain; a margin
/// keeps them off unattainable endpoints.
struct Grid {
    std::vector<double> t_nodes;  // strictly increasing, size >= 2
    std::vector<double> x_nodes;  // strictly increasing, size >= 3
    Spacing spacing = Spacing::Uniform;

    static Grid uniform(std::size_t nt, double t0, double t1, std::size_t nx, double x_lo,
                        double x_hi);
    static Grid log_spaced(std::size_t nt, double t0, double t1, std::size_t nx, double x_lo,
                           double x_hi);

    /// Replaces the interior node nearest to `x` with `x` exactly, keeping
    /// the node count and strict ordering. Used to pin payoff kinks.
    void pin_x_node(double x);

    std::size_t nt() const { return t_nodes.size(); }
    std::size_t nx() const { return x_nodes.size(); }
    void validate() const;
};

struct ActionSpec {
    std::string label;
    CoefficientField mu, sigma, flow, discount;
};

struct Horizon {
    bool perpetual = false;
    double T = 0.0;  // meaningful when !perpetual

    static Horizon finite(double T) { return Horizon{false, T}; }
    static Horizon forever() { return Horizon{true, 0.0}; }
};

/// A one-dimensional optimal stopping problem: state diffusion coefficients,
/// flow payoff, discount rate, and a two-branch stopping payoff on an open
/// interval. An optional finite action menu turns it into a mixed control
/// and stopping problem.
struct StoppingProblem {
    double x_lo = 0.0, x_hi = 1.0;  // open domain (x_lo, x_hi)
    Horizon horizon = Horizon::forever();
    CoefficientField mu, sigma, flow, discount;
    StoppingPayoff payoff;
    std::vector<ActionSpec> actions;  // empty = pure stopping

    /// Margin policy for grids: nodes live in [x_lo + m, x_hi - m].
    double default_margin() const { return 1e-4 * (x_hi - x_lo); }

    bool controlled() const { return !actions.empty(); }
    bool coefficients_time_invariant() const;

    /// Eager validation by sampling on a coarse probe grid; throws
    /// InvariantError naming the failing field and a witness point.
    void validate() const;

    /// Default solver grid for this problem (kink pinned).
    Grid make_grid(std::size_t nt, std::size_t nx, double t0, double t1,
                   Spacing spacing = Spacing::Uniform) const;
};

}  // namespace stopflow
