#pragma once

#include "stopflow/diagnostics.hpp"
#include "stopflow/hjb.hpp"

namespace stopflow {

/// Value surface of a mixed control-and-stopping problem. The embedded
/// surface carries the per-node maximizing action index (meaningful at
/// CONTINUE nodes; ties resolve to the lowest action index).
struct ControlledSurface {
    ValueSurface surface;
    bool policy_converged = true;
    std::size_t policy_iterations = 0;
    std::string note;
};

/// Backward sweep with a policy-iteration loop inside each time layer:
/// freeze per-node actions, solve the layer's linear complementarity
/// problem, re-maximize the discrete generator node by node, repeat until
/// the policy is stable. Time stepping is implicit Euler.
ControlledSurface solve_controlled(const StoppingProblem& problem, const Grid& grid,
                                   const SolverSettings& settings, const SolveOptions& options = {});

/// Per-action monotone-environment classification: the cIOV/cDOV integrand
/// must carry the required sign for every action at every CONTINUE node.
MonotoneVerdict controlled_monotonicity_check(const ControlledSurface& surface,
                                              const StoppingProblem& problem,
                                              const ClassifySettings& cs = {});

}  // namespace stopflow
