#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "stopflow/problem.hpp"

namespace stopflow {

enum class Region : std::uint8_t { Continue = 0, Stop = 1 };

struct SolverSettings {
    double tol_pde_rel = 1e-9;       // scaled by the payoff magnitude
    double tol_obstacle_rel = 1e-9;  // scaled by the payoff magnitude
    double psor_omega = 1.5;
    std::size_t max_sweeps = 100000;
    double theta = 1.0;  // time-stepping weight in [0.5, 1]
    double stationary_tol = 1e-9;
    std::size_t stationary_max_layers = 20000;
    double stationary_dt = 0.5;  // pseudo time step for perpetual continuation

    void validate() const;
};

/// Grid-sampled value function with per-node region flags, the discrete PDE
/// residual left by the solve, and (for controlled problems) the maximizing
/// action index at each node.
struct ValueSurface {
    Grid grid;
    std::vector<double> values;    // row-major, values[it * nx + ix]
    std::vector<double> obstacle;  // g sampled on the grid
    std::vector<Region> region;
    std::vector<double> residual;
    std::vector<std::int32_t> action;  // empty unless controlled
    std::vector<std::string> action_labels;

    /// Payoff magnitude used to scale tolerances.
    double scale = 1.0;
    /// True when the last time layer was seeded with g (plain finite-horizon
    /// solve); false when it was seeded with a stationary continuation value.
    bool terminal_is_payoff = true;

    std::size_t idx(std::size_t it, std::size_t ix) const { return it * grid.nx() + ix; }
    double value(std::size_t it, std::size_t ix) const { return values[idx(it, ix)]; }

    void write_csv(std::ostream& os) const;
    void write_binary(std::ostream& os) const;
    static ValueSurface read_binary(std::istream& is);
    static ValueSurface read_csv(std::istream& is);
};

constexpr double kNoBoundary = std::numeric_limits<double>::quiet_NaN();

/// Free boundaries per time layer. `lower[i]` is the top of the lower
/// stopping region at t_nodes[i] (NaN when no node at or below the crossing
/// level is stopped), `upper[i]` the bottom of the upper stopping region.
struct FreeBoundary {
    std::vector<double> t_nodes;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<bool> lower_at_edge;  // boundary sits on the outermost node
    std::vector<bool> upper_at_edge;
    double max_jump = 0.0;  // largest |change| between consecutive layers
    bool convex_sections = true;  // false when a continuation hole was found

    static bool present(double b) { return !std::isnan(b); }
    void write_csv(std::ostream& os) const;
    static FreeBoundary read_csv(std::istream& is);
};

}  // namespace stopflow
