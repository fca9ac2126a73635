#pragma once

#include <optional>
#include <string>

#include "stopflow/problem.hpp"

namespace stopflow {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GridSpec {
    std::size_t nt = 101, nx = 401;
    Spacing spacing = Spacing::Uniform;
};

struct SolveSpec {
    std::string mode = "auto";  // auto | stationary | finite | windowed
    double t_solve = 1.0;
    std::optional<double> t_report;
    bool stationary_seed = false;
};

struct ParsedConfig {
    StoppingProblem problem;
    GridSpec grid;
    SolveSpec solve;
};

/// Parses a problem document. Both renderings are accepted: canonical JSON
/// (first non-space byte '{') and the key/value text format with [section]
/// headers. All problem invariants are checked eagerly; table-valued
/// coefficients may reference CSV files relative to `base_dir`.
ParsedConfig parse_problem(const std::string& document, const std::string& base_dir = ".");

/// Canonical JSON rendering; parse_problem(print_problem(p)) round-trips to
/// field-wise equality (expressions keep their source text).
std::string print_problem(const ParsedConfig& config);

/// Human-oriented key/value rendering (expression and constant coefficients
/// only; tabulated fields require the JSON rendering).
std::string print_problem_text(const ParsedConfig& config);

}  // namespace stopflow
