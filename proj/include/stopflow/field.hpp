#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stopflow/expr.hpp"

namespace stopflow {

struct FieldError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Rectangular table of samples over (t, x) with bilinear interpolation.
/// Degenerate axes (a single node) are treated as constant in that direction.
/// Queries outside the sampled rectangle clamp to the nearest face.
struct Table {
    std::vector<double> t_nodes;  // strictly increasing, size >= 1
    std::vector<double> x_nodes;  // strictly increasing, size >= 1
    std::vector<double> values;   // row-major, values[it * nx + ix]

    double interpolate(double t, double x) const;
    double at(std::size_t it, std::size_t ix) const { return values[it * x_nodes.size() + ix]; }
};

/// A scalar coefficient of the problem: one of mu, sigma, f, r, a payoff
/// branch, or a model ingredient. Three kinds:
///   constant    -- fixed value
///   expression  -- arithmetic formula over (t, x)
///   tabulated   -- sampled grid, bilinear interpolation
///
/// Partial derivatives come from symbolic differentiation when the kind is
/// an expression without min/max; otherwise from central differences with
/// step h = max(1e-6, 1e-6 |coordinate|).
class CoefficientField {
public:
    enum class Kind { Constant, Expression, Tabulated };

    /// Defaults to the constant 0.
    CoefficientField() = default;

    static CoefficientField constant(double value);
    static CoefficientField expression(const std::string& source);
    static CoefficientField expression(Expr expr);
    static CoefficientField tabulated(Table table);

    Kind kind() const { return kind_; }

    double eval(double t, double x) const;

    double partial_t(double t, double x) const;
    double partial_x(double t, double x) const;
    double partial_xx(double t, double x) const;

    /// Structural time invariance: constants always; expressions when the
    /// tree never references t; tables when every t-row is identical.
    bool constant_in_t() const;
    bool constant_in_x() const;

    /// Field with the time argument frozen at `t`.
    CoefficientField frozen_at(double t) const;

    /// Source text for expressions, "%.17g" rendering for constants.
    /// Tabulated fields have no source (nullopt).
    std::optional<std::string> source() const;

    double constant_value() const;
    const Table& table() const;
    const Expr& expr() const;

private:
    Kind kind_ = Kind::Constant;
    double value_ = 0.0;
    std::shared_ptr<const Expr> expr_;
    // Lazily built symbolic partials (null when unavailable).
    std::shared_ptr<const Expr> d_t_, d_x_, d_xx_;
    bool symbolic_ok_ = false;
    std::shared_ptr<const Table> table_;
};

}  // namespace stopflow
