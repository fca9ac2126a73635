#include "stopflow/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

namespace stopflow {

namespace {

// Index of the cell [nodes[i], nodes[i+1]] containing v, clamped to the grid.
std::size_t cell_index(const std::vector<double>& nodes, double v) {
    if (nodes.size() < 2) return 0;
    auto it = std::upper_bound(nodes.begin(), nodes.end(), v);
    std::size_t i = static_cast<std::size_t>(it - nodes.begin());
    if (i == 0) return 0;
    if (i >= nodes.size()) return nodes.size() - 2;
    return i - 1;
}

double fd_step(double coord) { return std::max(1e-6, 1e-6 * std::abs(coord)); }

std::size_t nearest_node(const std::vector<double>& nodes, double v) {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
    if (it == nodes.end()) return nodes.size() - 1;
    if (it == nodes.begin()) return 0;
    std::size_t i = static_cast<std::size_t>(it - nodes.begin());
    return (v - nodes[i - 1] <= nodes[i] - v) ? i - 1 : i;
}

// First derivative along one table axis, sampled at the stored nodes:
// central in the interior, second-order one-sided at the edges.
double table_axis_deriv(const std::vector<double>& nodes, std::size_t k,
                        const std::function<double(std::size_t)>& value) {
    const std::size_t n = nodes.size();
    if (n < 2) return 0.0;
    if (k == 0) {
        if (n == 2) return (value(1) - value(0)) / (nodes[1] - nodes[0]);
        double h1 = nodes[1] - nodes[0], h2 = nodes[2] - nodes[1];
        // Three-point forward formula on a possibly nonuniform spacing.
        double a = -(2.0 * h1 + h2) / (h1 * (h1 + h2));
        double b = (h1 + h2) / (h1 * h2);
        double c = -h1 / (h2 * (h1 + h2));
        return a * value(0) + b * value(1) + c * value(2);
    }
    if (k == n - 1) {
        if (n == 2) return (value(1) - value(0)) / (nodes[1] - nodes[0]);
        double h1 = nodes[n - 2] - nodes[n - 3], h2 = nodes[n - 1] - nodes[n - 2];
        double a = h2 / (h1 * (h1 + h2));
        double b = -(h1 + h2) / (h1 * h2);
        double c = (h1 + 2.0 * h2) / (h2 * (h1 + h2));
        return a * value(n - 3) + b * value(n - 2) + c * value(n - 1);
    }
    return (value(k + 1) - value(k - 1)) / (nodes[k + 1] - nodes[k - 1]);
}

}  // namespace

double Table::interpolate(double t, double x) const {
    const std::size_t nx = x_nodes.size();
    if (t_nodes.size() == 1 && nx == 1) return values[0];

    if (t_nodes.size() == 1) {
        std::size_t j = cell_index(x_nodes, x);
        double w = std::clamp((x - x_nodes[j]) / (x_nodes[j + 1] - x_nodes[j]), 0.0, 1.0);
        return values[j] * (1.0 - w) + values[j + 1] * w;
    }
    if (nx == 1) {
        std::size_t i = cell_index(t_nodes, t);
        double w = std::clamp((t - t_nodes[i]) / (t_nodes[i + 1] - t_nodes[i]), 0.0, 1.0);
        return values[i] * (1.0 - w) + values[i + 1] * w;
    }
    std::size_t i = cell_index(t_nodes, t);
    std::size_t j = cell_index(x_nodes, x);
    double wt = std::clamp((t - t_nodes[i]) / (t_nodes[i + 1] - t_nodes[i]), 0.0, 1.0);
    double wx = std::clamp((x - x_nodes[j]) / (x_nodes[j + 1] - x_nodes[j]), 0.0, 1.0);
    double v00 = values[i * nx + j], v01 = values[i * nx + j + 1];
    double v10 = values[(i + 1) * nx + j], v11 = values[(i + 1) * nx + j + 1];
    return v00 * (1 - wt) * (1 - wx) + v01 * (1 - wt) * wx + v10 * wt * (1 - wx) + v11 * wt * wx;
}

CoefficientField CoefficientField::constant(double value) {
    CoefficientField f;
    f.kind_ = Kind::Constant;
    f.value_ = value;
    return f;
}

CoefficientField CoefficientField::expression(const std::string& source) {
    return expression(Expr::parse(source));
}

CoefficientField CoefficientField::expression(Expr expr) {
    CoefficientField f;
    f.kind_ = Kind::Expression;
    f.expr_ = std::make_shared<Expr>(std::move(expr));
    if (!f.expr_->has_kink()) {
        auto dt = f.expr_->derivative('t');
        auto dx = f.expr_->derivative('x');
        if (dt && dx) {
            auto dxx = dx->derivative('x');
            f.d_t_ = std::make_shared<Expr>(std::move(*dt));
            f.d_x_ = std::make_shared<Expr>(std::move(*dx));
            if (dxx) f.d_xx_ = std::make_shared<Expr>(std::move(*dxx));
            f.symbolic_ok_ = f.d_xx_ != nullptr;
        }
    }
    return f;
}

CoefficientField CoefficientField::tabulated(Table table) {
    if (table.t_nodes.empty() || table.x_nodes.empty())
        throw FieldError("tabulated field needs at least one node per axis");
    if (table.values.size() != table.t_nodes.size() * table.x_nodes.size())
        throw FieldError("tabulated field sample count does not match the grid");
    for (std::size_t i = 1; i < table.t_nodes.size(); ++i)
        if (table.t_nodes[i] <= table.t_nodes[i - 1])
            throw FieldError("tabulated field t-nodes must be strictly increasing");
    for (std::size_t j = 1; j < table.x_nodes.size(); ++j)
        if (table.x_nodes[j] <= table.x_nodes[j - 1])
            throw FieldError("tabulated field x-nodes must be strictly increasing");
    CoefficientField f;
    f.kind_ = Kind::Tabulated;
    f.table_ = std::make_shared<Table>(std::move(table));
    return f;
}

double CoefficientField::eval(double t, double x) const {
    switch (kind_) {
        case Kind::Constant: return value_;
        case Kind::Expression: return expr_->eval(t, x);
        case Kind::Tabulated: return table_->interpolate(t, x);
    }
    return 0.0;
}

double CoefficientField::partial_t(double t, double x) const {
    if (kind_ == Kind::Constant) return 0.0;
    if (symbolic_ok_) return d_t_->eval(t, x);
    if (kind_ == Kind::Tabulated && table_->t_nodes.size() >= 2) {
        // Differentiate through the stored samples: the interpolant is only
        // piecewise linear, so stencils snap to the table's own nodes.
        std::size_t k = nearest_node(table_->t_nodes, t);
        return table_axis_deriv(table_->t_nodes, k,
                                [&](std::size_t i) { return table_->interpolate(table_->t_nodes[i], x); });
    }
    double h = fd_step(t);
    return (eval(t + h, x) - eval(t - h, x)) / (2.0 * h);
}

double CoefficientField::partial_x(double t, double x) const {
    if (kind_ == Kind::Constant) return 0.0;
    if (symbolic_ok_) return d_x_->eval(t, x);
    if (kind_ == Kind::Tabulated && table_->x_nodes.size() >= 2) {
        std::size_t k = nearest_node(table_->x_nodes, x);
        return table_axis_deriv(table_->x_nodes, k,
                                [&](std::size_t i) { return table_->interpolate(t, table_->x_nodes[i]); });
    }
    double h = fd_step(x);
    return (eval(t, x + h) - eval(t, x - h)) / (2.0 * h);
}

double CoefficientField::partial_xx(double t, double x) const {
    if (kind_ == Kind::Constant) return 0.0;
    if (symbolic_ok_) return d_xx_->eval(t, x);
    if (kind_ == Kind::Tabulated && table_->x_nodes.size() >= 3) {
        const auto& xs = table_->x_nodes;
        std::size_t k = std::clamp<std::size_t>(nearest_node(xs, x), 1, xs.size() - 2);
        double hm = xs[k] - xs[k - 1], hp = xs[k + 1] - xs[k];
        double vm = table_->interpolate(t, xs[k - 1]);
        double v0 = table_->interpolate(t, xs[k]);
        double vp = table_->interpolate(t, xs[k + 1]);
        return 2.0 * ((vp - v0) / hp - (v0 - vm) / hm) / (hm + hp);
    }
    double h = fd_step(x);
    return (eval(t, x + h) - 2.0 * eval(t, x) + eval(t, x - h)) / (h * h);
}

bool CoefficientField::constant_in_t() const {
    switch (kind_) {
        case Kind::Constant: return true;
        case Kind::Expression: return !expr_->depends_on('t');
        case Kind::Tabulated: {
            const Table& tb = *table_;
            const std::size_t nx = tb.x_nodes.size();
            for (std::size_t i = 1; i < tb.t_nodes.size(); ++i)
                for (std::size_t j = 0; j < nx; ++j)
                    if (tb.values[i * nx + j] != tb.values[j]) return false;
            return true;
        }
    }
    return true;
}

bool CoefficientField::constant_in_x() const {
    switch (kind_) {
        case Kind::Constant: return true;
        case Kind::Expression: return !expr_->depends_on('x');
        case Kind::Tabulated: {
            const Table& tb = *table_;
            const std::size_t nx = tb.x_nodes.size();
            for (std::size_t i = 0; i < tb.t_nodes.size(); ++i)
                for (std::size_t j = 1; j < nx; ++j)
                    if (tb.values[i * nx + j] != tb.values[i * nx]) return false;
            return true;
        }
    }
    return true;
}

CoefficientField CoefficientField::frozen_at(double t) const {
    switch (kind_) {
        case Kind::Constant: return *this;
        case Kind::Expression: return expression(expr_->with_t_fixed(t));
        case Kind::Tabulated: {
            Table frozen;
            frozen.t_nodes = {0.0};
            frozen.x_nodes = table_->x_nodes;
            frozen.values.reserve(frozen.x_nodes.size());
            for (double x : frozen.x_nodes) frozen.values.push_back(table_->interpolate(t, x));
            return tabulated(std::move(frozen));
        }
    }
    return *this;
}

std::optional<std::string> CoefficientField::source() const {
    if (kind_ == Kind::Expression) return expr_->source();
    if (kind_ == Kind::Constant) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", value_);
        return std::string(buf);
    }
    return std::nullopt;
}

double CoefficientField::constant_value() const {
    if (kind_ != Kind::Constant) throw FieldError("field is not a constant");
    return value_;
}

const Table& CoefficientField::table() const {
    if (kind_ != Kind::Tabulated) throw FieldError("field is not tabulated");
    return *table_;
}

const Expr& CoefficientField::expr() const {
    if (kind_ != Kind::Expression) throw FieldError("field is not an expression");
    return *expr_;
}

}  // namespace stopflow
