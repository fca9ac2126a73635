#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

namespace stopflow {

/// Error raised while parsing or evaluating an expression. `pos` is the
/// zero-based offset into the source text where the problem was detected.
struct ExprError : std::runtime_error {
    ExprError(const std::string& msg, std::size_t pos)
        : std::runtime_error(msg + " (at offset " + std::to_string(pos) + ")"), position(pos) {}
    std::size_t position;
};

/// Arithmetic expression over the symbols `t` and `x`.
///
/// Grammar: numeric literals, t, x, + - * / ^ (right-assoc), unary minus,
/// exp(e), log(e), sqrt(e), min(a,b), max(a,b), parentheses.
///
/// Evaluation is deterministic: the same tree evaluated at the same point
/// always produces identical bits. Trees built from +,-,*,/,^,exp,log,sqrt
/// admit symbolic derivatives; min/max do not (callers fall back to finite
/// differences).
class Expr {
public:
    static Expr parse(const std::string& source);
    static Expr constant(double value);

    double eval(double t, double x) const;

    /// True when no node references the given variable ('t' or 'x').
    bool depends_on(char var) const;

    /// True when the tree contains min/max (not symbolically differentiable).
    bool has_kink() const;

    /// Symbolic partial derivative with respect to `var` ('t' or 'x'), or
    /// nullopt when the tree contains min/max.
    std::optional<Expr> derivative(char var) const;

    /// Copy with every occurrence of t replaced by the given constant.
    Expr with_t_fixed(double t) const;

    /// Canonical source text (round-trips through parse to an equal tree).
    const std::string& source() const { return source_; }

    struct Node;
    using NodePtr = std::shared_ptr<const Node>;
    explicit Expr(NodePtr root, std::string source);

private:
    NodePtr root_;
    std::string source_;
};

}  // namespace stopflow
