#include "stopflow/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <vector>

namespace stopflow {

namespace {

enum class Op {
    Num,
    VarT,
    VarX,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Neg,
    Exp,
    Log,
    Sqrt,
    Min,
    Max,
};

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

struct Expr::Node {
    Op op;
    double value = 0.0;  // Num only
    NodePtr a, b;

    Node(Op o, double v) : op(o), value(v) {}
    Node(Op o, NodePtr lhs, NodePtr rhs) : op(o), a(std::move(lhs)), b(std::move(rhs)) {}
};

namespace {

using Node = Expr::Node;
using NodePtr = Expr::NodePtr;

NodePtr num(double v) { return std::make_shared<Node>(Op::Num, v); }
NodePtr mk(Op op, NodePtr a, NodePtr b = nullptr) { return std::make_shared<Node>(op, std::move(a), std::move(b)); }

bool is_num(const NodePtr& n, double v) { return n->op == Op::Num && n->value == v; }

// Constant-folding constructors keep derivative trees small.
NodePtr add(NodePtr a, NodePtr b) {
    if (a->op == Op::Num && b->op == Op::Num) return num(a->value + b->value);
    if (is_num(a, 0.0)) return b;
    if (is_num(b, 0.0)) return a;
    return mk(Op::Add, std::move(a), std::move(b));
}
NodePtr sub(NodePtr a, NodePtr b) {
    if (a->op == Op::Num && b->op == Op::Num) return num(a->value - b->value);
    if (is_num(b, 0.0)) return a;
    if (is_num(a, 0.0)) return mk(Op::Neg, std::move(b));
    return mk(Op::Sub, std::move(a), std::move(b));
}
NodePtr mul(NodePtr a, NodePtr b) {
    if (a->op == Op::Num && b->op == Op::Num) return num(a->value * b->value);
    if (is_num(a, 0.0) || is_num(b, 0.0)) return num(0.0);
    if (is_num(a, 1.0)) return b;
    if (is_num(b, 1.0)) return a;
    return mk(Op::Mul, std::move(a), std::move(b));
}
NodePtr divn(NodePtr a, NodePtr b) {
    if (is_num(a, 0.0)) return num(0.0);
    if (is_num(b, 1.0)) return a;
    return mk(Op::Div, std::move(a), std::move(b));
}

struct Parser {
    const std::string& src;
    std::size_t pos = 0;

    explicit Parser(const std::string& s) : src(s) {}

    void skip_ws() {
        while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
    }
    bool eat(char c) {
        skip_ws();
        if (pos < src.size() && src[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }
    char peek() {
        skip_ws();
        return pos < src.size() ? src[pos] : '\0';
    }

    NodePtr parse_expr() {
        NodePtr lhs = parse_term();
        for (;;) {
            if (eat('+'))
                lhs = mk(Op::Add, lhs, parse_term());
            else if (eat('-'))
                lhs = mk(Op::Sub, lhs, parse_term());
            else
                return lhs;
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_unary();
        for (;;) {
            if (eat('*'))
                lhs = mk(Op::Mul, lhs, parse_unary());
            else if (eat('/'))
                lhs = mk(Op::Div, lhs, parse_unary());
            else
                return lhs;
        }
    }

    NodePtr parse_unary() {
        if (eat('-')) return mk(Op::Neg, parse_unary());
        if (eat('+')) return parse_unary();
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_atom();
        if (eat('^')) return mk(Op::Pow, base, parse_unary());  // right-associative
        return base;
    }

    NodePtr parse_atom() {
        skip_ws();
        if (pos >= src.size()) throw ExprError("unexpected end of expression", pos);
        char c = src[pos];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
        if (c == '(') {
            ++pos;
            NodePtr e = parse_expr();
            if (!eat(')')) throw ExprError("expected ')'", pos);
            return e;
        }
        throw ExprError(std::string("unexpected character '") + c + "'", pos);
    }

    NodePtr parse_number() {
        std::size_t start = pos;
        const char* begin = src.c_str() + pos;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) throw ExprError("invalid number", start);
        pos += static_cast<std::size_t>(end - begin);
        return num(v);
    }

    NodePtr parse_ident() {
        std::size_t start = pos;
        while (pos < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
            ++pos;
        std::string name = src.substr(start, pos - start);
        if (name == "t") return mk(Op::VarT, nullptr);
        if (name == "x") return mk(Op::VarX, nullptr);
        if (name == "pi") return num(3.14159265358979323846);
        if (name == "e") return num(2.71828182845904523536);

        Op op;
        int arity = 1;
        if (name == "exp")
            op = Op::Exp;
        else if (name == "log")
            op = Op::Log;
        else if (name == "sqrt")
            op = Op::Sqrt;
        else if (name == "min") {
            op = Op::Min;
            arity = 2;
        } else if (name == "max") {
            op = Op::Max;
            arity = 2;
        } else
            throw ExprError("unknown symbol '" + name + "'", start);

        if (!eat('(')) throw ExprError("expected '(' after '" + name + "'", pos);
        NodePtr a = parse_expr();
        NodePtr b;
        if (arity == 2) {
            if (!eat(',')) throw ExprError("expected ',' in '" + name + "'", pos);
            b = parse_expr();
        }
        if (!eat(')')) throw ExprError("expected ')'", pos);
        return mk(op, std::move(a), std::move(b));
    }
};

double eval_node(const Node& n, double t, double x) {
    switch (n.op) {
        case Op::Num: return n.value;
        case Op::VarT: return t;
        case Op::VarX: return x;
        case Op::Add: return eval_node(*n.a, t, x) + eval_node(*n.b, t, x);
        case Op::Sub: return eval_node(*n.a, t, x) - eval_node(*n.b, t, x);
        case Op::Mul: return eval_node(*n.a, t, x) * eval_node(*n.b, t, x);
        case Op::Div: return eval_node(*n.a, t, x) / eval_node(*n.b, t, x);
        case Op::Pow: return std::pow(eval_node(*n.a, t, x), eval_node(*n.b, t, x));
        case Op::Neg: return -eval_node(*n.a, t, x);
        case Op::Exp: return std::exp(eval_node(*n.a, t, x));
        case Op::Log: return std::log(eval_node(*n.a, t, x));
        case Op::Sqrt: return std::sqrt(eval_node(*n.a, t, x));
        case Op::Min: return std::fmin(eval_node(*n.a, t, x), eval_node(*n.b, t, x));
        case Op::Max: return std::fmax(eval_node(*n.a, t, x), eval_node(*n.b, t, x));
    }
    return 0.0;
}

bool node_depends(const Node& n, char var) {
    switch (n.op) {
        case Op::Num: return false;
        case Op::VarT: return var == 't';
        case Op::VarX: return var == 'x';
        default:
            if (n.a && node_depends(*n.a, var)) return true;
            if (n.b && node_depends(*n.b, var)) return true;
            return false;
    }
}

bool node_has_kink(const Node& n) {
    if (n.op == Op::Min || n.op == Op::Max) return true;
    if (n.a && node_has_kink(*n.a)) return true;
    if (n.b && node_has_kink(*n.b)) return true;
    return false;
}

NodePtr diff_node(const NodePtr& n, char var) {
    switch (n->op) {
        case Op::Num: return num(0.0);
        case Op::VarT: return num(var == 't' ? 1.0 : 0.0);
        case Op::VarX: return num(var == 'x' ? 1.0 : 0.0);
        case Op::Add: return add(diff_node(n->a, var), diff_node(n->b, var));
        case Op::Sub: return sub(diff_node(n->a, var), diff_node(n->b, var));
        case Op::Mul:
            return add(mul(diff_node(n->a, var), n->b), mul(n->a, diff_node(n->b, var)));
        case Op::Div:
            // (a/b)' = a'/b - a b' / b^2
            return sub(divn(diff_node(n->a, var), n->b),
                       divn(mul(n->a, diff_node(n->b, var)), mul(n->b, n->b)));
        case Op::Pow: {
            NodePtr da = diff_node(n->a, var);
            NodePtr db = diff_node(n->b, var);
            if (is_num(db, 0.0)) {
                // b constant: b * a^(b-1) * a'
                NodePtr bm1 = sub(n->b, num(1.0));
                return mul(mul(n->b, mk(Op::Pow, n->a, bm1)), da);
            }
            if (is_num(da, 0.0)) {
                // a constant: a^b * ln(a) * b'
                return mul(mul(mk(Op::Pow, n->a, n->b), mk(Op::Log, n->a)), db);
            }
            // general: a^b * (b' ln a + b a'/a)
            NodePtr inner = add(mul(db, mk(Op::Log, n->a)), mul(n->b, divn(da, n->a)));
            return mul(mk(Op::Pow, n->a, n->b), inner);
        }
        case Op::Neg: return mk(Op::Neg, diff_node(n->a, var));
        case Op::Exp: return mul(mk(Op::Exp, n->a), diff_node(n->a, var));
        case Op::Log: return divn(diff_node(n->a, var), n->a);
        case Op::Sqrt:
            return divn(diff_node(n->a, var), mul(num(2.0), mk(Op::Sqrt, n->a)));
        case Op::Min:
        case Op::Max:
            throw ExprError("min/max is not symbolically differentiable", 0);
    }
    return num(0.0);
}

int precedence(Op op) {
    switch (op) {
        case Op::Add:
        case Op::Sub: return 1;
        case Op::Mul:
        case Op::Div: return 2;
        case Op::Neg: return 3;
        case Op::Pow: return 4;
        default: return 5;
    }
}

void print_node(const Node& n, std::string& out, int parent_prec) {
    int prec = precedence(n.op);
    bool paren = prec < parent_prec;
    if (paren) out += '(';
    switch (n.op) {
        case Op::Num:
            if (n.value < 0) {
                out += '(';
                out += format_number(n.value);
                out += ')';
            } else {
                out += format_number(n.value);
            }
            break;
        case Op::VarT: out += 't'; break;
        case Op::VarX: out += 'x'; break;
        case Op::Add:
            print_node(*n.a, out, prec);
            out += '+';
            print_node(*n.b, out, prec);
            break;
        case Op::Sub:
            print_node(*n.a, out, prec);
            out += '-';
            print_node(*n.b, out, prec + 1);
            break;
        case Op::Mul:
            print_node(*n.a, out, prec);
            out += '*';
            print_node(*n.b, out, prec);
            break;
        case Op::Div:
            print_node(*n.a, out, prec);
            out += '/';
            print_node(*n.b, out, prec + 1);
            break;
        case Op::Pow:
            print_node(*n.a, out, prec + 1);
            out += '^';
            print_node(*n.b, out, prec);
            break;
        case Op::Neg:
            out += '-';
            print_node(*n.a, out, prec + 1);
            break;
        case Op::Exp:
        case Op::Log:
        case Op::Sqrt: {
            out += (n.op == Op::Exp ? "exp" : n.op == Op::Log ? "log" : "sqrt");
            out += '(';
            print_node(*n.a, out, 0);
            out += ')';
            break;
        }
        case Op::Min:
        case Op::Max: {
            out += (n.op == Op::Min ? "min" : "max");
            out += '(';
            print_node(*n.a, out, 0);
            out += ',';
            print_node(*n.b, out, 0);
            out += ')';
            break;
        }
    }
    if (paren) out += ')';
}

std::string print_tree(const NodePtr& root) {
    std::string out;
    print_node(*root, out, 0);
    return out;
}

}  // namespace

Expr::Expr(NodePtr root, std::string source) : root_(std::move(root)), source_(std::move(source)) {}

Expr Expr::parse(const std::string& source) {
    Parser p(source);
    NodePtr root = p.parse_expr();
    p.skip_ws();
    if (p.pos != source.size()) throw ExprError("trailing characters", p.pos);
    return Expr(std::move(root), source);
}

Expr Expr::constant(double value) {
    return Expr(num(value), format_number(value));
}

double Expr::eval(double t, double x) const { return eval_node(*root_, t, x); }

bool Expr::depends_on(char var) const { return node_depends(*root_, var); }

bool Expr::has_kink() const { return node_has_kink(*root_); }

std::optional<Expr> Expr::derivative(char var) const {
    if (has_kink()) return std::nullopt;
    NodePtr d = diff_node(root_, var);
    return Expr(d, print_tree(d));
}

namespace {

NodePtr fix_t_node(const NodePtr& n, double t) {
    if (n->op == Op::VarT) return num(t);
    if (!n->a) return n;
    NodePtr a = fix_t_node(n->a, t);
    NodePtr b = n->b ? fix_t_node(n->b, t) : nullptr;
    if (a == n->a && b == n->b) return n;
    return std::make_shared<Node>(n->op, std::move(a), std::move(b));
}

}  // namespace

Expr Expr::with_t_fixed(double t) const {
    NodePtr r = fix_t_node(root_, t);
    return Expr(r, print_tree(r));
}

}  // namespace stopflow
