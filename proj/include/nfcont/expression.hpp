#pragma once
// Tiny analytic expression trees over (x, y): sums of products of constants,
// monomials, integer powers, cos and sin. Kernel factors are stored in this
// form so that pointwise evaluation and exact symbolic derivatives (needed by
// the Sobolev-Frobenius norm) come from one representation. A matching text
// parser serves user-defined kernels.

#include <cctype>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

namespace nfcont {

class Expr {
    struct Node;
    using P = std::shared_ptr<const Node>;

    enum class Op { Const, VarX, VarY, Add, Mul, Neg, Cos, Sin, Pow };

    struct Node {
        Op op;
        double value = 0.0;  // Const
        int exponent = 0;    // Pow
        P a, b;
        Node(Op o, double v, int e, P x, P y)
            : op(o), value(v), exponent(e), a(std::move(x)), b(std::move(y)) {}
    };

    P n_;
    explicit Expr(P n) : n_(std::move(n)) {}

    static Expr make(Op op, double v, int e, P a, P b) {
        return Expr(std::make_shared<Node>(op, v, e, std::move(a), std::move(b)));
    }

public:
    Expr() : Expr(constant(0.0)) {}

    static Expr constant(double c) { return make(Op::Const, c, 0, nullptr, nullptr); }
    static Expr x() { return make(Op::VarX, 0, 0, nullptr, nullptr); }
    static Expr y() { return make(Op::VarY, 0, 0, nullptr, nullptr); }

    bool is_const(double c) const { return n_->op == Op::Const && n_->value == c; }

    friend Expr operator+(const Expr& a, const Expr& b) {
        if (a.n_->op == Op::Const && b.n_->op == Op::Const)
            return constant(a.n_->value + b.n_->value);
        if (a.is_const(0.0)) return b;
        if (b.is_const(0.0)) return a;
        return make(Op::Add, 0, 0, a.n_, b.n_);
    }
    friend Expr operator*(const Expr& a, const Expr& b) {
        if (a.n_->op == Op::Const && b.n_->op == Op::Const)
            return constant(a.n_->value * b.n_->value);
        if (a.is_const(0.0) || b.is_const(0.0)) return constant(0.0);
        if (a.is_const(1.0)) return b;
        if (b.is_const(1.0)) return a;
        return make(Op::Mul, 0, 0, a.n_, b.n_);
    }
    friend Expr operator-(const Expr& a) {
        if (a.n_->op == Op::Const) return constant(-a.n_->value);
        return make(Op::Neg, 0, 0, a.n_, nullptr);
    }
    friend Expr operator-(const Expr& a, const Expr& b) { return a + (-b); }

    static Expr cos(const Expr& a) { return make(Op::Cos, 0, 0, a.n_, nullptr); }
    static Expr sin(const Expr& a) { return make(Op::Sin, 0, 0, a.n_, nullptr); }

    static Expr pow(const Expr& a, int k) {
        if (k < 0) throw std::invalid_argument("Expr::pow: negative exponent");
        if (k == 0) return constant(1.0);
        if (k == 1) return a;
        if (a.n_->op == Op::Const) return constant(std::pow(a.n_->value, k));
        return make(Op::Pow, 0, k, a.n_, nullptr);
    }

    double eval(double xv, double yv) const {
        switch (n_->op) {
            case Op::Const: return n_->value;
            case Op::VarX: return xv;
            case Op::VarY: return yv;
            case Op::Add: return Expr(n_->a).eval(xv, yv) + Expr(n_->b).eval(xv, yv);
            case Op::Mul: return Expr(n_->a).eval(xv, yv) * Expr(n_->b).eval(xv, yv);
            case Op::Neg: return -Expr(n_->a).eval(xv, yv);
            case Op::Cos: return std::cos(Expr(n_->a).eval(xv, yv));
            case Op::Sin: return std::sin(Expr(n_->a).eval(xv, yv));
            case Op::Pow: return std::pow(Expr(n_->a).eval(xv, yv), n_->exponent);
        }
        return 0.0;
    }

    /// Exact derivative with respect to axis 0 (x) or 1 (y).
    Expr derivative(int axis) const {
        const Expr a = n_->a ? Expr(n_->a) : Expr();
        const Expr b = n_->b ? Expr(n_->b) : Expr();
        switch (n_->op) {
            case Op::Const: return constant(0.0);
            case Op::VarX: return constant(axis == 0 ? 1.0 : 0.0);
            case Op::VarY: return constant(axis == 1 ? 1.0 : 0.0);
            case Op::Add: return a.derivative(axis) + b.derivative(axis);
            case Op::Mul: return a.derivative(axis) * b + a * b.derivative(axis);
            case Op::Neg: return -a.derivative(axis);
            case Op::Cos: return -(sin(a) * a.derivative(axis));
            case Op::Sin: return cos(a) * a.derivative(axis);
            case Op::Pow:
                return constant(double(n_->exponent)) * pow(a, n_->exponent - 1) *
                       a.derivative(axis);
        }
        return constant(0.0);
    }
};

// ---------------------------------------------------------------------------
// parser: expr := term (('+'|'-') term)*; term := unary ('*' unary)*;
// unary := '-' unary | postfix; postfix := atom ('^' uint)?;
// atom := number | x | y | cos(expr) | sin(expr) | (expr)
// ---------------------------------------------------------------------------

namespace detail {

class ExprParser {
public:
    explicit ExprParser(std::string s) : s_(std::move(s)) {}

    Expr parse() {
        Expr e = expr();
        skip();
        if (pos_ != s_.size()) fail("trailing input");
        return e;
    }

private:
    std::string s_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& what) {
        throw std::invalid_argument("expression parse error at position " +
                                    std::to_string(pos_) + ": " + what);
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) { ++pos_; return true; }
        return false;
    }
    char peek() {
        skip();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }

    Expr expr() {
        Expr e = term();
        for (;;) {
            if (eat('+')) e = e + term();
            else if (eat('-')) e = e - term();
            else return e;
        }
    }
    Expr term() {
        Expr e = unary();
        while (eat('*')) e = e * unary();
        return e;
    }
    Expr unary() {
        if (eat('-')) return -unary();
        return postfix();
    }
    Expr postfix() {
        Expr e = atom();
        if (eat('^')) {
            skip();
            std::size_t start = pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            if (start == pos_) fail("expected integer exponent");
            e = Expr::pow(e, std::stoi(s_.substr(start, pos_ - start)));
        }
        return e;
    }
    Expr atom() {
        skip();
        const char c = peek();
        if (c == '(') {
            eat('(');
            Expr e = expr();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(s_.substr(pos_), &used);
            } catch (const std::exception&) {
                fail("bad number");
            }
            pos_ += used;
            return Expr::constant(v);
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            const std::string name = s_.substr(start, pos_ - start);
            if (name == "x") return Expr::x();
            if (name == "y") return Expr::y();
            if (name == "cos" || name == "sin") {
                if (!eat('(')) fail("expected '(' after function name");
                Expr a = expr();
                if (!eat(')')) fail("expected ')'");
                return name == "cos" ? Expr::cos(a) : Expr::sin(a);
            }
            fail("unknown identifier '" + name + "'");
        }
        fail("expected expression");
    }
};

}  // namespace detail

/// Parse the factor grammar; throws std::invalid_argument with position info.
inline Expr parse_expression(const std::string& text) {
    return detail::ExprParser(text).parse();
}

}  // namespace nfcont
