#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace parmp {

// Arithmetic expressions over x1..xn, t, z1..zk with the operators
// + - * / ^ (unary -) and the functions sin, cos, exp, tanh, abs,
// min(.,.), max(.,.). Coefficient fields of a system are written in this
// language inside scenario files.

enum class ExprOp {
    Literal,
    VarX,
    VarT,
    VarZ,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Neg,
    Sin,
    Cos,
    Exp,
    Tanh,
    Abs,
    Min,
    Max,
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    ExprOp op = ExprOp::Literal;
    double literal = 0.0;
    int index = 0;  // 1-based, for VarX / VarZ
    ExprPtr lhs;
    ExprPtr rhs;
};

inline ExprPtr make_literal(double v) {
    auto e = std::make_shared<Expr>();
    e->op = ExprOp::Literal;
    e->literal = v;
    return e;
}

inline ExprPtr make_var(ExprOp op, int index) {
    auto e = std::make_shared<Expr>();
    e->op = op;
    e->index = index;
    return e;
}

inline ExprPtr make_node(ExprOp op, ExprPtr lhs, ExprPtr rhs = nullptr) {
    auto e = std::make_shared<Expr>();
    e->op = op;
    e->lhs = std::move(lhs);
    e->rhs = std::move(rhs);
    return e;
}

inline bool expr_equal(const Expr& a, const Expr& b) {
    if (a.op != b.op) return false;
    switch (a.op) {
        case ExprOp::Literal:
            return a.literal == b.literal;
        case ExprOp::VarX:
        case ExprOp::VarZ:
            return a.index == b.index;
        case ExprOp::VarT:
            return true;
        default:
            if (static_cast<bool>(a.lhs) != static_cast<bool>(b.lhs)) return false;
            if (static_cast<bool>(a.rhs) != static_cast<bool>(b.rhs)) return false;
            if (a.lhs && !expr_equal(*a.lhs, *b.lhs)) return false;
            if (a.rhs && !expr_equal(*a.rhs, *b.rhs)) return false;
            return true;
    }
}

// ---------------------------------------------------------------------------
// Errors

class ParseError : public std::runtime_error {
public:
    ParseError(std::string message, std::size_t offset, std::vector<std::string> expected)
        : std::runtime_error(std::move(message)),
          offset_(offset),
          expected_(std::move(expected)) {}

    std::size_t offset() const { return offset_; }
    const std::vector<std::string>& expected() const { return expected_; }

private:
    std::size_t offset_;
    std::vector<std::string> expected_;
};

class EvalError : public std::runtime_error {
public:
    EvalError(std::string message, std::string subexpr)
        : std::runtime_error(std::move(message)), subexpr_(std::move(subexpr)) {}

    const std::string& subexpr() const { return subexpr_; }

private:
    std::string subexpr_;
};

// ---------------------------------------------------------------------------
// Printing (used for error messages and the round-trip property)

namespace expr_detail {

inline int precedence(ExprOp op) {
    switch (op) {
        case ExprOp::Add:
        case ExprOp::Sub:
            return 1;
        case ExprOp::Mul:
        case ExprOp::Div:
            return 2;
        case ExprOp::Neg:
            return 3;
        case ExprOp::Pow:
            return 4;
        default:
            return 5;
    }
}

inline const char* function_name(ExprOp op) {
    switch (op) {
        case ExprOp::Sin: return "sin";
        case ExprOp::Cos: return "cos";
        case ExprOp::Exp: return "exp";
        case ExprOp::Tanh: return "tanh";
        case ExprOp::Abs: return "abs";
        case ExprOp::Min: return "min";
        case ExprOp::Max: return "max";
        default: return "";
    }
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void print_rec(const Expr& e, std::string& out) {
    const int prec = precedence(e.op);
    auto child = [&](const Expr& c, bool needs_paren) {
        if (needs_paren) out.push_back('(');
        print_rec(c, out);
        if (needs_paren) out.push_back(')');
    };
    switch (e.op) {
        case ExprOp::Literal:
            out += format_double(e.literal);
            return;
        case ExprOp::VarX:
            out += "x" + std::to_string(e.index);
            return;
        case ExprOp::VarZ:
            out += "z" + std::to_string(e.index);
            return;
        case ExprOp::VarT:
            out += "t";
            return;
        case ExprOp::Neg:
            out.push_back('-');
            child(*e.lhs, precedence(e.lhs->op) < prec);
            return;
        case ExprOp::Add:
        case ExprOp::Sub:
        case ExprOp::Mul:
        case ExprOp::Div: {
            child(*e.lhs, precedence(e.lhs->op) < prec);
            const char sym = e.op == ExprOp::Add   ? '+'
                             : e.op == ExprOp::Sub ? '-'
                             : e.op == ExprOp::Mul ? '*'
                                                   : '/';
            out.push_back(' ');
            out.push_back(sym);
            out.push_back(' ');
            // Left-associative: parenthesize a right child of equal precedence.
            child(*e.rhs, precedence(e.rhs->op) <= prec);
            return;
        }
        case ExprOp::Pow:
            // Right-associative; '^' binds tighter than unary minus, so a Neg
            // or any lower-precedence left child needs parentheses.
            child(*e.lhs, precedence(e.lhs->op) <= prec);
            out.push_back('^');
            child(*e.rhs, precedence(e.rhs->op) < precedence(ExprOp::Neg));
            return;
        default:
            out += function_name(e.op);
            out.push_back('(');
            print_rec(*e.lhs, out);
            if (e.rhs) {
                out += ", ";
                print_rec(*e.rhs, out);
            }
            out.push_back(')');
            return;
    }
}

}  // namespace expr_detail

inline std::string print_expression(const Expr& e) {
    std::string out;
    expr_detail::print_rec(e, out);
    return out;
}

// ---------------------------------------------------------------------------
// Parsing

// Maximum variable indices accepted by the parser; x/z identifiers beyond
// these bounds are unknown-identifier errors.
struct ExprDims {
    int n = std::numeric_limits<int>::max();
    int k = std::numeric_limits<int>::max();
};

namespace expr_detail {

class Parser {
public:
    Parser(std::string_view src, ExprDims dims) : src_(src), dims_(dims) {}

    ExprPtr parse() {
        skip_ws();
        ExprPtr e = parse_sum();
        skip_ws();
        if (pos_ != src_.size()) {
            fail("unexpected trailing input", {"operator", "end of input"});
        }
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what, std::vector<std::string> expected) {
        throw ParseError(what + " at offset " + std::to_string(pos_), pos_,
                         std::move(expected));
    }

    void skip_ws() {
        while (pos_ < src_.size() &&
               std::isspace(static_cast<unsigned char>(src_[pos_]))) {
            ++pos_;
        }
    }

    bool peek_is(char c) {
        skip_ws();
        return pos_ < src_.size() && src_[pos_] == c;
    }

    bool consume(char c) {
        if (peek_is(c)) {
            ++pos_;
            return true;
        }
        return false;
    }

    ExprPtr parse_sum() {
        ExprPtr lhs = parse_product();
        for (;;) {
            if (consume('+')) {
                lhs = make_node(ExprOp::Add, lhs, parse_product());
            } else if (consume('-')) {
                lhs = make_node(ExprOp::Sub, lhs, parse_product());
            } else {
                return lhs;
            }
        }
    }

    ExprPtr parse_product() {
        ExprPtr lhs = parse_unary();
        for (;;) {
            if (consume('*')) {
                lhs = make_node(ExprOp::Mul, lhs, parse_unary());
            } else if (consume('/')) {
                lhs = make_node(ExprOp::Div, lhs, parse_unary());
            } else {
                return lhs;
            }
        }
    }

    ExprPtr parse_unary() {
        if (consume('-')) {
            return make_node(ExprOp::Neg, parse_unary());
        }
        return parse_power();
    }

    ExprPtr parse_power() {
        ExprPtr base = parse_atom();
        if (consume('^')) {
            // Right-associative; the exponent may carry a unary minus.
            return make_node(ExprOp::Pow, base, parse_unary());
        }
        return base;
    }

    ExprPtr parse_atom() {
        skip_ws();
        if (pos_ >= src_.size()) {
            fail("unexpected end of input", {"number", "identifier", "'('", "'-'"});
        }
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            ExprPtr inner = parse_sum();
            if (!consume(')')) fail("missing ')'", {"')'"});
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            return parse_number();
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            return parse_identifier();
        }
        fail(std::string("unexpected character '") + c + "'",
             {"number", "identifier", "'('", "'-'"});
    }

    ExprPtr parse_number() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
            ++pos_;
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t expo = pos_ + 1;
            if (expo < src_.size() && (src_[expo] == '+' || src_[expo] == '-')) ++expo;
            if (expo < src_.size() && std::isdigit(static_cast<unsigned char>(src_[expo]))) {
                pos_ = expo;
                while (pos_ < src_.size() &&
                       std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                    ++pos_;
                }
            }
        }
        double value = 0.0;
        const auto res =
            std::from_chars(src_.data() + start, src_.data() + pos_, value);
        if (res.ec != std::errc() || res.ptr != src_.data() + pos_) {
            pos_ = start;
            fail("malformed number", {"number"});
        }
        return make_literal(value);
    }

    ExprPtr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])))) {
            ++pos_;
        }
        const std::string_view name = src_.substr(start, pos_ - start);
        if (name == "t") return make_var(ExprOp::VarT, 0);
        if ((name[0] == 'x' || name[0] == 'z') && name.size() > 1) {
            bool digits = true;
            for (std::size_t i = 1; i < name.size(); ++i) {
                if (!std::isdigit(static_cast<unsigned char>(name[i]))) digits = false;
            }
            if (digits) {
                const int idx = std::atoi(std::string(name.substr(1)).c_str());
                const int bound = name[0] == 'x' ? dims_.n : dims_.k;
                if (idx < 1 || idx > bound) {
                    pos_ = start;
                    fail("unknown identifier '" + std::string(name) + "'",
                         {"variable in range"});
                }
                return make_var(name[0] == 'x' ? ExprOp::VarX : ExprOp::VarZ, idx);
            }
        }
        ExprOp fn;
        int arity = 1;
        if (name == "sin") fn = ExprOp::Sin;
        else if (name == "cos") fn = ExprOp::Cos;
        else if (name == "exp") fn = ExprOp::Exp;
        else if (name == "tanh") fn = ExprOp::Tanh;
        else if (name == "abs") fn = ExprOp::Abs;
        else if (name == "min") { fn = ExprOp::Min; arity = 2; }
        else if (name == "max") { fn = ExprOp::Max; arity = 2; }
        else {
            pos_ = start;
            fail("unknown identifier '" + std::string(name) + "'",
                 {"x<i>", "z<i>", "t", "function name"});
        }
        if (!consume('(')) fail("expected '(' after function name", {"'('"});
        ExprPtr a = parse_sum();
        ExprPtr b;
        if (arity == 2) {
            if (!consume(',')) fail("expected ',' in two-argument function", {"','"});
            b = parse_sum();
        }
        if (!consume(')')) fail("missing ')'", {"')'"});
        return make_node(fn, a, b);
    }

    std::string_view src_;
    ExprDims dims_;
    std::size_t pos_ = 0;
};

}  // namespace expr_detail

inline ExprPtr parse_expression(std::string_view src, ExprDims dims = {}) {
    return expr_detail::Parser(src, dims).parse();
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalEnv {
    const double* x = nullptr;
    int n = 0;
    double t = 0.0;
    const double* z = nullptr;
    int k = 0;
};

inline double evaluate_expression(const Expr& e, const EvalEnv& env) {
    switch (e.op) {
        case ExprOp::Literal:
            return e.literal;
        case ExprOp::VarX:
            if (e.index < 1 || e.index > env.n) {
                throw EvalError("x" + std::to_string(e.index) + " not supplied",
                                print_expression(e));
            }
            return env.x[e.index - 1];
        case ExprOp::VarZ:
            if (e.index < 1 || e.index > env.k) {
                throw EvalError("z" + std::to_string(e.index) + " not supplied",
                                print_expression(e));
            }
            return env.z[e.index - 1];
        case ExprOp::VarT:
            return env.t;
        case ExprOp::Neg:
            return -evaluate_expression(*e.lhs, env);
        case ExprOp::Add:
            return evaluate_expression(*e.lhs, env) + evaluate_expression(*e.rhs, env);
        case ExprOp::Sub:
            return evaluate_expression(*e.lhs, env) - evaluate_expression(*e.rhs, env);
        case ExprOp::Mul:
            return evaluate_expression(*e.lhs, env) * evaluate_expression(*e.rhs, env);
        case ExprOp::Div: {
            const double denom = evaluate_expression(*e.rhs, env);
            if (denom == 0.0) {
                throw EvalError("division by zero", print_expression(e));
            }
            return evaluate_expression(*e.lhs, env) / denom;
        }
        case ExprOp::Pow: {
            const double base = evaluate_expression(*e.lhs, env);
            const double expo = evaluate_expression(*e.rhs, env);
            if (base == 0.0 && expo < 0.0) {
                throw EvalError("zero raised to a negative power", print_expression(e));
            }
            const double v = std::pow(base, expo);
            if (std::isnan(v)) {
                throw EvalError("pow domain error", print_expression(e));
            }
            return v;
        }
        case ExprOp::Sin:
            return std::sin(evaluate_expression(*e.lhs, env));
        case ExprOp::Cos:
            return std::cos(evaluate_expression(*e.lhs, env));
        case ExprOp::Exp:
            return std::exp(evaluate_expression(*e.lhs, env));
        case ExprOp::Tanh:
            return std::tanh(evaluate_expression(*e.lhs, env));
        case ExprOp::Abs:
            return std::fabs(evaluate_expression(*e.lhs, env));
        case ExprOp::Min:
            return std::fmin(evaluate_expression(*e.lhs, env),
                             evaluate_expression(*e.rhs, env));
        case ExprOp::Max:
            return std::fmax(evaluate_expression(*e.lhs, env),
                             evaluate_expression(*e.rhs, env));
    }
    throw EvalError("corrupt expression node", "");
}

// ---------------------------------------------------------------------------
// Compiled form: constant-folded postfix program evaluated on a flat stack.
// Semantically identical to evaluate_expression; used in solver inner loops.

class CompiledExpr {
public:
    CompiledExpr() { instrs_.push_back({ExprOp::Literal, 0.0, 0}); }

    explicit CompiledExpr(const Expr& e) {
        emit(e);
        std::size_t depth = 0;
        max_stack_ = 0;
        for (const auto& ins : instrs_) {
            switch (ins.op) {
                case ExprOp::Literal:
                case ExprOp::VarX:
                case ExprOp::VarT:
                case ExprOp::VarZ:
                    ++depth;
                    break;
                case ExprOp::Neg:
                case ExprOp::Sin:
                case ExprOp::Cos:
                case ExprOp::Exp:
                case ExprOp::Tanh:
                case ExprOp::Abs:
                    break;  // one in, one out
                default:
                    --depth;  // two in, one out
                    break;
            }
            max_stack_ = std::max(max_stack_, depth);
        }
    }

    bool is_constant() const {
        return instrs_.size() == 1 && instrs_[0].op == ExprOp::Literal;
    }

    double eval(const EvalEnv& env) const {
        if (is_constant()) return instrs_[0].literal;
        double stack[kMaxStack];
        std::size_t top = 0;
        for (const auto& ins : instrs_) {
            switch (ins.op) {
                case ExprOp::Literal: stack[top++] = ins.literal; break;
                case ExprOp::VarX:
                    if (ins.index > env.n) throw EvalError("x index out of range", "");
                    stack[top++] = env.x[ins.index - 1];
                    break;
                case ExprOp::VarZ:
                    if (ins.index > env.k) throw EvalError("z index out of range", "");
                    stack[top++] = env.z[ins.index - 1];
                    break;
                case ExprOp::VarT: stack[top++] = env.t; break;
                case ExprOp::Neg: stack[top - 1] = -stack[top - 1]; break;
                case ExprOp::Sin: stack[top - 1] = std::sin(stack[top - 1]); break;
                case ExprOp::Cos: stack[top - 1] = std::cos(stack[top - 1]); break;
                case ExprOp::Exp: stack[top - 1] = std::exp(stack[top - 1]); break;
                case ExprOp::Tanh: stack[top - 1] = std::tanh(stack[top - 1]); break;
                case ExprOp::Abs: stack[top - 1] = std::fabs(stack[top - 1]); break;
                case ExprOp::Add: --top; stack[top - 1] += stack[top]; break;
                case ExprOp::Sub: --top; stack[top - 1] -= stack[top]; break;
                case ExprOp::Mul: --top; stack[top - 1] *= stack[top]; break;
                case ExprOp::Div:
                    --top;
                    if (stack[top] == 0.0) throw EvalError("division by zero", "");
                    stack[top - 1] /= stack[top];
                    break;
                case ExprOp::Pow: {
                    --top;
                    const double base = stack[top - 1];
                    const double expo = stack[top];
                    if (base == 0.0 && expo < 0.0) {
                        throw EvalError("zero raised to a negative power", "");
                    }
                    const double v = std::pow(base, expo);
                    if (std::isnan(v)) throw EvalError("pow domain error", "");
                    stack[top - 1] = v;
                    break;
                }
                case ExprOp::Min: --top; stack[top - 1] = std::fmin(stack[top - 1], stack[top]); break;
                case ExprOp::Max: --top; stack[top - 1] = std::fmax(stack[top - 1], stack[top]); break;
            }
        }
        return stack[0];
    }

private:
    struct Instr {
        ExprOp op;
        double literal;
        int index;
    };

    static constexpr std::size_t kMaxStack = 128;

    // Emits a node; folds variable-free subtrees to literals when they
    // evaluate cleanly.
    void emit(const Expr& e) {
        if (!contains_var(e)) {
            try {
                EvalEnv empty;
                instrs_.push_back({ExprOp::Literal, evaluate_expression(e, empty), 0});
                return;
            } catch (const EvalError&) {
                // fall through, error surfaces at eval time
            }
        }
        switch (e.op) {
            case ExprOp::Literal:
                instrs_.push_back({ExprOp::Literal, e.literal, 0});
                return;
            case ExprOp::VarX:
            case ExprOp::VarZ:
                instrs_.push_back({e.op, 0.0, e.index});
                return;
            case ExprOp::VarT:
                instrs_.push_back({ExprOp::VarT, 0.0, 0});
                return;
            default:
                emit(*e.lhs);
                if (e.rhs) emit(*e.rhs);
                instrs_.push_back({e.op, 0.0, 0});
                return;
        }
    }

    static bool contains_var(const Expr& e) {
        switch (e.op) {
            case ExprOp::VarX:
            case ExprOp::VarT:
            case ExprOp::VarZ:
                return true;
            case ExprOp::Literal:
                return false;
            default:
                if (e.lhs && contains_var(*e.lhs)) return true;
                if (e.rhs && contains_var(*e.rhs)) return true;
                return false;
        }
    }

    std::vector<Instr> instrs_;
    std::size_t max_stack_ = 0;
};

}  // namespace parmp
