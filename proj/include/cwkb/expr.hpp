#pragma once

// Analytic expressions over complex arguments: parse, evaluate, differentiate.
// Only single-valued primitives are offered so that every expression continues
// analytically into a strip around the real axis.

#include <array>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cwkb/error.hpp"

namespace cwkb::expr {

using cplx = std::complex<double>;

enum class UnaryOp { Neg, Exp, Sin, Cos, Tanh, Sech };
enum class BinaryOp { Add, Sub, Mul, Div };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Constant {
    cplx value;
};
struct Variable {
    std::string name;
};
struct Unary {
    UnaryOp op;
    NodePtr arg;
};
struct Binary {
    BinaryOp op;
    NodePtr lhs, rhs;
};
struct Power {
    NodePtr base;
    int exponent;
};

struct Node {
    std::variant<Constant, Variable, Unary, Binary, Power> data;
};

using Bindings = std::map<std::string, cplx, std::less<>>;

namespace detail {

inline cplx ipow(cplx b, int n) {
    if (n < 0) return cplx(1.0) / ipow(b, -n);
    cplx r(1.0);
    while (n) {
        if (n & 1) r *= b;
        b *= b;
        n >>= 1;
    }
    return r;
}

inline cplx apply(UnaryOp op, cplx a) {
    switch (op) {
    case UnaryOp::Neg: return -a;
    case UnaryOp::Exp: return std::exp(a);
    case UnaryOp::Sin: return std::sin(a);
    case UnaryOp::Cos: return std::cos(a);
    case UnaryOp::Tanh: return std::tanh(a);
    case UnaryOp::Sech: return cplx(1.0) / std::cosh(a);
    }
    return a;
}

inline cplx apply(BinaryOp op, cplx a, cplx b) {
    switch (op) {
    case BinaryOp::Add: return a + b;
    case BinaryOp::Sub: return a - b;
    case BinaryOp::Mul: return a * b;
    case BinaryOp::Div: return a / b;
    }
    return a;
}

inline bool finite(cplx v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

inline const char* name_of(UnaryOp op) {
    switch (op) {
    case UnaryOp::Neg: return "-";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Sin: return "sin";
    case UnaryOp::Cos: return "cos";
    case UnaryOp::Tanh: return "tanh";
    case UnaryOp::Sech: return "sech";
    }
    return "?";
}

}  // namespace detail

class Expression {
public:
    Expression() : root_(std::make_shared<Node>(Node{Constant{0.0}})) {}
    explicit Expression(NodePtr root) : root_(std::move(root)) {}

    static Expression constant(cplx v) { return Expression(std::make_shared<Node>(Node{Constant{v}})); }
    static Expression variable(std::string name) {
        return Expression(std::make_shared<Node>(Node{Variable{std::move(name)}}));
    }

    const Node& root() const { return *root_; }
    const NodePtr& node() const { return root_; }

    bool is_constant() const { return std::holds_alternative<Constant>(root_->data); }
    bool is_zero() const {
        auto c = std::get_if<Constant>(&root_->data);
        return c && c->value == cplx(0.0);
    }

    cplx evaluate(const Bindings& b) const {
        cplx v = eval(*root_, b);
        if (!detail::finite(v)) throw Error(ErrorCode::NonFinite, "expression '" + to_string() + "' is not finite");
        return v;
    }

    std::set<std::string> free_variables() const {
        std::set<std::string> out;
        collect(*root_, out);
        return out;
    }

    std::string to_string() const { return print(*root_); }

private:
    NodePtr root_;

    static cplx eval(const Node& n, const Bindings& b) {
        return std::visit(
            [&](const auto& v) -> cplx {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, Constant>) {
                    return v.value;
                } else if constexpr (std::is_same_v<T, Variable>) {
                    auto it = b.find(v.name);
                    if (it == b.end()) throw Error(ErrorCode::UnboundVariable, "variable '" + v.name + "' is not bound");
                    return it->second;
                } else if constexpr (std::is_same_v<T, Unary>) {
                    return detail::apply(v.op, eval(*v.arg, b));
                } else if constexpr (std::is_same_v<T, Binary>) {
                    return detail::apply(v.op, eval(*v.lhs, b), eval(*v.rhs, b));
                } else {
                    return detail::ipow(eval(*v.base, b), v.exponent);
                }
            },
            n.data);
    }

    static void collect(const Node& n, std::set<std::string>& out) {
        std::visit(
            [&](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, Variable>) {
                    out.insert(v.name);
                } else if constexpr (std::is_same_v<T, Unary>) {
                    collect(*v.arg, out);
                } else if constexpr (std::is_same_v<T, Binary>) {
                    collect(*v.lhs, out);
                    collect(*v.rhs, out);
                } else if constexpr (std::is_same_v<T, Power>) {
                    collect(*v.base, out);
                }
            },
            n.data);
    }

    // Precedence levels used by the printer: 1 add/sub, 2 mul/div, 3 neg, 4 pow, 5 atom.
    static int precedence(const Node& n) {
        if (auto c = std::get_if<Constant>(&n.data)) {
            const cplx v = c->value;
            const bool plain = v.imag() == 0.0 && !std::signbit(v.real());
            const bool unit_i = v.real() == 0.0 && v.imag() == 1.0;
            return (plain || unit_i) ? 5 : 1;
        }
        if (std::holds_alternative<Variable>(n.data)) return 5;
        if (auto u = std::get_if<Unary>(&n.data)) return u->op == UnaryOp::Neg ? 3 : 5;
        if (auto b = std::get_if<Binary>(&n.data)) return (b->op == BinaryOp::Add || b->op == BinaryOp::Sub) ? 1 : 2;
        return 4;
    }

    static std::string number(double v) {
        std::ostringstream os;
        os << std::setprecision(17) << v;
        return os.str();
    }

    static std::string wrap(const Node& n, int need) {
        std::string s = print(n);
        return precedence(n) < need ? "(" + s + ")" : s;
    }

    static std::string print(const Node& n) {
        return std::visit(
            [&](const auto& v) -> std::string {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, Constant>) {
                    const cplx c = v.value;
                    if (c.imag() == 0.0 && !std::signbit(c.real())) return number(c.real());
                    if (c.real() == 0.0 && c.imag() == 1.0) return "i";
                    return "(" + number(c.real()) + "+" + number(c.imag()) + "*i)";
                } else if constexpr (std::is_same_v<T, Variable>) {
                    return v.name;
                } else if constexpr (std::is_same_v<T, Unary>) {
                    if (v.op == UnaryOp::Neg) {
                        // A nested negation needs parentheses to avoid reading as one token.
                        const bool nested = precedence(*v.arg) == 3;
                        return nested ? "-(" + print(*v.arg) + ")" : "-" + wrap(*v.arg, 4);
                    }
                    return std::string(detail::name_of(v.op)) + "(" + print(*v.arg) + ")";
                } else if constexpr (std::is_same_v<T, Binary>) {
                    const int p = (v.op == BinaryOp::Add || v.op == BinaryOp::Sub) ? 1 : 2;
                    const char* sym = v.op == BinaryOp::Add   ? "+"
                                      : v.op == BinaryOp::Sub ? "-"
                                      : v.op == BinaryOp::Mul ? "*"
                                                              : "/";
                    return wrap(*v.lhs, p) + sym + wrap(*v.rhs, p + 1);
                } else {
                    std::string e = v.exponent < 0 ? "(" + std::to_string(v.exponent) + ")" : std::to_string(v.exponent);
                    return wrap(*v.base, 5) + "^" + e;
                }
            },
            n.data);
    }
};

inline bool structurally_equal(const Node& a, const Node& b) {
    if (a.data.index() != b.data.index()) return false;
    return std::visit(
        [&](const auto& va) -> bool {
            using T = std::decay_t<decltype(va)>;
            const auto& vb = std::get<T>(b.data);
            if constexpr (std::is_same_v<T, Constant>) {
                return va.value == vb.value;
            } else if constexpr (std::is_same_v<T, Variable>) {
                return va.name == vb.name;
            } else if constexpr (std::is_same_v<T, Unary>) {
                return va.op == vb.op && structurally_equal(*va.arg, *vb.arg);
            } else if constexpr (std::is_same_v<T, Binary>) {
                return va.op == vb.op && structurally_equal(*va.lhs, *vb.lhs) && structurally_equal(*va.rhs, *vb.rhs);
            } else {
                return va.exponent == vb.exponent && structurally_equal(*va.base, *vb.base);
            }
        },
        a.data);
}

inline bool structurally_equal(const Expression& a, const Expression& b) { return structurally_equal(a.root(), b.root()); }

// ---------------------------------------------------------------- builders
// Constant folding happens here; nothing else is simplified.

namespace build {

inline NodePtr constant(cplx v) { return std::make_shared<Node>(Node{Constant{v}}); }

inline const Constant* const_node(const NodePtr& n) { return std::get_if<Constant>(&n->data); }

inline NodePtr unary(UnaryOp op, NodePtr a) {
    if (auto c = const_node(a)) return constant(detail::apply(op, c->value));
    if (op == UnaryOp::Neg) {
        if (auto u = std::get_if<Unary>(&a->data); u && u->op == UnaryOp::Neg) return u->arg;
    }
    return std::make_shared<Node>(Node{Unary{op, std::move(a)}});
}

inline NodePtr binary(BinaryOp op, NodePtr a, NodePtr b) {
    auto ca = const_node(a);
    auto cb = const_node(b);
    if (ca && cb) return constant(detail::apply(op, ca->value, cb->value));
    const cplx zero(0.0), one(1.0);
    switch (op) {
    case BinaryOp::Add:
        if (ca && ca->value == zero) return b;
        if (cb && cb->value == zero) return a;
        break;
    case BinaryOp::Sub:
        if (cb && cb->value == zero) return a;
        if (ca && ca->value == zero) return unary(UnaryOp::Neg, b);
        break;
    case BinaryOp::Mul:
        if ((ca && ca->value == zero) || (cb && cb->value == zero)) return constant(zero);
        if (ca && ca->value == one) return b;
        if (cb && cb->value == one) return a;
        break;
    case BinaryOp::Div:
        if (ca && ca->value == zero) return constant(zero);
        if (cb && cb->value == one) return a;
        break;
    }
    return std::make_shared<Node>(Node{Binary{op, std::move(a), std::move(b)}});
}

inline NodePtr power(NodePtr b, int n) {
    if (n == 0) return constant(1.0);
    if (n == 1) return b;
    if (auto c = const_node(b)) return constant(detail::ipow(c->value, n));
    return std::make_shared<Node>(Node{Power{std::move(b), n}});
}

inline NodePtr add(NodePtr a, NodePtr b) { return binary(BinaryOp::Add, std::move(a), std::move(b)); }
inline NodePtr sub(NodePtr a, NodePtr b) { return binary(BinaryOp::Sub, std::move(a), std::move(b)); }
inline NodePtr mul(NodePtr a, NodePtr b) { return binary(BinaryOp::Mul, std::move(a), std::move(b)); }
inline NodePtr div(NodePtr a, NodePtr b) { return binary(BinaryOp::Div, std::move(a), std::move(b)); }
inline NodePtr neg(NodePtr a) { return unary(UnaryOp::Neg, std::move(a)); }

}  // namespace build

// ---------------------------------------------------------------- parser

/// Names always understood by the parser besides the caller's variables.
inline bool is_function_name(std::string_view s) {
    return s == "exp" || s == "sin" || s == "cos" || s == "tanh" || s == "sech";
}

class Parser {
public:
    Parser(std::string_view text, const std::set<std::string>& names) : s_(text), names_(names) {}

    Expression run() {
        NodePtr e = parse_sum();
        skip();
        if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
        return Expression(e);
    }

private:
    std::string_view s_;
    const std::set<std::string>& names_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(ErrorCode::Syntax, pos_, msg); }

    void skip() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' || s_[pos_] == '\r')) ++pos_;
    }
    bool peek(char c) {
        skip();
        return pos_ < s_.size() && s_[pos_] == c;
    }
    bool accept(char c) {
        if (peek(c)) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    NodePtr make(Node n) { return std::make_shared<Node>(std::move(n)); }

    NodePtr parse_sum() {
        NodePtr lhs = parse_product();
        for (;;) {
            if (accept('+'))
                lhs = make(Node{Binary{BinaryOp::Add, lhs, parse_product()}});
            else if (accept('-'))
                lhs = make(Node{Binary{BinaryOp::Sub, lhs, parse_product()}});
            else
                return lhs;
        }
    }

    NodePtr parse_product() {
        NodePtr lhs = parse_unary();
        for (;;) {
            if (accept('*'))
                lhs = make(Node{Binary{BinaryOp::Mul, lhs, parse_unary()}});
            else if (accept('/'))
                lhs = make(Node{Binary{BinaryOp::Div, lhs, parse_unary()}});
            else
                return lhs;
        }
    }

    NodePtr parse_unary() {
        if (accept('-')) return make(Node{Unary{UnaryOp::Neg, parse_unary()}});
        if (accept('+')) return parse_unary();
        return parse_power();
    }

    int parse_exponent() {
        skip();
        bool paren = accept('(');
        skip();
        bool negative = false;
        if (accept('-'))
            negative = true;
        else
            accept('+');
        skip();
        std::size_t start = pos_;
        while (pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '9') ++pos_;
        if (start == pos_) fail("integer exponent expected");
        int n = 0;
        auto [p, ec] = std::from_chars(s_.data() + start, s_.data() + pos_, n);
        if (ec != std::errc()) fail("exponent out of range");
        if (paren) expect(')');
        return negative ? -n : n;
    }

    NodePtr parse_power() {
        NodePtr base = parse_atom();
        if (accept('^')) return make(Node{Power{base, parse_exponent()}});
        return base;
    }

    NodePtr parse_atom() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr e = parse_sum();
            expect(')');
            return e;
        }
        if ((c >= '0' && c <= '9') || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
            std::string name(s_.substr(start, pos_ - start));
            if (is_function_name(name)) {
                expect('(');
                NodePtr arg = parse_sum();
                expect(')');
                UnaryOp op = name == "exp"    ? UnaryOp::Exp
                             : name == "sin"  ? UnaryOp::Sin
                             : name == "cos"  ? UnaryOp::Cos
                             : name == "tanh" ? UnaryOp::Tanh
                                              : UnaryOp::Sech;
                return make(Node{Unary{op, arg}});
            }
            if (name == "i") return make(Node{Constant{cplx(0.0, 1.0)}});
            if (name == "pi") return make(Node{Constant{cplx(std::numbers::pi)}});
            if (!names_.count(name)) throw ParseError(ErrorCode::UnknownIdentifier, start, "unknown identifier '" + name + "'");
            return make(Node{Variable{name}});
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    NodePtr parse_number() {
        std::size_t start = pos_;
        while (pos_ < s_.size() && ((s_[pos_] >= '0' && s_[pos_] <= '9') || s_[pos_] == '.')) ++pos_;
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t save = pos_;
            ++pos_;
            if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
            if (pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '9') {
                while (pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '9') ++pos_;
            } else {
                pos_ = save;
            }
        }
        double v = 0.0;
        auto [p, ec] = std::from_chars(s_.data() + start, s_.data() + pos_, v);
        if (ec != std::errc() || p != s_.data() + pos_) {
            pos_ = start;
            fail("malformed number");
        }
        return make(Node{Constant{cplx(v)}});
    }
};

/// Parse `text`; identifiers other than functions, `i`, `pi` must appear in `names`.
inline Expression parse(std::string_view text, const std::set<std::string>& names = {"x", "delta"}) {
    return Parser(text, names).run();
}

// ---------------------------------------------------------------- derivative

inline NodePtr differentiate(const NodePtr& n, std::string_view var) {
    using namespace build;
    return std::visit(
        [&](const auto& v) -> NodePtr {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return constant(0.0);
            } else if constexpr (std::is_same_v<T, Variable>) {
                return constant(v.name == var ? 1.0 : 0.0);
            } else if constexpr (std::is_same_v<T, Unary>) {
                NodePtr da = differentiate(v.arg, var);
                if (auto c = const_node(da); c && c->value == cplx(0.0)) return constant(0.0);
                const NodePtr& a = v.arg;
                switch (v.op) {
                case UnaryOp::Neg: return neg(da);
                case UnaryOp::Exp: return mul(unary(UnaryOp::Exp, a), da);
                case UnaryOp::Sin: return mul(unary(UnaryOp::Cos, a), da);
                case UnaryOp::Cos: return neg(mul(unary(UnaryOp::Sin, a), da));
                case UnaryOp::Tanh: return mul(power(unary(UnaryOp::Sech, a), 2), da);
                case UnaryOp::Sech:
                    return neg(mul(mul(unary(UnaryOp::Sech, a), unary(UnaryOp::Tanh, a)), da));
                }
                return constant(0.0);
            } else if constexpr (std::is_same_v<T, Binary>) {
                NodePtr dl = differentiate(v.lhs, var);
                NodePtr dr = differentiate(v.rhs, var);
                switch (v.op) {
                case BinaryOp::Add: return add(dl, dr);
                case BinaryOp::Sub: return sub(dl, dr);
                case BinaryOp::Mul: return add(mul(dl, v.rhs), mul(v.lhs, dr));
                case BinaryOp::Div:
                    return div(sub(mul(dl, v.rhs), mul(v.lhs, dr)), power(v.rhs, 2));
                }
                return constant(0.0);
            } else {
                NodePtr db = differentiate(v.base, var);
                if (auto c = const_node(db); c && c->value == cplx(0.0)) return constant(0.0);
                return mul(mul(constant(double(v.exponent)), power(v.base, v.exponent - 1)), db);
            }
        },
        n->data);
}

inline Expression derivative(const Expression& e, std::string_view var) { return Expression(differentiate(e.node(), var)); }

// ---------------------------------------------------------------- compiled form

/// Postfix program with variables resolved to slots; the hot path of model evaluation.
class Program {
public:
    Program() = default;
    Program(const Expression& e, const std::vector<std::string>& slots) {
        int depth = 0;
        emit(e.root(), slots, depth);
        if (code_.size() == 1 && code_[0].kind == Kind::Const) constant_ = code_[0].c;
    }

    cplx operator()(std::span<const cplx> vars) const {
        if (constant_) return *constant_;
        std::array<cplx, 64> small;
        std::vector<cplx> big;
        cplx* st = small.data();
        if (max_depth_ > int(small.size())) {
            big.resize(max_depth_);
            st = big.data();
        }
        int sp = 0;
        for (const auto& in : code_) {
            switch (in.kind) {
            case Kind::Const: st[sp++] = in.c; break;
            case Kind::Var: st[sp++] = vars[in.slot]; break;
            case Kind::Un: st[sp - 1] = detail::apply(in.u, st[sp - 1]); break;
            case Kind::Bin:
                st[sp - 2] = detail::apply(in.b, st[sp - 2], st[sp - 1]);
                --sp;
                break;
            case Kind::Pow: st[sp - 1] = detail::ipow(st[sp - 1], in.slot); break;
            }
        }
        return st[0];
    }

    bool is_constant() const { return constant_.has_value(); }
    bool is_zero() const { return constant_ && *constant_ == cplx(0.0); }

private:
    enum class Kind : std::uint8_t { Const, Var, Un, Bin, Pow };
    struct Instr {
        Kind kind;
        UnaryOp u{};
        BinaryOp b{};
        int slot = 0;
        cplx c{};
    };
    std::vector<Instr> code_;
    int max_depth_ = 0;
    std::optional<cplx> constant_;

    void push_depth(int& depth) {
        ++depth;
        if (depth > max_depth_) max_depth_ = depth;
    }

    void emit(const Node& n, const std::vector<std::string>& slots, int& depth) {
        std::visit(
            [&](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, Constant>) {
                    code_.push_back({Kind::Const, {}, {}, 0, v.value});
                    push_depth(depth);
                } else if constexpr (std::is_same_v<T, Variable>) {
                    int s = -1;
                    for (std::size_t k = 0; k < slots.size(); ++k)
                        if (slots[k] == v.name) s = int(k);
                    if (s < 0) throw Error(ErrorCode::UnboundVariable, "variable '" + v.name + "' has no slot");
                    code_.push_back({Kind::Var, {}, {}, s, {}});
                    push_depth(depth);
                } else if constexpr (std::is_same_v<T, Unary>) {
                    emit(*v.arg, slots, depth);
                    code_.push_back({Kind::Un, v.op, {}, 0, {}});
                } else if constexpr (std::is_same_v<T, Binary>) {
                    emit(*v.lhs, slots, depth);
                    emit(*v.rhs, slots, depth);
                    code_.push_back({Kind::Bin, {}, v.op, 0, {}});
                    --depth;
                } else {
                    emit(*v.base, slots, depth);
                    code_.push_back({Kind::Pow, {}, {}, v.exponent, {}});
                }
            },
            n.data);
    }
};

}  // namespace cwkb::expr
