#include "nht/expr.hpp"

#include <cctype>
#include <charconv>
#include <cstring>
#include <cmath>
#include <functional>
#include <unordered_map>

namespace nht {

namespace {

const std::unordered_map<std::string_view, Op>& functions() {
    static const std::unordered_map<std::string_view, Op> f = {
        {"neg", Op::Neg},   {"sin", Op::Sin}, {"cos", Op::Cos}, {"tan", Op::Tan},
        {"sqrt", Op::Sqrt}, {"exp", Op::Exp}, {"log", Op::Log}, {"abs", Op::Abs},
        {"sign", Op::Sign},
    };
    return f;
}

NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

class Parser {
public:
    explicit Parser(std::string_view s) : s_(s) {}

    NodePtr run() {
        skip();
        if (pos_ >= s_.size()) fail("expression", "empty expression");
        NodePtr e = expr();
        skip();
        if (pos_ < s_.size()) fail("operator or end of input", "unexpected '" + std::string(1, s_[pos_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& expected, const std::string& what) const {
        throw SyntaxError(pos_, expected,
                          "syntax error at byte " + std::to_string(pos_) + ": " + what +
                              " (expected " + expected + ")");
    }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (accept('+')) lhs = make(Op::Add, lhs, term());
            else if (accept('-')) lhs = make(Op::Sub, lhs, term());
            else return lhs;
        }
    }

    NodePtr term() {
        NodePtr lhs = unary();
        for (;;) {
            if (accept('*')) lhs = make(Op::Mul, lhs, unary());
            else if (accept('/')) lhs = make(Op::Div, lhs, unary());
            else return lhs;
        }
    }

    NodePtr unary() {
        if (accept('-')) return make(Op::Neg, unary());
        if (accept('+')) return unary();
        return power();
    }

    NodePtr power() {
        NodePtr base = primary();
        if (accept('^')) return make(Op::Pow, base, unary());
        return base;
    }

    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) fail("number, name or '('", "unexpected end of input");
        char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr e = expr();
            if (!accept(')')) fail("')'", "unbalanced parenthesis");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
                ++pos_;
            std::string_view id = s_.substr(start, pos_ - start);
            skip();
            if (pos_ < s_.size() && s_[pos_] == '(') {
                auto it = functions().find(id);
                if (it == functions().end()) {
                    pos_ = start;
                    fail("function name", "unknown function '" + std::string(id) + "'");
                }
                ++pos_;
                NodePtr arg = expr();
                if (!accept(')')) fail("')'", "unclosed call to " + std::string(id));
                return make(it->second, arg);
            }
            auto n = std::make_shared<Node>();
            n->op = Op::Name;
            n->name = std::string(id);
            return n;
        }
        fail("number, name or '('", "unexpected '" + std::string(1, c) + "'");
    }

    NodePtr number() {
        std::size_t start = pos_;
        auto digits = [&] {
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        };
        digits();
        if (pos_ < s_.size() && s_[pos_] == '.') {
            ++pos_;
            digits();
        }
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t save = pos_;
            ++pos_;
            if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
            if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) digits();
            else pos_ = save;
        }
        double v = 0.0;
        auto r = std::from_chars(s_.data() + start, s_.data() + pos_, v);
        if (r.ec != std::errc() || r.ptr != s_.data() + pos_) {
            pos_ = start;
            fail("number", "malformed number");
        }
        auto n = std::make_shared<Node>();
        n->op = Op::Const;
        n->value = v;
        return n;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

int prec(const Node& n) {
    switch (n.op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    default: return 5;
    }
}

std::string number_text(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

void print(const Node& n, std::string& out) {
    auto wrap = [&](const Node& c, bool paren) {
        if (paren) out += '(';
        print(c, out);
        if (paren) out += ')';
    };
    switch (n.op) {
    case Op::Const:
        if (n.value < 0 || std::signbit(n.value)) {
            out += "(" + number_text(n.value) + ")";
        } else {
            out += number_text(n.value);
        }
        return;
    case Op::Name: out += n.name; return;
    case Op::Neg:
        out += '-';
        wrap(*n.a, prec(*n.a) < 3);
        return;
    case Op::Add:
    case Op::Sub:
        wrap(*n.a, prec(*n.a) < 1);
        out += n.op == Op::Add ? " + " : " - ";
        wrap(*n.b, prec(*n.b) <= 1);
        return;
    case Op::Mul:
    case Op::Div:
        wrap(*n.a, prec(*n.a) < 2);
        out += n.op == Op::Mul ? '*' : '/';
        wrap(*n.b, prec(*n.b) <= 2);
        return;
    case Op::Pow:
        wrap(*n.a, prec(*n.a) < 5);
        out += '^';
        wrap(*n.b, prec(*n.b) < 3);
        return;
    default:
        out += op_name(n.op);
        out += '(';
        print(*n.a, out);
        out += ')';
    }
}

bool same(const Node& x, const Node& y) {
    if (x.op != y.op) return false;
    if (x.op == Op::Const) return std::memcmp(&x.value, &y.value, sizeof(double)) == 0;
    if (x.op == Op::Name) return x.name == y.name;
    if (!same(*x.a, *y.a)) return false;
    return !x.b || same(*x.b, *y.b);
}

}  // namespace

const char* op_name(Op op) {
    switch (op) {
    case Op::Const: return "const";
    case Op::Name: return "name";
    case Op::Neg: return "neg";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Tan: return "tan";
    case Op::Sqrt: return "sqrt";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Abs: return "abs";
    case Op::Sign: return "sign";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Pow: return "pow";
    }
    return "?";
}

std::string to_string(const Node& n) {
    std::string s;
    print(n, s);
    return s;
}

Expr::Expr() : root_(make(Op::Const)) {}

Expr Expr::parse(std::string_view text) { return Expr(Parser(text).run()); }

Expr Expr::constant(double v) {
    auto n = std::make_shared<Node>();
    n->value = v;
    return Expr(n);
}

Expr Expr::name(std::string nm) {
    auto n = std::make_shared<Node>();
    n->op = Op::Name;
    n->name = std::move(nm);
    return Expr(n);
}

Expr Expr::unary(Op op, const Expr& a) { return Expr(make(op, a.root_)); }

Expr Expr::binary(Op op, const Expr& a, const Expr& b) { return Expr(make(op, a.root_, b.root_)); }

std::string Expr::str() const { return to_string(*root_); }

std::set<std::string> Expr::names() const {
    std::set<std::string> out;
    std::function<void(const Node&)> walk = [&](const Node& n) {
        if (n.op == Op::Name) out.insert(n.name);
        if (n.a) walk(*n.a);
        if (n.b) walk(*n.b);
    };
    walk(*root_);
    return out;
}

bool Expr::operator==(const Expr& o) const { return same(*root_, *o.root_); }

}  // namespace nht
