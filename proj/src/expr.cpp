#include "degfrac/expr.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <system_error>
#include <utility>

namespace degfrac::expr {

ParseError::ParseError(ParseErrorKind kind, std::size_t offset, const std::string& message)
    : std::runtime_error(message + " (at offset " + std::to_string(offset) + ")"),
      kind_(kind),
      offset_(offset) {}

namespace {

using NodePtr = std::shared_ptr<const Node>;

struct FuncInfo {
    std::string_view name;
    Func func;
    std::size_t arity;
};

constexpr std::array<FuncInfo, 7> kFunctions{{
    {"sin", Func::Sin, 1},
    {"cos", Func::Cos, 1},
    {"exp", Func::Exp, 1},
    {"log", Func::Log, 1},
    {"sqrt", Func::Sqrt, 1},
    {"abs", Func::Abs, 1},
    {"pow", Func::Pow, 2},
}};

const FuncInfo* find_function(std::string_view name) {
    for (const auto& f : kFunctions) {
        if (f.name == name) return &f;
    }
    return nullptr;
}

std::string_view function_name(Func func) {
    for (const auto& f : kFunctions) {
        if (f.func == func) return f.name;
    }
    return "?";
}

NodePtr make_leaf(Node::Kind kind, double number = 0.0) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->number = number;
    return n;
}

NodePtr make_node(Node::Kind kind, std::vector<NodePtr> args) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->args = std::move(args);
    return n;
}

class Parser {
public:
    Parser(std::string_view src, std::string_view var) : src_(src), var_(var) {}

    NodePtr parse() {
        skip_ws();
        if (pos_ == src_.size()) fail(ParseErrorKind::Syntax, "empty expression");
        NodePtr e = parse_expr();
        skip_ws();
        if (pos_ != src_.size()) fail(ParseErrorKind::Syntax, "unexpected trailing input");
        return e;
    }

private:
    [[noreturn]] void fail(ParseErrorKind kind, const std::string& msg) const { fail_at(kind, pos_, msg); }

    [[noreturn]] void fail_at(ParseErrorKind kind, std::size_t at, const std::string& msg) const {
        throw ParseError(kind, at, msg);
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(ParseErrorKind::Syntax, std::string("expected '") + c + "'");
    }

    NodePtr parse_expr() {
        NodePtr lhs = parse_term();
        for (;;) {
            if (accept('+')) {
                lhs = make_node(Node::Kind::Add, {lhs, parse_term()});
            } else if (accept('-')) {
                lhs = make_node(Node::Kind::Sub, {lhs, parse_term()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_factor();
        for (;;) {
            if (accept('*')) {
                lhs = make_node(Node::Kind::Mul, {lhs, parse_factor()});
            } else if (accept('/')) {
                lhs = make_node(Node::Kind::Div, {lhs, parse_factor()});
            } else {
                return lhs;
            }
        }
    }

    // right-associative: a^b^c == a^(b^c)
    NodePtr parse_factor() {
        NodePtr base = parse_unary();
        if (accept('^')) return make_node(Node::Kind::Pow, {base, parse_factor()});
        return base;
    }

    NodePtr parse_unary() {
        if (accept('-')) return make_node(Node::Kind::Neg, {parse_atom()});
        return parse_atom();
    }

    NodePtr parse_atom() {
        skip_ws();
        if (pos_ == src_.size()) fail(ParseErrorKind::Syntax, "unexpected end of input");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr inner = parse_expr();
            expect(')');
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        fail(ParseErrorKind::Syntax, std::string("unexpected character '") + c + "'");
    }

    NodePtr parse_number() {
        const std::size_t start = pos_;
        auto digits = [&] {
            std::size_t n = 0;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                ++pos_;
                ++n;
            }
            return n;
        };
        std::size_t mantissa = digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            mantissa += digits();
        }
        if (mantissa == 0) fail_at(ParseErrorKind::Syntax, start, "malformed number");
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (digits() == 0) fail(ParseErrorKind::Syntax, "malformed exponent");
        }
        double value = 0.0;
        const char* first = src_.data() + start;
        const char* last = src_.data() + pos_;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
            fail_at(ParseErrorKind::Syntax, start, "number out of range");
        }
        return make_leaf(Node::Kind::Number, value);
    }

    NodePtr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
            ++pos_;
        }
        const std::string_view name = src_.substr(start, pos_ - start);

        skip_ws();
        const bool call = pos_ < src_.size() && src_[pos_] == '(';

        if (name == var_ || name == "pi") {
            if (call) fail_at(ParseErrorKind::Syntax, start, "'" + std::string(name) + "' is not a function");
            return make_leaf(name == var_ ? Node::Kind::Variable : Node::Kind::Pi);
        }
        const FuncInfo* info = find_function(name);
        if (info == nullptr) {
            fail_at(ParseErrorKind::UnknownIdentifier, start, "unknown identifier '" + std::string(name) + "'");
        }
        if (!call) fail(ParseErrorKind::Syntax, "expected '(' after function name");
        ++pos_;

        std::vector<NodePtr> args;
        args.push_back(parse_expr());
        while (accept(',')) args.push_back(parse_expr());
        expect(')');
        if (args.size() != info->arity) {
            fail_at(ParseErrorKind::Arity, start,
                    std::string(name) + " takes " + std::to_string(info->arity) + " argument(s), got " +
                        std::to_string(args.size()));
        }
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::Call;
        n->func = info->func;
        n->args = std::move(args);
        return n;
    }

    std::string_view src_;
    std::string_view var_;
    std::size_t pos_ = 0;
};

double checked(double v, const char* what) {
    if (!std::isfinite(v)) throw DomainError(std::string("non-finite result in ") + what);
    return v;
}

double eval_node(const Node& n, double x) {
    using K = Node::Kind;
    switch (n.kind) {
    case K::Number: return n.number;
    case K::Variable: return x;
    case K::Pi: return std::numbers::pi;
    case K::Neg: return -eval_node(*n.args[0], x);
    case K::Add: return checked(eval_node(*n.args[0], x) + eval_node(*n.args[1], x), "'+'");
    case K::Sub: return checked(eval_node(*n.args[0], x) - eval_node(*n.args[1], x), "'-'");
    case K::Mul: return checked(eval_node(*n.args[0], x) * eval_node(*n.args[1], x), "'*'");
    case K::Div: return checked(eval_node(*n.args[0], x) / eval_node(*n.args[1], x), "'/'");
    case K::Pow: return checked(std::pow(eval_node(*n.args[0], x), eval_node(*n.args[1], x)), "'^'");
    case K::Call: {
        const double a = eval_node(*n.args[0], x);
        switch (n.func) {
        case Func::Sin: return checked(std::sin(a), "sin");
        case Func::Cos: return checked(std::cos(a), "cos");
        case Func::Exp: return checked(std::exp(a), "exp");
        case Func::Log:
            if (a <= 0.0) throw DomainError("log of non-positive argument");
            return std::log(a);
        case Func::Sqrt:
            if (a < 0.0) throw DomainError("sqrt of negative argument");
            return std::sqrt(a);
        case Func::Abs: return std::abs(a);
        case Func::Pow: return checked(std::pow(a, eval_node(*n.args[1], x)), "pow");
        }
        break;
    }
    }
    throw DomainError("corrupt expression tree");
}

void print_node(const Node& n, const std::string& var, std::string& out) {
    using K = Node::Kind;
    auto binary = [&](const char* op) {
        out += '(';
        print_node(*n.args[0], var, out);
        out += op;
        print_node(*n.args[1], var, out);
        out += ')';
    };
    switch (n.kind) {
    case K::Number: out += format_double(n.number); return;
    case K::Variable: out += var; return;
    case K::Pi: out += "pi"; return;
    case K::Neg:
        out += "-(";
        print_node(*n.args[0], var, out);
        out += ')';
        return;
    case K::Add: binary("+"); return;
    case K::Sub: binary("-"); return;
    case K::Mul: binary("*"); return;
    case K::Div: binary("/"); return;
    case K::Pow: binary("^"); return;
    case K::Call:
        out += function_name(n.func);
        out += '(';
        for (std::size_t i = 0; i < n.args.size(); ++i) {
            if (i > 0) out += ',';
            print_node(*n.args[i], var, out);
        }
        out += ')';
        return;
    }
}

bool valid_identifier(std::string_view name) {
    if (name.empty() || !(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_')) return false;
    for (char c : name) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    }
    return name != "pi" && find_function(name) == nullptr;
}

} // namespace

bool structurally_equal(const Node& a, const Node& b) {
    if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
    if (a.kind == Node::Kind::Number && a.number != b.number) return false;
    if (a.kind == Node::Kind::Call && a.func != b.func) return false;
    for (std::size_t i = 0; i < a.args.size(); ++i) {
        if (!structurally_equal(*a.args[i], *b.args[i])) return false;
    }
    return true;
}

Expr::Expr(std::shared_ptr<const Node> root, std::string free_var, std::string source)
    : root_(std::move(root)), free_var_(std::move(free_var)), source_(std::move(source)) {}

Expr Expr::parse(std::string_view source, std::string_view free_var) {
    if (!valid_identifier(free_var)) {
        throw std::invalid_argument("invalid free variable name '" + std::string(free_var) + "'");
    }
    Parser parser(source, free_var);
    return Expr(parser.parse(), std::string(free_var), std::string(source));
}

Expr Expr::constant(double value, std::string_view free_var) {
    if (!std::isfinite(value)) throw std::invalid_argument("constant expression must be finite");
    NodePtr leaf = make_leaf(Node::Kind::Number, std::abs(value));
    if (std::signbit(value)) leaf = make_node(Node::Kind::Neg, {leaf});
    std::string text;
    print_node(*leaf, std::string(free_var), text);
    return Expr(leaf, std::string(free_var), text);
}

double Expr::eval(double value) const {
    if (!std::isfinite(value)) throw DomainError("evaluation point is not finite");
    return eval_node(*root_, value);
}

std::string Expr::to_string() const {
    std::string out;
    print_node(*root_, free_var_, out);
    return out;
}

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) return std::to_string(v);
    return std::string(buf.data(), ptr);
}

} // namespace degfrac::expr
