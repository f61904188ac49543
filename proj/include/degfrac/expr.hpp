#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Coefficient expressions: a small arithmetic language over one free variable.
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := unary ('^' factor)?
//   unary  := '-'? atom
//   atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//
// Identifiers are the free variable, the constant `pi`, and the functions
// sin, cos, exp, log, sqrt, abs (one argument) and pow (two arguments).
namespace degfrac::expr {

enum class ParseErrorKind { Syntax, UnknownIdentifier, Arity };

class ParseError : public std::runtime_error {
public:
    ParseError(ParseErrorKind kind, std::size_t offset, const std::string& message);

    ParseErrorKind kind() const noexcept { return kind_; }
    /// Byte offset into the source where the problem was detected.
    std::size_t offset() const noexcept { return offset_; }

private:
    ParseErrorKind kind_;
    std::size_t offset_;
};

/// Evaluation produced a non-finite value (log/sqrt of a negative, 0^negative, ...).
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Func { Sin, Cos, Exp, Log, Sqrt, Abs, Pow };

struct Node {
    enum class Kind { Number, Variable, Pi, Neg, Add, Sub, Mul, Div, Pow, Call };

    Kind kind = Kind::Number;
    double number = 0.0;
    Func func = Func::Sin;
    std::vector<std::shared_ptr<const Node>> args;
};

bool structurally_equal(const Node& a, const Node& b);

/// Immutable parsed expression. Copies share the tree.
class Expr {
public:
    static Expr parse(std::string_view source, std::string_view free_var);

    /// Constant expression, handy for defaults.
    static Expr constant(double value, std::string_view free_var);

    double eval(double value) const;

    /// Fully parenthesized form that parses back to the same tree.
    std::string to_string() const;

    const std::string& free_var() const noexcept { return free_var_; }
    const std::string& source() const noexcept { return source_; }
    const Node& root() const noexcept { return *root_; }

    friend bool operator==(const Expr& a, const Expr& b) {
        return a.free_var_ == b.free_var_ && structurally_equal(*a.root_, *b.root_);
    }

private:
    Expr(std::shared_ptr<const Node> root, std::string free_var, std::string source);

    std::shared_ptr<const Node> root_;
    std::string free_var_;
    std::string source_;
};

/// Shortest decimal string that reads back to the same double.
std::string format_double(double v);

} // namespace degfrac::expr
