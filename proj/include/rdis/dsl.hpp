#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "rdis/expr.hpp"

namespace rdis {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, int line, int column);
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

/// Parses the line-oriented problem format:
///
///     # comment
///     var x in [-1, 1]
///     var r in [0, inf]
///     term (x - 1)^2 + sin(x) * r
///
/// One declaration or term per line. `^` takes an integer exponent and binds
/// tighter than unary minus. Variables must be declared before use.
ObjectiveFunction parse_problem(std::string_view text);

/// Inverse of parse_problem. Every binary operation is parenthesized and
/// constants are printed with round-trip precision, so re-parsing yields a
/// structurally identical function for tree-shaped terms. A nonzero offset is
/// written as a constant term.
std::string to_dsl(const ObjectiveFunction& f);

std::string expr_to_string(const Expr& e, const ObjectiveFunction& f);

}  // namespace rdis
