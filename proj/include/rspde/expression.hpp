#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rspde/errors.hpp"

namespace rspde {

/// Small arithmetic expression over named variables.  Grammar:
///   expr   := term (('+' | '-') term)*
///   term   := factor (('*' | '/') factor)*
///   factor := unary ('^' factor)?            (right associative)
///   unary  := '-' unary | primary
///   primary:= number | name | name '(' args ')' | '(' expr ')'
/// Functions: sin, cos, exp (unary), min, max (binary).  Constant: pi.
/// Unknown names, arity errors and trailing input raise ParseError with the
/// offending position.
class Expression {
public:
    static Expression parse(const std::string& text,
                            std::vector<std::string> variables);

    double operator()(std::span<const double> args) const;

    const std::string& source() const { return source_; }
    const std::vector<std::string>& variables() const { return variables_; }

    struct Node;

private:
    Expression() = default;
    std::shared_ptr<const Node> root_;
    std::string source_;
    std::vector<std::string> variables_;
};

}  // namespace rspde
