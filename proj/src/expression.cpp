#include "rspde/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <utility>

namespace rspde {

struct Expression::Node {
    enum class Kind {
        Constant,
        Variable,
        Negate,
        Add,
        Sub,
        Mul,
        Div,
        Pow,
        Sin,
        Cos,
        Exp,
        Min,
        Max
    };

    Kind kind;
    double value = 0.0;
    std::size_t var = 0;
    std::shared_ptr<const Node> a;
    std::shared_ptr<const Node> b;

    double eval(std::span<const double> args) const {
        switch (kind) {
            case Kind::Constant: return value;
            case Kind::Variable: return args[var];
            case Kind::Negate: return -a->eval(args);
            case Kind::Add: return a->eval(args) + b->eval(args);
            case Kind::Sub: return a->eval(args) - b->eval(args);
            case Kind::Mul: return a->eval(args) * b->eval(args);
            case Kind::Div: return a->eval(args) / b->eval(args);
            case Kind::Pow: return std::pow(a->eval(args), b->eval(args));
            case Kind::Sin: return std::sin(a->eval(args));
            case Kind::Cos: return std::cos(a->eval(args));
            case Kind::Exp: return std::exp(a->eval(args));
            case Kind::Min: return std::min(a->eval(args), b->eval(args));
            case Kind::Max: return std::max(a->eval(args), b->eval(args));
        }
        return 0.0;
    }
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make_const(double v) {
    Node n{Node::Kind::Constant};
    n.value = v;
    return std::make_shared<const Node>(std::move(n));
}

NodePtr make_var(std::size_t idx) {
    Node n{Node::Kind::Variable};
    n.var = idx;
    return std::make_shared<const Node>(std::move(n));
}

NodePtr make_unary(Node::Kind k, NodePtr a) {
    Node n{k};
    n.a = std::move(a);
    return std::make_shared<const Node>(std::move(n));
}

NodePtr make_binary(Node::Kind k, NodePtr a, NodePtr b) {
    Node n{k};
    n.a = std::move(a);
    n.b = std::move(b);
    return std::make_shared<const Node>(std::move(n));
}

class Parser {
public:
    Parser(const std::string& text, const std::vector<std::string>& variables)
        : text_(text), variables_(variables) {}

    NodePtr run() {
        NodePtr e = expr();
        skip_space();
        if (pos_ != text_.size())
            throw ParseError("expression: trailing input at position " +
                                 std::to_string(pos_),
                             pos_);
        return e;
    }

private:
    const std::string& text_;
    const std::vector<std::string>& variables_;
    std::size_t pos_ = 0;

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    bool consume(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_space();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (consume('+'))
                lhs = make_binary(Node::Kind::Add, lhs, term());
            else if (consume('-'))
                lhs = make_binary(Node::Kind::Sub, lhs, term());
            else
                return lhs;
        }
    }

    NodePtr term() {
        NodePtr lhs = factor();
        for (;;) {
            if (consume('*'))
                lhs = make_binary(Node::Kind::Mul, lhs, factor());
            else if (consume('/'))
                lhs = make_binary(Node::Kind::Div, lhs, factor());
            else
                return lhs;
        }
    }

    // Unary minus binds looser than '^' (-x^2 is -(x^2)) while an exponent
    // may still carry its own sign (2^-2).
    NodePtr factor() {
        if (consume('-')) return make_unary(Node::Kind::Negate, factor());
        return power();
    }

    NodePtr power() {
        NodePtr base = primary();
        if (consume('^')) return make_binary(Node::Kind::Pow, base, factor());
        return base;
    }

    NodePtr primary() {
        skip_space();
        if (pos_ >= text_.size())
            throw ParseError("expression: unexpected end of input", pos_);
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
        if (consume('(')) {
            NodePtr e = expr();
            if (!consume(')'))
                throw ParseError("expression: expected ')' at position " +
                                     std::to_string(pos_),
                                 pos_);
            return e;
        }
        throw ParseError("expression: unexpected character '" + std::string(1, c) +
                             "' at position " + std::to_string(pos_),
                         pos_);
    }

    NodePtr number() {
        const char* begin = text_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin)
            throw ParseError("expression: malformed number at position " +
                                 std::to_string(pos_),
                             pos_);
        pos_ += static_cast<std::size_t>(end - begin);
        return make_const(v);
    }

    NodePtr name() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                text_[pos_] == '_'))
            ++pos_;
        const std::string id = text_.substr(start, pos_ - start);

        if (peek() == '(') {
            consume('(');
            std::vector<NodePtr> args;
            args.push_back(expr());
            while (consume(',')) args.push_back(expr());
            if (!consume(')'))
                throw ParseError("expression: expected ')' at position " +
                                     std::to_string(pos_),
                                 pos_);
            return call(id, std::move(args), start);
        }

        if (id == "pi") return make_const(3.14159265358979323846);
        for (std::size_t i = 0; i < variables_.size(); ++i)
            if (variables_[i] == id) return make_var(i);
        throw ParseError("expression: unknown name '" + id + "' at position " +
                             std::to_string(start),
                         start);
    }

    NodePtr call(const std::string& id, std::vector<NodePtr> args,
                 std::size_t at) {
        auto want = [&](std::size_t n) {
            if (args.size() != n)
                throw ParseError("expression: '" + id + "' takes " +
                                     std::to_string(n) + " argument(s)",
                                 at);
        };
        if (id == "sin") {
            want(1);
            return make_unary(Node::Kind::Sin, args[0]);
        }
        if (id == "cos") {
            want(1);
            return make_unary(Node::Kind::Cos, args[0]);
        }
        if (id == "exp") {
            want(1);
            return make_unary(Node::Kind::Exp, args[0]);
        }
        if (id == "min") {
            want(2);
            return make_binary(Node::Kind::Min, args[0], args[1]);
        }
        if (id == "max") {
            want(2);
            return make_binary(Node::Kind::Max, args[0], args[1]);
        }
        throw ParseError("expression: unknown function '" + id + "'", at);
    }
};

}  // namespace

Expression Expression::parse(const std::string& text,
                             std::vector<std::string> variables) {
    Expression e;
    e.source_ = text;
    e.variables_ = std::move(variables);
    Parser parser(text, e.variables_);
    e.root_ = parser.run();
    return e;
}

double Expression::operator()(std::span<const double> args) const {
    if (args.size() != variables_.size())
        throw ValidationError("expression: expected " +
                              std::to_string(variables_.size()) + " arguments, got " +
                              std::to_string(args.size()));
    return root_->eval(args);
}

}  // namespace rspde
