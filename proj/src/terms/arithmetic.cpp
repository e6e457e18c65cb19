#include "stochlog/arithmetic.hpp"

#include "stochlog/error.hpp"

namespace stochlog {

Number evaluate_arithmetic(const Term &expr, const Substitution &subst) {
    const Term t = subst.walk(expr);
    switch (t.kind()) {
    case TermKind::Number:
        return t.number_value();
    case TermKind::Variable:
        throw EvalError("arithmetic: arguments are not sufficiently instantiated");
    case TermKind::Atom:
    case TermKind::Feature:
        throw EvalError("arithmetic: " + to_string(t) + " is not a number");
    case TermKind::Compound:
        break;
    }
    const std::string &op = symbol_name(t.functor());
    if (t.arity() == 1) {
        const Number x = evaluate_arithmetic(t.arg(0), subst);
        if (op == "-")
            return -x;
        if (op == "+")
            return x;
        if (op == "abs")
            return x.sign() < 0 ? -x : x;
    } else if (t.arity() == 2) {
        const Number x = evaluate_arithmetic(t.arg(0), subst);
        const Number y = evaluate_arithmetic(t.arg(1), subst);
        if (op == "+")
            return x + y;
        if (op == "-")
            return x - y;
        if (op == "*")
            return x * y;
        if (op == "/")
            return divide(x, y);
        if (op == "//")
            return integer_divide(x, y);
        if (op == "mod")
            return modulo(x, y);
        if (op == "**")
            return power(x, y);
        if (op == "min")
            return y < x ? y : x;
        if (op == "max")
            return y > x ? y : x;
    }
    throw EvalError("arithmetic: unknown function " + symbol_name(t.functor()) + "/" + std::to_string(t.arity()));
}

} // namespace stochlog
