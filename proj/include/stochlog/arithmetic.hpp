#pragma once

#include "stochlog/substitution.hpp"

namespace stochlog {

/// Evaluates an arithmetic expression (`+ - * / // mod **`, unary minus, `abs`,
/// `min`, `max`) under `subst`. Division is exact. Throws EvalError on unbound
/// variables, non-numeric operands and division by zero.
Number evaluate_arithmetic(const Term &expr, const Substitution &subst = {});

} // namespace stochlog
