#pragma once

#include "stochlog/term.hpp"

#include <cstddef>
#include <string_view>
#include <vector>

namespace stochlog {

struct ReadClause {
    Term term;
    std::size_t line = 0;
    std::size_t column = 0;
};

/// Reads Prolog-style clauses terminated by '.', with `%` and `/* */` comments.
/// Uppercase/underscore names are variables (scope 0, shared within a clause;
/// each `_` is distinct). Decimal literals are read as exact rationals and
/// double-quoted text as an atom. Throws ParseError with line/column.
std::vector<ReadClause> read_clauses(std::string_view source);

/// Reads a single term; a trailing '.' is optional.
Term read_term(std::string_view text);

} // namespace stochlog
