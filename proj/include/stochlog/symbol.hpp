#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace stochlog {

/// Interned string handle. Equal names map to equal ids for the process lifetime.
using Symbol = std::uint32_t;

Symbol intern(std::string_view name);
const std::string &symbol_name(Symbol symbol);

} // namespace stochlog
