#pragma once

#include <optional>
#include <string_view>

namespace stochlog {

enum class OpType { xfx, xfy, yfx, fy, fx };

struct OpDef {
    int priority;
    OpType type;
};

// Fixed operator table shared by the reader and the printer. There is no
// op/3 directive; grammar files use the operators listed in ops.cpp.
std::optional<OpDef> infix_operator(std::string_view name);
std::optional<OpDef> prefix_operator(std::string_view name);

} // namespace stochlog
