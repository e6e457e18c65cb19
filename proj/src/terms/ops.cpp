#include "stochlog/ops.hpp"

#include <array>
#include <utility>

namespace stochlog {
namespace {

constexpr std::array<std::pair<std::string_view, OpDef>, 24> kInfix{{
    {":-", {1200, OpType::xfx}},
    {"-->", {1200, OpType::xfx}},
    {"::", {1150, OpType::xfx}},
    {";", {1100, OpType::xfy}},
    {"->", {1050, OpType::xfy}},
    {",", {1000, OpType::xfy}},
    {"=", {700, OpType::xfx}},
    {"\\=", {700, OpType::xfx}},
    {"==", {700, OpType::xfx}},
    {"\\==", {700, OpType::xfx}},
    {"is", {700, OpType::xfx}},
    {"=:=", {700, OpType::xfx}},
    {"=\\=", {700, OpType::xfx}},
    {"<", {700, OpType::xfx}},
    {">", {700, OpType::xfx}},
    {"=<", {700, OpType::xfx}},
    {">=", {700, OpType::xfx}},
    {"+", {500, OpType::yfx}},
    {"-", {500, OpType::yfx}},
    {"*", {400, OpType::yfx}},
    {"/", {400, OpType::yfx}},
    {"//", {400, OpType::yfx}},
    {"mod", {400, OpType::yfx}},
    {"**", {200, OpType::xfx}},
}};

constexpr std::array<std::pair<std::string_view, OpDef>, 3> kPrefix{{
    {"-", {200, OpType::fy}},
    {"+", {200, OpType::fy}},
    {"\\+", {900, OpType::fy}},
}};

} // namespace

std::optional<OpDef> infix_operator(std::string_view name) {
    for (const auto &[n, def] : kInfix)
        if (n == name)
            return def;
    return std::nullopt;
}

std::optional<OpDef> prefix_operator(std::string_view name) {
    for (const auto &[n, def] : kPrefix)
        if (n == name)
            return def;
    return std::nullopt;
}

} // namespace stochlog
