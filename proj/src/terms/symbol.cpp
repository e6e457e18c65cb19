#include "stochlog/symbol.hpp"

#include <deque>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

namespace stochlog {
namespace {

struct SymbolTable {
    std::shared_mutex mutex;
    std::deque<std::string> names; // deque keeps references stable
    std::unordered_map<std::string_view, Symbol> ids;
};

SymbolTable &table() {
    static SymbolTable instance;
    return instance;
}

} // namespace

Symbol intern(std::string_view name) {
    auto &t = table();
    {
        std::shared_lock lock(t.mutex);
        if (auto it = t.ids.find(name); it != t.ids.end())
            return it->second;
    }
    std::unique_lock lock(t.mutex);
    if (auto it = t.ids.find(name); it != t.ids.end())
        return it->second;
    const auto id = static_cast<Symbol>(t.names.size());
    t.names.emplace_back(name);
    t.ids.emplace(t.names.back(), id);
    return id;
}

const std::string &symbol_name(Symbol symbol) {
    auto &t = table();
    std::shared_lock lock(t.mutex);
    return t.names.at(symbol);
}

} // namespace stochlog
