#include "stochlog/clauses.hpp"

namespace stochlog {

void ClauseDatabase::add(Clause clause) {
    index_[PredicateKey::of(clause.head)].push_back(clauses_.size());
    clauses_.push_back(std::move(clause));
}

const std::vector<std::size_t> &ClauseDatabase::lookup(PredicateKey key) const {
    static const std::vector<std::size_t> kNone;
    const auto it = index_.find(key);
    return it == index_.end() ? kNone : it->second;
}

} // namespace stochlog
