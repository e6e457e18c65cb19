#pragma once

#include "stochlog/term.hpp"

#include <unordered_map>
#include <vector>

namespace stochlog {

struct Clause {
    Term head;
    Term body; // `true` for facts
    std::size_t line = 0;
};

/// Plain definite clauses indexed by head predicate, in insertion order.
class ClauseDatabase {
public:
    void add(Clause clause);
    const std::vector<Clause> &all() const { return clauses_; }
    const std::vector<std::size_t> &lookup(PredicateKey key) const;
    bool defines(PredicateKey key) const { return index_.count(key) > 0; }
    const Clause &at(std::size_t i) const { return clauses_[i]; }

private:
    std::vector<Clause> clauses_;
    std::unordered_map<PredicateKey, std::vector<std::size_t>, PredicateKeyHash> index_;
};

} // namespace stochlog
