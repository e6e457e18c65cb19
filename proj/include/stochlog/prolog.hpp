#pragma once

#include "stochlog/clauses.hpp"
#include "stochlog/substitution.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace stochlog {

struct PrologOptions {
    bool occurs_check = true;
    /// Maximum nesting of clause resolutions; 0 means unlimited. Deeper branches
    /// fail and set the truncation flag.
    std::size_t max_depth = 0;
    /// Raise an error (rather than warn) when a goal expected to be deterministic
    /// has two distinct answers.
    bool strict_single_answer = false;
};

/// Depth-first evaluator for plain definite clauses and builtin predicates.
///
/// Builtins: true, fail, false, `,`, `;`, `->`, `\+`, `=`, `\=`, `==`, `\==`,
/// `is`, `=:=`, `=\=`, `<`, `>`, `=<`, `>=`, member/2. More can be registered.
class PrologSolver {
public:
    /// Receives each answer; returning false stops the enumeration.
    using Continuation = std::function<bool(const Substitution &)>;
    /// A builtin calls `next` once per solution and returns its verdict
    /// (false = stop), or true when it has no (more) solutions.
    using Builtin = std::function<bool(PrologSolver &, std::span<const Term> args, const Substitution &,
                                       const Continuation &next)>;

    PrologSolver(const ClauseDatabase &clauses, ScopeCounter &scopes, PrologOptions options = {});

    void register_builtin(PredicateKey key, Builtin builtin);
    bool is_builtin(PredicateKey key) const { return builtins_->count(key) > 0; }

    /// Enumerates all answers of `goal` depth-first; returns false if stopped early.
    bool solve(const Term &goal, const Substitution &in, const Continuation &k);

    /// Collects up to `limit` answers.
    std::vector<Substitution> all_answers(const Term &goal, const Substitution &in,
                                          std::size_t limit = static_cast<std::size_t>(-1));

    /// Returns the first answer of a goal assumed to have at most one. A second
    /// answer that differs on the goal's variables is reported as a warning, or as
    /// an EvalError in strict mode.
    std::optional<Substitution> solve_single(const Term &goal, const Substitution &in);

    bool truncated() const { return truncated_; }
    const PrologOptions &options() const { return options_; }
    bool unify(const Term &a, const Term &b, Substitution &s) const {
        return unify_into(a, b, s, UnifyOptions{options_.occurs_check});
    }

private:
    struct GoalCell;
    using GoalList = std::shared_ptr<const GoalCell>;

    bool run(const GoalList &goals, const Substitution &s, const Continuation &k);
    PrologSolver(const ClauseDatabase &clauses, ScopeCounter &scopes, PrologOptions options, std::nullptr_t);
    void install_defaults();

    const ClauseDatabase &clauses_;
    ScopeCounter &scopes_;
    PrologOptions options_;
    // Shared with every other solver until a builtin is registered here.
    std::shared_ptr<std::unordered_map<PredicateKey, Builtin, PredicateKeyHash>> builtins_;
    bool truncated_ = false;
};

} // namespace stochlog
