#pragma once

#include "stochlog/clauses.hpp"
#include "stochlog/term.hpp"

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace stochlog {

enum class WeightKind {
    Fixed,     // constant probability, e.g. `0.5 ::`
    Trainable, // softmax-normalized logit, group marked with `t` / `t(_)`
    Neural,    // probability supplied by a model, `nn(m,[I],[O],[D]) ::`
    Unit,      // weight omitted on a singleton group
};

struct NeuralDeclaration {
    Symbol model = 0;
    std::vector<VarId> inputs;
    std::vector<VarId> outputs;
    std::vector<Symbol> domain_predicates;
    /// Ground values of each output domain, in fact order.
    std::vector<std::vector<Term>> domains;

    /// Size of the flattened (row-major) cross product of the output domains.
    std::size_t output_size() const;
    /// Output values for flattened index `k`.
    std::vector<Term> outputs_at(std::size_t k) const;
    /// Flattened index of ground output values, or nullopt if outside the domains.
    std::optional<std::size_t> index_of(const std::vector<Term> &values) const;
};

struct BodyItem {
    enum class Kind { Nonterminal, Terminals, Goal };
    Kind kind = Kind::Nonterminal;
    Term term;                  // the nonterminal atom or the `{...}` goal
    std::vector<Term> terminals; // for Kind::Terminals
};

struct StochasticRule {
    std::size_t index = 0; // position in Program::rules(), i.e. source order
    std::size_t group = 0;
    std::size_t slot = 0; // position inside its group
    WeightKind weight_kind = WeightKind::Unit;
    Term weight_term;      // as written; `1` for Unit
    double probability = 1.0; // Fixed and Unit only
    std::optional<NeuralDeclaration> neural;
    Term head;
    std::vector<BodyItem> body;
    std::size_t line = 0;
};

enum class GroupKind { Fixed, Trainable, Neural, Unit };

/// All rules sharing one head predicate/arity.
struct RuleGroup {
    PredicateKey key;
    GroupKind kind = GroupKind::Fixed;
    std::vector<std::size_t> rules;
    std::string name() const { return key.to_string(); }
};

/// A validated grammar program. Immutable after parsing.
class Program {
public:
    static constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

    /// Parses and validates a grammar source; throws ParseError or ProgramError.
    static Program parse(std::string_view source);

    const std::vector<StochasticRule> &rules() const { return rules_; }
    const std::vector<RuleGroup> &groups() const { return groups_; }
    const ClauseDatabase &clauses() const { return clauses_; }

    const RuleGroup *group_for(PredicateKey key) const;
    bool is_nonterminal(PredicateKey key) const { return group_for(key) != nullptr; }

    /// Distinct model names used by neural rules, in first-use order.
    const std::vector<Symbol> &models() const { return models_; }
    /// Output size K of a model (consistent across its declarations).
    std::size_t model_output_size(Symbol model) const;

    /// Lower bound on the number of terminals any derivation of `key` consumes
    /// (kUnbounded when the nonterminal derives nothing).
    std::size_t min_yield(PredicateKey key) const;

    /// Source-order listing of clauses and rules in grammar syntax.
    std::string pretty_print() const;

    /// Source order of clauses and rules as (is_rule, index) pairs.
    const std::vector<std::pair<bool, std::size_t>> &source_order() const { return order_; }

private:
    std::vector<StochasticRule> rules_;
    std::vector<RuleGroup> groups_;
    std::unordered_map<PredicateKey, std::size_t, PredicateKeyHash> group_index_;
    ClauseDatabase clauses_;
    std::vector<Symbol> models_;
    std::map<Symbol, std::size_t> model_sizes_;
    std::unordered_map<PredicateKey, std::size_t, PredicateKeyHash> min_yield_;
    std::vector<std::pair<bool, std::size_t>> order_;

    friend class ProgramBuilder;
};

std::string rule_to_string(const StochasticRule &rule);

/// A grammar rule rewritten as a definite clause with difference-list arguments.
struct TranslatedClause {
    Term head;
    std::vector<Term> body; // ends with the p(...) or nn(...) sentinel literal(s)
    Term as_term() const;   // head :- body
    std::string to_string() const;
};

/// Difference-list translation of every rule; plain clauses are passed through
/// unchanged. Output follows source order.
std::vector<TranslatedClause> translate(const Program &program);

/// Evaluates a ground arithmetic weight expression such as `1/3` or `0.25`.
Number evaluate_constant(const Term &expr);

} // namespace stochlog
