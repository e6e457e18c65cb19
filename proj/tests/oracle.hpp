#pragma once

// Naive recursive derivation enumerator: no forest, no tabling, no sharing.
// Each successful derivation is reported with its answer and its multiset of
// leaf labels, so circuits can be compared against it expansion by expansion.

#include "stochlog/circuit.hpp"
#include "stochlog/program.hpp"
#include "stochlog/prolog.hpp"

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

namespace stochlog::testing {

struct OracleDerivation {
    Term answer;
    std::vector<std::string> leaves; // sorted
    friend bool operator<(const OracleDerivation &a, const OracleDerivation &b) {
        const auto sa = to_string(a.answer), sb = to_string(b.answer);
        return sa != sb ? sa < sb : a.leaves < b.leaves;
    }
    friend bool operator==(const OracleDerivation &a, const OracleDerivation &b) {
        return to_string(a.answer) == to_string(b.answer) && a.leaves == b.leaves;
    }
};

inline std::string weight_label(std::size_t group, std::size_t slot) {
    return "w:" + std::to_string(group) + "/" + std::to_string(slot);
}

inline std::string neural_label(Symbol model, const std::vector<Term> &inputs, std::size_t k) {
    std::string s = "nn:" + symbol_name(model) + "(";
    for (std::size_t i = 0; i < inputs.size(); ++i)
        s += (i ? "," : "") + to_string(inputs[i]);
    return s + ")[" + std::to_string(k) + "]";
}

inline std::string circuit_leaf_label(const Circuit &c, const TraceStep &step) {
    if (step.kind == NodeKind::WeightLeaf) {
        const auto &w = c.weight_leaves()[step.leaf];
        return weight_label(w.group, w.slot);
    }
    const auto &n = c.neural_leaves()[step.leaf];
    return neural_label(n.model, n.inputs, n.output);
}

class BruteForceEnumerator {
public:
    BruteForceEnumerator(const Program &program, std::vector<Term> tokens, std::size_t depth_limit)
        : program_(program), tokens_(std::move(tokens)), depth_limit_(depth_limit),
          solver_(program.clauses(), scopes_) {}

    std::vector<OracleDerivation> run(const Term &goal) {
        std::vector<OracleDerivation> out;
        std::vector<std::string> leaves;
        nonterminal(goal, 0, 0, 0, Substitution{}, leaves,
                    [&](const Substitution &s, std::size_t pos, std::vector<std::string> &ls) {
                        if (pos != tokens_.size())
                            return;
                        auto sorted = ls;
                        std::sort(sorted.begin(), sorted.end());
                        out.push_back({s.apply(goal), std::move(sorted)});
                    });
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    using K = std::function<void(const Substitution &, std::size_t, std::vector<std::string> &)>;

    std::size_t yield_of(const BodyItem &item) const {
        if (item.kind == BodyItem::Kind::Terminals)
            return item.terminals.size();
        if (item.kind == BodyItem::Kind::Goal)
            return 0;
        return program_.min_yield(PredicateKey::of(item.term));
    }

    void nonterminal(const Term &atom, std::size_t pos, std::size_t reserved, std::size_t depth,
                     const Substitution &theta, std::vector<std::string> &leaves, const K &k) {
        if (depth > depth_limit_)
            return;
        const Term a = theta.apply(atom);
        const std::size_t y = program_.min_yield(PredicateKey::of(a));
        if (y == Program::kUnbounded || pos + y + reserved > tokens_.size())
            return;
        const RuleGroup *group = program_.group_for(PredicateKey::of(a));
        for (std::size_t slot = 0; slot < group->rules.size(); ++slot) {
            const auto &rule = program_.rules()[group->rules[slot]];
            if (!rule.body.empty() && rule.body[0].kind == BodyItem::Kind::Terminals &&
                rule.body[0].terminals[0].is_ground() &&
                (pos >= tokens_.size() || (tokens_[pos].is_ground() && tokens_[pos] != rule.body[0].terminals[0])))
                continue;
            const std::uint32_t scope = scopes_.next();
            Substitution s = theta;
            if (!solver_.unify(rename_into_scope(rule.head, scope), a, s))
                continue;
            const bool weighted = rule.weight_kind == WeightKind::Fixed || rule.weight_kind == WeightKind::Trainable;
            if (weighted)
                leaves.push_back(weight_label(rule.group, rule.slot));
            body(rule, scope, 0, pos, reserved, depth, s, rule.neural.has_value(), leaves, k);
            if (weighted)
                leaves.pop_back();
        }
    }

    void body(const StochasticRule &rule, std::uint32_t scope, std::size_t i, std::size_t pos, std::size_t reserved,
              std::size_t depth, const Substitution &theta, bool pending, std::vector<std::string> &leaves,
              const K &k) {
        if (pending) {
            const auto &d = *rule.neural;
            std::vector<Term> inputs;
            bool ground = true;
            for (const auto &v : d.inputs) {
                inputs.push_back(theta.apply(Term::variable(VarId{v.name, scope})));
                ground = ground && inputs.back().is_ground();
            }
            if (ground) {
                for (std::size_t o = 0; o < d.output_size(); ++o) {
                    Substitution s = theta;
                    const auto values = d.outputs_at(o);
                    bool ok = true;
                    for (std::size_t j = 0; j < values.size() && ok; ++j)
                        ok = solver_.unify(Term::variable(VarId{d.outputs[j].name, scope}), values[j], s);
                    if (!ok)
                        continue;
                    leaves.push_back(neural_label(d.model, inputs, o));
                    body(rule, scope, i, pos, reserved, depth, s, false, leaves, k);
                    leaves.pop_back();
                }
                return;
            }
        }
        if (i == rule.body.size()) {
            if (!pending)
                k(theta, pos, leaves);
            return;
        }
        const auto &item = rule.body[i];
        if (item.kind == BodyItem::Kind::Terminals) {
            Substitution s = theta;
            for (std::size_t j = 0; j < item.terminals.size(); ++j)
                if (pos + j >= tokens_.size() ||
                    !solver_.unify(rename_into_scope(item.terminals[j], scope), tokens_[pos + j], s))
                    return;
            body(rule, scope, i + 1, pos + item.terminals.size(), reserved, depth, s, pending, leaves, k);
        } else if (item.kind == BodyItem::Kind::Goal) {
            if (auto s = solver_.solve_single(rename_into_scope(item.term, scope), theta))
                body(rule, scope, i + 1, pos, reserved, depth, *s, pending, leaves, k);
        } else {
            std::size_t after = reserved;
            for (std::size_t j = i + 1; j < rule.body.size(); ++j) {
                const std::size_t y = yield_of(rule.body[j]);
                if (y == Program::kUnbounded)
                    return;
                after += y;
            }
            nonterminal(rename_into_scope(item.term, scope), pos, after, depth + 1, theta, leaves,
                        [&](const Substitution &s, std::size_t end, std::vector<std::string> &ls) {
                            body(rule, scope, i + 1, end, reserved, depth, s, pending, ls, k);
                        });
        }
    }

    const Program &program_;
    std::vector<Term> tokens_;
    std::size_t depth_limit_;
    ScopeCounter scopes_{1};
    PrologSolver solver_;
};

/// Root expansions of a forest-style circuit in the oracle's format; `answers`
/// pairs each answer term with its node.
inline std::vector<OracleDerivation>
circuit_derivations(const Circuit &c, const std::vector<std::pair<Term, NodeId>> &answers) {
    std::vector<OracleDerivation> out;
    for (const auto &[answer, node] : answers) {
        std::function<std::vector<std::vector<std::string>>(NodeId)> walk = [&](NodeId id) {
            std::vector<std::vector<std::string>> res;
            const auto &n = c.node(id);
            const auto kids = c.children(id);
            switch (n.kind) {
            case NodeKind::WeightLeaf:
            case NodeKind::NeuralLeaf: res.push_back({circuit_leaf_label(c, TraceStep{n.kind, n.leaf})}); break;
            case NodeKind::One: res.emplace_back(); break;
            case NodeKind::Zero: break;
            case NodeKind::Or:
                for (NodeId k : kids) {
                    auto sub = walk(k);
                    res.insert(res.end(), sub.begin(), sub.end());
                }
                break;
            case NodeKind::And:
                res.emplace_back();
                for (NodeId k : kids) {
                    const auto sub = walk(k);
                    std::vector<std::vector<std::string>> next;
                    for (const auto &a : res)
                        for (const auto &b : sub) {
                            auto m = a;
                            m.insert(m.end(), b.begin(), b.end());
                            next.push_back(std::move(m));
                        }
                    res = std::move(next);
                }
                break;
            }
            return res;
        };
        for (auto &leaves : walk(node)) {
            std::sort(leaves.begin(), leaves.end());
            out.push_back({answer, std::move(leaves)});
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace stochlog::testing
