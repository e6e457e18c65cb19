#include "stochlog/resolution.hpp"

#include "stochlog/error.hpp"
#include "stochlog/prolog.hpp"

#include <algorithm>
#include <iostream>
#include <span>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace stochlog {

namespace {

constexpr std::uint32_t kTokenScope = 0xfffffff1u;
constexpr std::size_t kUnbounded = Program::kUnbounded;

std::size_t add_yield(std::size_t a, std::size_t b) {
    return (a == kUnbounded || b == kUnbounded) ? kUnbounded : a + b;
}

/// An answer of one call: a canonical instance of the call term, the end
/// position and the node summing its derivations.
struct CallAnswer {
    Term instance;
    std::uint32_t end;
    NodeId node;
};

/// A term together with a sequence position, as used for table and answer keys.
using PositionedTerm = std::pair<Term, std::uint32_t>;

struct PositionedTermHash {
    std::size_t operator()(const PositionedTerm &k) const { return k.first.hash() * 1000003u ^ k.second; }
};

/// Per-rule data computed once: minimum yield of every body suffix and the
/// leading terminal when it is ground.
struct RuleInfo {
    std::vector<std::size_t> suffix_min;
    bool has_first_terminal = false;
    Term first_terminal;
};

class Engine {
public:
    Engine(const Program &program, const ResolveOptions &options, std::size_t depth_limit)
        : program_(program), options_(options), depth_limit_(depth_limit),
          solver_(program.clauses(), scopes_,
                  PrologOptions{options.occurs_check, 0, options.strict_single_answer}),
          builder_(options.strategy == Strategy::SLG) {
        for (const auto &rule : program.rules()) {
            RuleInfo info;
            info.suffix_min.assign(rule.body.size() + 1, 0);
            for (std::size_t i = rule.body.size(); i-- > 0;) {
                const auto &item = rule.body[i];
                std::size_t y = 0;
                if (item.kind == BodyItem::Kind::Terminals)
                    y = item.terminals.size();
                else if (item.kind == BodyItem::Kind::Nonterminal)
                    y = program.min_yield(PredicateKey::of(item.term));
                info.suffix_min[i] = add_yield(y, info.suffix_min[i + 1]);
            }
            if (!rule.body.empty() && rule.body[0].kind == BodyItem::Kind::Terminals &&
                rule.body[0].terminals[0].is_ground()) {
                info.has_first_terminal = true;
                info.first_terminal = rule.body[0].terminals[0];
            }
            rule_info_.push_back(std::move(info));
        }
    }

    /// Derives `goal` over `tokens`; returns (answer, node) pairs spanning the whole sequence.
    std::vector<DerivedAnswer> run(const Term &goal, const std::vector<Term> &tokens) {
        if (!goal.is_callable() || !program_.is_nonterminal(PredicateKey::of(goal)))
            throw EvalError("goal " + to_string(goal) + " is not a nonterminal of the grammar");
        tokens_ = tokens;
        ground_ = std::all_of(tokens.begin(), tokens.end(), [](const Term &t) { return t.is_ground(); });
        tables_.clear();
        table_index_.clear();
        stack_.clear();
        incomplete_.clear();

        const auto n = static_cast<std::uint32_t>(tokens_.size());
        const Term call = call_term(goal, Substitution{}, tokens_, 0);
        const auto answers = call_nonterminal(call, 0, n, 0);
        std::vector<DerivedAnswer> out;
        for (const auto &a : answers) {
            if (a.end != n)
                continue;
            Substitution s;
            if (!solver_.unify(call, rename_into_scope(a.instance, scopes_.next()), s))
                continue;
            DerivedAnswer d;
            d.goal = s.apply(goal);
            for (const auto &t : tokens_)
                d.tokens.push_back(s.apply(t));
            d.node = a.node;
            out.push_back(std::move(d));
        }
        return out;
    }

    CircuitBuilder &builder() { return builder_; }
    bool truncated() const { return truncated_; }
    std::size_t nonground_neural() const { return nonground_neural_; }
    std::size_t table_count() const { return total_tables_; }

private:
    struct Answers {
        std::vector<CallAnswer> list;
        std::vector<std::vector<NodeId>> derivations;
        std::vector<std::unordered_set<NodeId>> seen;
        std::unordered_map<PositionedTerm, std::size_t, PositionedTermHash> index;

        /// Returns true when the answer is new.
        bool add(CircuitBuilder &b, bool placeholders, const Term &instance, std::uint32_t end, NodeId derivation) {
            auto [it, inserted] = index.try_emplace(PositionedTerm{instance, end}, list.size());
            if (inserted) {
                list.push_back({instance, end, placeholders ? b.placeholder() : NodeId{0}});
                derivations.emplace_back();
                seen.emplace_back();
            }
            if (seen[it->second].insert(derivation).second)
                derivations[it->second].push_back(derivation);
            return inserted;
        }
    };

    enum class Status { Evaluating, Incomplete, Complete };

    struct Table {
        Term call; // canonical
        std::uint32_t start = 0;
        Status status = Status::Evaluating;
        Answers answers;
        std::size_t stack_pos = 0;
        std::size_t leader = 0;
        bool depended_on = false;
        std::uint64_t epoch = 0;
    };

    using Sink = std::function<void(const Substitution &, std::uint32_t end, std::vector<NodeId> &kids)>;

    /// The term identifying a call: the nonterminal instance, plus the pending
    /// tokens (`segment` from position `offset` on) when they are not ground.
    Term call_term(const Term &atom, const Substitution &s, std::span<const Term> segment,
                   std::size_t offset) const {
        const Term a = s.apply(atom);
        if (ground_)
            return a;
        std::vector<Term> rest;
        for (std::size_t i = offset; i < segment.size(); ++i)
            rest.push_back(s.apply(segment[i]));
        return Term::compound("$call", {a, Term::list(rest)});
    }

    static const Term &call_atom(const Term &call, bool ground) { return ground ? call : call.arg(0); }

    std::vector<CallAnswer> call_nonterminal(const Term &call, std::uint32_t start, std::uint32_t max_end,
                                             std::size_t depth) {
        return options_.strategy == Strategy::SLD ? sld_call(call, start, max_end, depth) : slg_call(call, start);
    }

    // ---- rule application shared by both strategies ----

    void apply_rules(const Term &call, std::uint32_t start, std::uint32_t max_end, std::size_t depth,
                     const Sink &sink) {
        const Term &atom = call_atom(call, ground_);
        std::vector<Term> pending;
        std::span<const Term> segment;
        if (ground_) {
            segment = std::span<const Term>(tokens_).subspan(start);
        } else {
            call.arg(1).list_items(pending);
            segment = pending;
        }
        const RuleGroup *group = program_.group_for(PredicateKey::of(atom));
        for (std::size_t slot = 0; slot < group->rules.size(); ++slot) {
            const auto &rule = program_.rules()[group->rules[slot]];
            if (const auto &info = rule_info_[rule.index];
                info.has_first_terminal &&
                (segment.empty() || (segment[0].is_ground() && segment[0] != info.first_terminal)))
                continue;
            const std::uint32_t scope = scopes_.next();
            Substitution theta;
            if (!solver_.unify(rename_into_scope(rule.head, scope), atom, theta))
                continue;
            std::vector<NodeId> kids;
            kids.push_back(rule.weight_kind == WeightKind::Unit ? builder_.one()
                           : rule.neural ? builder_.zero()
                                         : builder_.weight_leaf({static_cast<std::uint32_t>(rule.group),
                                                                 static_cast<std::uint32_t>(rule.slot)}));
            Branch br{rule, rule_info_[rule.index], scope, start, segment, max_end, depth, sink};
            expand(br, 0, theta, start, kids, rule.neural.has_value());
        }
    }

    struct Branch {
        const StochasticRule &rule;
        const RuleInfo &info;
        std::uint32_t scope;
        std::uint32_t start;
        std::span<const Term> segment;
        std::uint32_t max_end;
        std::size_t depth;
        const Sink &sink;
    };

    void expand(const Branch &br, std::size_t i, const Substitution &theta, std::uint32_t pos,
                std::vector<NodeId> &kids, bool neural_pending) {
        if (neural_pending) {
            const auto &decl = *br.rule.neural;
            std::vector<Term> inputs;
            bool ground = true;
            for (const auto &v : decl.inputs) {
                inputs.push_back(theta.apply(Term::variable(VarId{v.name, br.scope})));
                ground = ground && inputs.back().is_ground();
            }
            if (ground) {
                const std::size_t k_size = decl.output_size();
                for (std::size_t k = 0; k < k_size; ++k) {
                    const auto values = decl.outputs_at(k);
                    Substitution s = theta;
                    bool ok = true;
                    for (std::size_t o = 0; o < decl.outputs.size() && ok; ++o)
                        ok = solver_.unify(Term::variable(VarId{decl.outputs[o].name, br.scope}), values[o], s);
                    if (!ok)
                        continue;
                    const NodeId saved = kids[0];
                    kids[0] = builder_.neural_leaf({decl.model, inputs, static_cast<std::uint32_t>(k)});
                    expand(br, i, s, pos, kids, false);
                    kids[0] = saved;
                }
                return;
            }
        }
        if (i == br.rule.body.size()) {
            if (neural_pending) {
                if (nonground_neural_++ == 0)
                    std::cerr << "warning: neural rule for " << to_string(br.rule.head)
                              << " has unbound inputs at the end of its body; branch dropped\n";
                return;
            }
            br.sink(theta, pos, kids);
            return;
        }
        const auto &item = br.rule.body[i];
        switch (item.kind) {
        case BodyItem::Kind::Terminals: {
            if (pos + item.terminals.size() > br.start + br.segment.size())
                return;
            Substitution s = theta;
            for (std::size_t j = 0; j < item.terminals.size(); ++j)
                if (!solver_.unify(rename_into_scope(item.terminals[j], br.scope), br.segment[pos - br.start + j],
                                   s))
                    return;
            expand(br, i + 1, s, pos + static_cast<std::uint32_t>(item.terminals.size()), kids, neural_pending);
            return;
        }
        case BodyItem::Kind::Goal: {
            const auto answer = solver_.solve_single(rename_into_scope(item.term, br.scope), theta);
            if (answer)
                expand(br, i + 1, *answer, pos, kids, neural_pending);
            return;
        }
        case BodyItem::Kind::Nonterminal: {
            const std::size_t rest = br.info.suffix_min[i + 1];
            if (rest == kUnbounded || pos + rest > br.max_end)
                return;
            const auto callee_max = static_cast<std::uint32_t>(br.max_end - rest);
            const Term atom = rename_into_scope(item.term, br.scope);
            const std::size_t own = program_.min_yield(PredicateKey::of(atom));
            if (own == kUnbounded || pos + own > callee_max)
                return;
            const Term call = call_term(atom, theta, br.segment, pos - br.start);
            const auto answers = call_nonterminal(call, pos, callee_max, br.depth + 1);
            for (const auto &a : answers) {
                if (a.end > callee_max)
                    continue;
                Substitution s = theta;
                if (!solver_.unify(call, rename_into_scope(a.instance, scopes_.next()), s))
                    continue;
                kids.push_back(a.node);
                expand(br, i + 1, s, a.end, kids, neural_pending);
                kids.pop_back();
            }
            return;
        }
        }
    }

    // ---- SLD: each invocation re-derives its sub-calls ----

    std::vector<CallAnswer> sld_call(const Term &call, std::uint32_t start, std::uint32_t max_end,
                                     std::size_t depth) {
        if (depth > depth_limit_) {
            truncated_ = true;
            return {};
        }
        Answers answers;
        apply_rules(call, start, max_end, depth,
                    [&](const Substitution &s, std::uint32_t end, std::vector<NodeId> &kids) {
                        const NodeId d = builder_.and_node(kids);
                        answers.add(builder_, false, canonical_variant(s.apply(call)), end, d);
                    });
        std::vector<CallAnswer> out = std::move(answers.list);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i].node = builder_.or_node(answers.derivations[i]);
        return out;
    }

    // ---- SLG: linear tabling with leader-driven fixpoint iteration ----

    void mark_dependency(std::size_t pos) {
        tables_[stack_[pos]].depended_on = true;
        for (std::size_t i = pos + 1; i < stack_.size(); ++i) {
            auto &t = tables_[stack_[i]];
            t.leader = std::min(t.leader, pos);
        }
    }

    std::vector<CallAnswer> slg_call(const Term &call, std::uint32_t start) {
        const Term canonical = canonical_variant(call);
        const PositionedTerm key{canonical, start};
        auto it = table_index_.find(key);
        if (it == table_index_.end()) {
            if (stack_.size() >= depth_limit_) {
                truncated_ = true;
                return {};
            }
            it = table_index_.emplace(key, tables_.size()).first;
            tables_.emplace_back();
            tables_.back().call = canonical;
            tables_.back().start = start;
            ++total_tables_;
            evaluate(it->second);
            return tables_[it->second].answers.list;
        }
        const std::size_t id = it->second;
        Table &t = tables_[id];
        switch (t.status) {
        case Status::Complete: return t.answers.list;
        case Status::Evaluating: mark_dependency(t.stack_pos); return t.answers.list;
        case Status::Incomplete:
            if (t.epoch == epoch_) {
                mark_dependency(t.leader);
                return t.answers.list;
            }
            if (stack_.size() >= depth_limit_) {
                truncated_ = true;
                return t.answers.list;
            }
            evaluate(id);
            return tables_[id].answers.list;
        }
        return {};
    }

    void evaluate(std::size_t id) {
        const std::size_t pos = stack_.size();
        const std::size_t pending_mark = incomplete_.size();
        {
            Table &t = tables_[id];
            t.status = Status::Evaluating;
            t.stack_pos = pos;
            t.leader = pos;
            t.depended_on = false;
            t.epoch = epoch_;
        }
        stack_.push_back(id);
        std::size_t rounds = 0;
        for (;;) {
            const std::size_t before = answers_added_;
            const Term call = rename_into_scope(tables_[id].call, scopes_.next());
            const std::uint32_t start = tables_[id].start;
            apply_rules(call, start, static_cast<std::uint32_t>(tokens_.size()), stack_.size(),
                        [&](const Substitution &s, std::uint32_t end, std::vector<NodeId> &kids) {
                            const NodeId d = builder_.and_node(kids);
                            if (tables_[id].answers.add(builder_, true, canonical_variant(s.apply(call)), end, d))
                                ++answers_added_;
                        });
            Table &t = tables_[id];
            if (t.leader < pos) {
                t.status = Status::Incomplete;
                stack_.pop_back();
                auto &parent = tables_[stack_.back()];
                parent.leader = std::min(parent.leader, t.leader);
                incomplete_.push_back(id);
                return;
            }
            if (!t.depended_on || answers_added_ == before)
                break;
            if (++rounds > depth_limit_) {
                truncated_ = true;
                break;
            }
            // A new round: incomplete tables of this component are re-evaluated once more.
            tables_[id].epoch = ++epoch_;
        }
        complete(id);
        for (std::size_t i = pending_mark; i < incomplete_.size(); ++i)
            complete(incomplete_[i]);
        incomplete_.resize(pending_mark);
        stack_.pop_back();
    }

    void complete(std::size_t id) {
        Table &t = tables_[id];
        t.status = Status::Complete;
        for (std::size_t i = 0; i < t.answers.list.size(); ++i)
            builder_.fill(t.answers.list[i].node, t.answers.derivations[i]);
    }

    const Program &program_;
    ResolveOptions options_;
    std::size_t depth_limit_;
    ScopeCounter scopes_{1};
    PrologSolver solver_;
    CircuitBuilder builder_;
    std::vector<RuleInfo> rule_info_;
    std::vector<Term> tokens_;
    bool ground_ = true;
    bool truncated_ = false;
    std::size_t nonground_neural_ = 0;

    std::vector<Table> tables_;
    std::unordered_map<PositionedTerm, std::size_t, PositionedTermHash> table_index_;
    std::vector<std::size_t> stack_;
    std::vector<std::size_t> incomplete_;
    std::uint64_t epoch_ = 0;
    std::size_t answers_added_ = 0;
    std::size_t total_tables_ = 0;
};

Forest finish_forest(Engine &engine, std::vector<DerivedAnswer> answers, std::size_t depth_limit) {
    std::vector<NodeId> nodes;
    for (const auto &a : answers)
        nodes.push_back(a.node);
    const NodeId root = engine.builder().or_node(nodes);
    Forest f;
    f.circuit = engine.builder().finish(root, nodes, engine.truncated(), depth_limit);
    for (std::size_t i = 0; i < answers.size(); ++i)
        answers[i].node = nodes[i];
    f.answers = std::move(answers);
    f.truncated = f.circuit.truncated();
    f.nonground_neural = engine.nonground_neural();
    f.tables = engine.table_count();
    return f;
}

} // namespace

std::size_t default_depth_limit(std::size_t sequence_length) { return 10 * sequence_length + 50; }

Forest derive(const Program &program, const Term &goal, const std::vector<Term> &tokens,
              const ResolveOptions &options) {
    const std::size_t limit = options.max_depth ? options.max_depth : default_depth_limit(tokens.size());
    Engine engine(program, options, limit);
    auto answers = engine.run(goal, tokens);
    return finish_forest(engine, std::move(answers), limit);
}

Forest derive_unknown_length(const Program &program, const Term &goal, std::size_t max_length,
                             const ResolveOptions &options) {
    const std::size_t limit = options.max_depth ? options.max_depth : default_depth_limit(max_length);
    Engine engine(program, options, limit);
    std::vector<DerivedAnswer> answers;
    for (std::size_t len = 0; len <= max_length; ++len) {
        std::vector<Term> tokens;
        for (std::size_t i = 0; i < len; ++i)
            tokens.push_back(Term::variable(VarId{intern("T" + std::to_string(i)), kTokenScope}));
        auto part = engine.run(goal, tokens);
        answers.insert(answers.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return finish_forest(engine, std::move(answers), limit);
}

std::string leaf_label(const Program &program, const Circuit &circuit, NodeKind kind, std::uint32_t leaf) {
    std::ostringstream out;
    if (kind == NodeKind::WeightLeaf) {
        const auto &ref = circuit.weight_leaves().at(leaf);
        const auto &group = program.groups().at(ref.group);
        const auto &rule = program.rules()[group.rules.at(ref.slot)];
        out << group.name() << "#" << ref.slot << " = " << to_string(rule.weight_term);
    } else {
        const auto &ref = circuit.neural_leaves().at(leaf);
        out << symbol_name(ref.model) << "(";
        for (std::size_t i = 0; i < ref.inputs.size(); ++i)
            out << (i ? "," : "") << to_string(ref.inputs[i]);
        out << ")[" << ref.output << "]";
    }
    return out.str();
}

} // namespace stochlog
