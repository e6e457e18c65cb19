#include "stochlog/program.hpp"

#include "stochlog/arithmetic.hpp"
#include "stochlog/error.hpp"
#include "stochlog/prolog.hpp"
#include "stochlog/reader.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace stochlog {

std::size_t NeuralDeclaration::output_size() const {
    std::size_t k = 1;
    for (const auto &d : domains)
        k *= d.size();
    return k;
}

std::vector<Term> NeuralDeclaration::outputs_at(std::size_t k) const {
    std::vector<Term> values(domains.size());
    for (std::size_t i = domains.size(); i-- > 0;) {
        values[i] = domains[i][k % domains[i].size()];
        k /= domains[i].size();
    }
    return values;
}

std::optional<std::size_t> NeuralDeclaration::index_of(const std::vector<Term> &values) const {
    std::size_t k = 0;
    for (std::size_t i = 0; i < domains.size(); ++i) {
        const auto it = std::find(domains[i].begin(), domains[i].end(), values[i]);
        if (it == domains[i].end())
            return std::nullopt;
        k = k * domains[i].size() + static_cast<std::size_t>(it - domains[i].begin());
    }
    return k;
}

Number evaluate_constant(const Term &expr) {
    if (!expr.is_ground())
        throw EvalError("weight " + to_string(expr) + " is not ground");
    return evaluate_arithmetic(expr);
}

const RuleGroup *Program::group_for(PredicateKey key) const {
    const auto it = group_index_.find(key);
    return it == group_index_.end() ? nullptr : &groups_[it->second];
}

std::size_t Program::model_output_size(Symbol model) const {
    const auto it = model_sizes_.find(model);
    if (it == model_sizes_.end())
        throw ModelError("unknown model " + symbol_name(model));
    return it->second;
}

std::size_t Program::min_yield(PredicateKey key) const {
    const auto it = min_yield_.find(key);
    return it == min_yield_.end() ? kUnbounded : it->second;
}

namespace {

const Symbol kArrowDcg = intern("-->");
const Symbol kNeck = intern(":-");
const Symbol kWeightOp = intern("::");
const Symbol kComma = intern(",");
const Symbol kCurly = intern("{}");
const Symbol kNn = intern("nn");
const Symbol kT = intern("t");
const Symbol kTrue = intern("true");

[[noreturn]] void fail_at(std::size_t line, const std::string &msg) {
    throw ProgramError("line " + std::to_string(line) + ": " + msg);
}

void flatten_conjunction(const Term &t, std::vector<Term> &out) {
    if (t.is_compound() && t.functor() == kComma && t.arity() == 2) {
        flatten_conjunction(t.arg(0), out);
        flatten_conjunction(t.arg(1), out);
    } else {
        out.push_back(t);
    }
}

Term conjunction(const std::vector<Term> &items) {
    if (items.empty())
        return Term::atom(kTrue);
    Term t = items.back();
    for (std::size_t i = items.size() - 1; i-- > 0;)
        t = Term::compound(kComma, {items[i], t});
    return t;
}

std::vector<BodyItem> parse_body(const Term &body, std::size_t line) {
    std::vector<Term> parts;
    flatten_conjunction(body, parts);
    std::vector<BodyItem> items;
    for (const Term &part : parts) {
        BodyItem item;
        if (part.is_nil() || (part.is_atom() && part.functor() == kCurly))
            continue;
        if (part.is_cons()) {
            Term tail;
            if (!part.list_items(item.terminals, &tail) || !tail.is_nil())
                fail_at(line, "terminal list " + to_string(part) + " is not a proper list");
            item.kind = BodyItem::Kind::Terminals;
            item.term = part;
        } else if (part.is_compound() && part.functor() == kCurly && part.arity() == 1) {
            item.kind = BodyItem::Kind::Goal;
            item.term = part.arg(0);
        } else if (part.is_variable()) {
            fail_at(line, "variable " + to_string(part) + " used as a grammar body item");
        } else if (!part.is_callable()) {
            fail_at(line, "body item " + to_string(part) + " is not callable");
        } else {
            const std::string &name = symbol_name(part.functor());
            if (name == "!" || name == ";" || name == "->" || name == "\\+" || name == "|")
                fail_at(line, "control construct '" + name + "' is not supported in grammar bodies");
            item.kind = BodyItem::Kind::Nonterminal;
            item.term = part;
        }
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<Term> proper_list(const Term &t, std::size_t line, const std::string &what) {
    std::vector<Term> items;
    Term tail;
    if (!(t.is_nil() || t.is_cons()) || !t.list_items(items, &tail) || !tail.is_nil())
        fail_at(line, what + " must be a list, got " + to_string(t));
    return items;
}

NeuralDeclaration parse_neural(const Term &w, std::size_t line) {
    NeuralDeclaration d;
    if (!w.arg(0).is_atom())
        fail_at(line, "neural model name must be an atom, got " + to_string(w.arg(0)));
    d.model = w.arg(0).functor();
    for (const Term &v : proper_list(w.arg(1), line, "neural inputs")) {
        if (!v.is_variable())
            fail_at(line, "neural input " + to_string(v) + " is not a variable");
        d.inputs.push_back(v.var_id());
    }
    for (const Term &v : proper_list(w.arg(2), line, "neural outputs")) {
        if (!v.is_variable())
            fail_at(line, "neural output " + to_string(v) + " is not a variable");
        d.outputs.push_back(v.var_id());
    }
    for (const Term &p : proper_list(w.arg(3), line, "neural domains")) {
        if (!p.is_atom())
            fail_at(line, "domain " + to_string(p) + " is not a predicate name");
        d.domain_predicates.push_back(p.functor());
    }
    if (d.outputs.empty())
        fail_at(line, "neural declaration for " + symbol_name(d.model) + " has no outputs");
    if (d.outputs.size() != d.domain_predicates.size())
        fail_at(line, "neural declaration for " + symbol_name(d.model) + " lists " +
                          std::to_string(d.outputs.size()) + " outputs but " +
                          std::to_string(d.domain_predicates.size()) + " domains");
    return d;
}

StochasticRule parse_rule(const Term &t, std::size_t line) {
    StochasticRule rule;
    rule.line = line;
    Term lhs = t.arg(0);
    std::optional<Term> weight;
    if (lhs.is_compound() && lhs.functor() == kWeightOp && lhs.arity() == 2) {
        weight = lhs.arg(0);
        lhs = lhs.arg(1);
    }
    if (!lhs.is_callable() || lhs.is_cons() || lhs.is_nil())
        fail_at(line, "rule head " + to_string(lhs) + " is not a nonterminal");
    if (lhs.functor() == kComma)
        fail_at(line, "pushback lists in rule heads are not supported");
    rule.head = lhs;
    rule.body = parse_body(t.arg(1), line);

    if (!weight) {
        rule.weight_kind = WeightKind::Unit;
        rule.weight_term = Term::integer(1);
        return rule;
    }
    const Term &w = *weight;
    rule.weight_term = w;
    if (w.is_compound() && w.functor() == kNn && w.arity() == 4) {
        rule.weight_kind = WeightKind::Neural;
        rule.neural = parse_neural(w, line);
        std::vector<VarId> vars;
        collect_variables(rule.head, vars);
        for (const auto &item : rule.body)
            collect_variables(item.term, vars);
        auto present = [&](VarId v) { return std::find(vars.begin(), vars.end(), v) != vars.end(); };
        for (const auto &v : rule.neural->inputs)
            if (!present(v))
                fail_at(line, "neural declaration references variable " + symbol_name(v.name) +
                                  " absent from its rule");
        for (const auto &v : rule.neural->outputs)
            if (!present(v))
                fail_at(line, "neural declaration references variable " + symbol_name(v.name) +
                                  " absent from its rule");
        return rule;
    }
    if ((w.is_atom() && w.functor() == kT) || (w.is_compound() && w.functor() == kT && w.arity() == 1)) {
        rule.weight_kind = WeightKind::Trainable;
        return rule;
    }
    Number value;
    try {
        value = evaluate_constant(w);
    } catch (const EvalError &e) {
        fail_at(line, "invalid rule weight " + to_string(w) + ": " + e.what());
    }
    if (value.sign() < 0 || value > Number(1))
        fail_at(line, "rule weight " + to_string(w) + " is outside [0,1]");
    rule.weight_kind = WeightKind::Fixed;
    rule.probability = value.to_double();
    return rule;
}

} // namespace

class ProgramBuilder {
public:
    static Program build(std::string_view source) {
        Program p;
        std::vector<Number> exact_weights;
        for (const ReadClause &rc : read_clauses(source)) {
            const Term &t = rc.term;
            if (t.is_compound() && t.functor() == kArrowDcg && t.arity() == 2) {
                StochasticRule rule = parse_rule(t, rc.line);
                rule.index = p.rules_.size();
                exact_weights.push_back(rule.weight_kind == WeightKind::Fixed ? evaluate_constant(rule.weight_term)
                                                                              : Number(1));
                p.order_.emplace_back(true, p.rules_.size());
                p.rules_.push_back(std::move(rule));
            } else if (t.is_compound() && t.functor() == kNeck && t.arity() == 2) {
                if (!t.arg(0).is_callable())
                    fail_at(rc.line, "clause head " + to_string(t.arg(0)) + " is not callable");
                p.order_.emplace_back(false, p.clauses_.all().size());
                p.clauses_.add(Clause{t.arg(0), t.arg(1), rc.line});
            } else if (t.is_compound() && t.functor() == kNeck && t.arity() == 1) {
                fail_at(rc.line, "directives are not supported");
            } else if (t.is_callable()) {
                if (t.functor() == kWeightOp)
                    fail_at(rc.line, "weighted item " + to_string(t) + " is not a grammar rule");
                p.order_.emplace_back(false, p.clauses_.all().size());
                p.clauses_.add(Clause{t, Term::atom(kTrue), rc.line});
            } else {
                fail_at(rc.line, "clause " + to_string(t) + " is not callable");
            }
        }

        group_rules(p);
        classify_groups(p, exact_weights);
        check_definitions(p);
        resolve_domains(p);
        compute_min_yield(p);
        return p;
    }

private:
    static void group_rules(Program &p) {
        for (auto &rule : p.rules_) {
            const PredicateKey key = PredicateKey::of(rule.head);
            auto [it, inserted] = p.group_index_.emplace(key, p.groups_.size());
            if (inserted)
                p.groups_.push_back(RuleGroup{key, GroupKind::Fixed, {}});
            RuleGroup &g = p.groups_[it->second];
            rule.group = it->second;
            rule.slot = g.rules.size();
            g.rules.push_back(rule.index);
        }
    }

    static void classify_groups(Program &p, const std::vector<Number> &exact_weights) {
        for (auto &g : p.groups_) {
            std::size_t neural = 0, trainable = 0, unit = 0;
            for (const auto r : g.rules) {
                switch (p.rules_[r].weight_kind) {
                case WeightKind::Neural: ++neural; break;
                case WeightKind::Trainable: ++trainable; break;
                case WeightKind::Unit: ++unit; break;
                case WeightKind::Fixed: break;
                }
            }
            const std::size_t first_line = p.rules_[g.rules.front()].line;
            if (neural > 0) {
                if (g.rules.size() != 1)
                    fail_at(first_line, "nonterminal " + g.name() +
                                            " mixes a neural rule with other rules; a neural rule must be the only "
                                            "rule of its nonterminal");
                g.kind = GroupKind::Neural;
            } else if (trainable > 0) {
                g.kind = GroupKind::Trainable;
                for (const auto r : g.rules)
                    p.rules_[r].weight_kind = WeightKind::Trainable;
            } else if (unit > 0) {
                if (g.rules.size() != 1)
                    fail_at(p.rules_[g.rules[0]].line,
                            "nonterminal " + g.name() + " has several rules, so every rule needs a weight");
                g.kind = GroupKind::Unit;
            } else {
                g.kind = GroupKind::Fixed;
                Number sum;
                for (const auto r : g.rules)
                    sum = sum + exact_weights[r];
                if (std::abs(sum.to_double() - 1.0) > 1e-9)
                    fail_at(first_line, "weights of nonterminal " + g.name() + " sum to " + sum.to_string() +
                                            ", not 1");
            }
        }
    }

    static void check_definitions(const Program &p) {
        for (const auto &c : p.clauses_.all()) {
            const PredicateKey key = PredicateKey::of(c.head);
            if (p.group_index_.count(key))
                fail_at(c.line, "predicate " + key.to_string() + " is defined by both grammar rules and clauses");
        }
        for (const auto &rule : p.rules_)
            for (const auto &item : rule.body)
                if (item.kind == BodyItem::Kind::Nonterminal && !p.group_index_.count(PredicateKey::of(item.term)))
                    fail_at(rule.line, "undefined nonterminal " + PredicateKey::of(item.term).to_string());
    }

    static void resolve_domains(Program &p) {
        ScopeCounter scopes;
        PrologSolver solver(p.clauses_, scopes);
        std::map<Symbol, std::vector<Term>> cache;
        for (auto &rule : p.rules_) {
            if (!rule.neural)
                continue;
            NeuralDeclaration &d = *rule.neural;
            for (const Symbol pred : d.domain_predicates) {
                auto it = cache.find(pred);
                if (it == cache.end())
                    it = cache.emplace(pred, enumerate_domain(p, solver, pred, rule.line)).first;
                d.domains.push_back(it->second);
            }
            const std::size_t k = d.output_size();
            auto [ms, inserted] = p.model_sizes_.emplace(d.model, k);
            if (inserted)
                p.models_.push_back(d.model);
            else if (ms->second != k)
                fail_at(rule.line, "model " + symbol_name(d.model) + " is used with output sizes " +
                                       std::to_string(ms->second) + " and " + std::to_string(k));
        }
    }

    static std::vector<Term> enumerate_domain(const Program &p, PrologSolver &solver, Symbol pred, std::size_t line) {
        const PredicateKey key{pred, 1};
        if (p.group_index_.count(key))
            fail_at(line, "domain predicate " + key.to_string() + " must be defined by facts, not grammar rules");
        if (!p.clauses_.defines(key))
            fail_at(line, "unknown domain predicate " + key.to_string());
        const Term y = Term::variable("Y", 0);
        std::vector<Term> values;
        try {
            for (const auto &s : solver.all_answers(Term::compound(pred, {y}), {})) {
                const Term v = s.apply(y);
                if (!v.is_ground())
                    fail_at(line, "domain predicate " + key.to_string() + " yields non-ground value " + to_string(v));
                if (std::find(values.begin(), values.end(), v) != values.end())
                    fail_at(line, "domain predicate " + key.to_string() + " yields " + to_string(v) + " twice");
                values.push_back(v);
            }
        } catch (const EvalError &e) {
            fail_at(line, "cannot enumerate domain " + key.to_string() + ": " + e.what());
        }
        if (values.empty())
            fail_at(line, "domain predicate " + key.to_string() + " is empty");
        return values;
    }

    static void compute_min_yield(Program &p) {
        for (const auto &g : p.groups_)
            p.min_yield_[g.key] = Program::kUnbounded;
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto &g : p.groups_) {
                std::size_t best = p.min_yield_[g.key];
                for (const auto r : g.rules) {
                    std::size_t total = 0;
                    for (const auto &item : p.rules_[r].body) {
                        std::size_t y = 0;
                        if (item.kind == BodyItem::Kind::Terminals)
                            y = item.terminals.size();
                        else if (item.kind == BodyItem::Kind::Nonterminal)
                            y = p.min_yield_[PredicateKey::of(item.term)];
                        total = (y == Program::kUnbounded || total == Program::kUnbounded) ? Program::kUnbounded
                                                                                          : total + y;
                    }
                    best = std::min(best, total);
                }
                if (best < p.min_yield_[g.key]) {
                    p.min_yield_[g.key] = best;
                    changed = true;
                }
            }
        }
    }
};

Program Program::parse(std::string_view source) { return ProgramBuilder::build(source); }

namespace {

Term body_term(const std::vector<BodyItem> &body) {
    std::vector<Term> parts;
    for (const auto &item : body)
        parts.push_back(item.kind == BodyItem::Kind::Goal ? Term::compound(kCurly, {item.term}) : item.term);
    return parts.empty() ? Term::nil() : conjunction(parts);
}

} // namespace

std::string rule_to_string(const StochasticRule &rule) {
    Term lhs = rule.head;
    if (rule.weight_kind != WeightKind::Unit)
        lhs = Term::compound(kWeightOp, {rule.weight_term, lhs});
    return to_string(Term::compound(kArrowDcg, {lhs, body_term(rule.body)})) + ".";
}

std::string Program::pretty_print() const {
    std::ostringstream out;
    for (const auto &[is_rule, i] : order_) {
        if (is_rule) {
            out << rule_to_string(rules_[i]) << "\n";
        } else {
            const Clause &c = clauses_.at(i);
            const bool fact = c.body.is_atom() && c.body.functor() == kTrue;
            out << to_string(fact ? c.head : Term::compound(kNeck, {c.head, c.body})) << ".\n";
        }
    }
    return out.str();
}

Term TranslatedClause::as_term() const {
    return body.empty() ? head : Term::compound(kNeck, {head, conjunction(body)});
}

std::string TranslatedClause::to_string() const { return stochlog::to_string(as_term()) + "."; }

namespace {

Term with_extra_args(const Term &callable, const Term &in, const Term &out) {
    std::vector<Term> args(callable.args().begin(), callable.args().end());
    args.push_back(in);
    args.push_back(out);
    return Term::compound(callable.functor(), std::move(args));
}

TranslatedClause translate_rule(const Program &program, const StochasticRule &rule) {
    // Sequence variables live in a private scope until they receive readable names.
    constexpr std::uint32_t kSeqScope = 0xfffffff0u;
    std::size_t next = 0;
    auto fresh = [&] { return Term::variable(VarId{intern("S" + std::to_string(next++)), kSeqScope}); };

    Substitution links;
    std::vector<Term> body;
    const Term start = fresh();
    Term cur = start;
    for (const auto &item : rule.body) {
        switch (item.kind) {
        case BodyItem::Kind::Nonterminal: {
            const Term after = fresh();
            body.push_back(with_extra_args(item.term, cur, after));
            cur = after;
            break;
        }
        case BodyItem::Kind::Terminals: {
            const Term after = fresh();
            links.bind(cur.var_id(), Term::list(item.terminals, after));
            cur = after;
            break;
        }
        case BodyItem::Kind::Goal:
            flatten_conjunction(item.term, body);
            break;
        }
    }
    Term head = with_extra_args(rule.head, start, cur);

    switch (rule.weight_kind) {
    case WeightKind::Fixed:
        body.push_back(Term::compound("p", {rule.weight_term}));
        break;
    case WeightKind::Unit:
        body.push_back(Term::compound("p", {Term::integer(1)}));
        break;
    case WeightKind::Trainable: {
        const RuleGroup &g = program.groups()[rule.group];
        const Term ref = Term::compound("/", {Term::atom(g.key.name), Term::integer(g.key.arity)});
        body.push_back(Term::compound("p", {Term::compound("t", {ref, Term::integer(static_cast<long>(rule.slot))})}));
        break;
    }
    case WeightKind::Neural: {
        const NeuralDeclaration &d = *rule.neural;
        std::vector<Term> ins, outs;
        for (const auto &v : d.inputs)
            ins.push_back(Term::variable(v));
        for (const auto &v : d.outputs)
            outs.push_back(Term::variable(v));
        body.push_back(Term::compound(kNn, {Term::atom(d.model), Term::list(ins), Term::list(outs)}));
        for (std::size_t i = 0; i < d.outputs.size(); ++i)
            body.push_back(Term::compound(d.domain_predicates[i], {outs[i]}));
        break;
    }
    }

    head = links.apply(head);
    for (auto &b : body)
        b = links.apply(b);

    // Name the surviving sequence variables A, B, C, ... in threading order,
    // skipping names already used by the rule.
    std::set<std::string> used;
    std::vector<VarId> rule_vars;
    collect_variables(head, rule_vars);
    for (const auto &b : body)
        collect_variables(b, rule_vars);
    for (const auto &v : rule_vars)
        if (v.scope != kSeqScope)
            used.insert(symbol_name(v.name));
    std::size_t name_index = 0;
    auto next_name = [&] {
        while (true) {
            const std::size_t i = name_index++;
            std::string name(1, static_cast<char>('A' + i % 26));
            if (i >= 26)
                name += std::to_string(i / 26);
            if (!used.count(name))
                return name;
        }
    };
    Substitution naming;
    for (std::size_t i = 0; i < next; ++i) {
        const VarId v{intern("S" + std::to_string(i)), kSeqScope};
        if (links.lookup(v))
            continue;
        bool occurs = occurs_in(v, head);
        for (const auto &b : body)
            occurs = occurs || occurs_in(v, b);
        if (occurs)
            naming.bind(v, Term::variable(next_name()));
    }
    TranslatedClause out;
    out.head = naming.apply(head);
    for (const auto &b : body)
        out.body.push_back(naming.apply(b));
    return out;
}

} // namespace

std::vector<TranslatedClause> translate(const Program &program) {
    std::vector<TranslatedClause> out;
    for (const auto &[is_rule, i] : program.source_order()) {
        if (is_rule) {
            out.push_back(translate_rule(program, program.rules()[i]));
        } else {
            const Clause &c = program.clauses().at(i);
            TranslatedClause tc{c.head, {}};
            if (!(c.body.is_atom() && c.body.functor() == kTrue))
                flatten_conjunction(c.body, tc.body);
            out.push_back(std::move(tc));
        }
    }
    return out;
}

} // namespace stochlog
