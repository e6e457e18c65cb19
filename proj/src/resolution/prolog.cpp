#include "stochlog/prolog.hpp"

#include "stochlog/arithmetic.hpp"
#include "stochlog/error.hpp"

#include <iostream>

namespace stochlog {

struct PrologSolver::GoalCell {
    Term goal;
    std::size_t depth;
    GoalList next;
};

namespace {

const Symbol kTrue = intern("true");
const Symbol kFail = intern("fail");
const Symbol kFalse = intern("false");
const Symbol kComma = intern(",");
const Symbol kSemicolon = intern(";");
const Symbol kArrow = intern("->");
const Symbol kNot = intern("\\+");
const Symbol kCurly = intern("{}");

using Cmp = bool (*)(const Number &, const Number &);

PrologSolver::Builtin comparison(Cmp cmp) {
    return [cmp](PrologSolver &, std::span<const Term> args, const Substitution &s,
                 const PrologSolver::Continuation &next) {
        if (cmp(evaluate_arithmetic(args[0], s), evaluate_arithmetic(args[1], s)))
            return next(s);
        return true;
    };
}

} // namespace

PrologSolver::PrologSolver(const ClauseDatabase &clauses, ScopeCounter &scopes, PrologOptions options)
    : clauses_(clauses), scopes_(scopes), options_(options) {
    static const auto defaults = [] {
        static const ClauseDatabase none;
        static ScopeCounter counter{1};
        PrologSolver prototype(none, counter, {}, nullptr);
        prototype.install_defaults();
        return prototype.builtins_;
    }();
    builtins_ = defaults;
}

PrologSolver::PrologSolver(const ClauseDatabase &clauses, ScopeCounter &scopes, PrologOptions options, std::nullptr_t)
    : clauses_(clauses), scopes_(scopes), options_(options),
      builtins_(std::make_shared<std::unordered_map<PredicateKey, Builtin, PredicateKeyHash>>()) {}

void PrologSolver::register_builtin(PredicateKey key, Builtin builtin) {
    if (builtins_.use_count() > 1)
        builtins_ = std::make_shared<std::unordered_map<PredicateKey, Builtin, PredicateKeyHash>>(*builtins_);
    (*builtins_)[key] = std::move(builtin);
}

void PrologSolver::install_defaults() {
    auto key = [](std::string_view name, std::uint32_t arity) { return PredicateKey{intern(name), arity}; };
    register_builtin(key("=", 2), [](PrologSolver &self, std::span<const Term> a, const Substitution &s,
                                     const Continuation &next) {
        Substitution t = s;
        return self.unify(a[0], a[1], t) ? next(t) : true;
    });
    register_builtin(key("\\=", 2), [](PrologSolver &self, std::span<const Term> a, const Substitution &s,
                                       const Continuation &next) {
        Substitution t = s;
        return self.unify(a[0], a[1], t) ? true : next(s);
    });
    register_builtin(key("==", 2), [](PrologSolver &, std::span<const Term> a, const Substitution &s,
                                      const Continuation &next) {
        return s.apply(a[0]) == s.apply(a[1]) ? next(s) : true;
    });
    register_builtin(key("\\==", 2), [](PrologSolver &, std::span<const Term> a, const Substitution &s,
                                        const Continuation &next) {
        return s.apply(a[0]) == s.apply(a[1]) ? true : next(s);
    });
    register_builtin(key("is", 2), [](PrologSolver &self, std::span<const Term> a, const Substitution &s,
                                      const Continuation &next) {
        const Term value = Term::number(evaluate_arithmetic(a[1], s));
        Substitution t = s;
        return self.unify(a[0], value, t) ? next(t) : true;
    });
    register_builtin(key("=:=", 2), comparison([](const Number &x, const Number &y) { return x == y; }));
    register_builtin(key("=\\=", 2), comparison([](const Number &x, const Number &y) { return x != y; }));
    register_builtin(key("<", 2), comparison([](const Number &x, const Number &y) { return x < y; }));
    register_builtin(key(">", 2), comparison([](const Number &x, const Number &y) { return x > y; }));
    register_builtin(key("=<", 2), comparison([](const Number &x, const Number &y) { return x <= y; }));
    register_builtin(key(">=", 2), comparison([](const Number &x, const Number &y) { return x >= y; }));
    register_builtin(key("member", 2), [](PrologSolver &self, std::span<const Term> a, const Substitution &s,
                                          const Continuation &next) {
        Term list = s.walk(a[1]);
        while (list.is_cons()) {
            Substitution t = s;
            if (self.unify(a[0], list.arg(0), t) && !next(t))
                return false;
            list = s.walk(list.arg(1));
        }
        if (list.is_variable())
            throw EvalError("member/2: list is not sufficiently instantiated");
        return true;
    });
}

bool PrologSolver::solve(const Term &goal, const Substitution &in, const Continuation &k) {
    auto goals = std::make_shared<const GoalCell>(GoalCell{goal, 0, nullptr});
    return run(goals, in, k);
}

std::vector<Substitution> PrologSolver::all_answers(const Term &goal, const Substitution &in, std::size_t limit) {
    std::vector<Substitution> out;
    if (limit == 0)
        return out;
    solve(goal, in, [&](const Substitution &s) {
        out.push_back(s);
        return out.size() < limit;
    });
    return out;
}

std::optional<Substitution> PrologSolver::solve_single(const Term &goal, const Substitution &in) {
    std::vector<VarId> vars;
    collect_variables(in.apply(goal), vars);
    std::optional<Substitution> first;
    Substitution first_view;
    bool conflict = false;
    solve(goal, in, [&](const Substitution &s) {
        if (!first) {
            first = s;
            first_view = s.restricted(vars);
            return true;
        }
        if (s.restricted(vars) == first_view)
            return true;
        conflict = true;
        return false;
    });
    if (conflict) {
        const std::string msg = "goal {" + to_string(in.apply(goal)) + "} has more than one distinct answer";
        if (options_.strict_single_answer)
            throw EvalError(msg);
        std::cerr << "warning: " << msg << "; using the first\n";
    }
    return first;
}

bool PrologSolver::run(const GoalList &goals, const Substitution &s, const Continuation &k) {
    if (!goals)
        return k(s);
    const Term g = s.walk(goals->goal);
    const std::size_t depth = goals->depth;
    const GoalList &rest = goals->next;
    if (g.is_variable())
        throw EvalError("goal is not sufficiently instantiated");
    if (!g.is_callable())
        throw EvalError("goal " + to_string(g) + " is not callable");

    const Symbol f = g.functor();
    const std::size_t n = g.arity();
    auto push = [&](const Term &t, std::size_t d, GoalList tail) {
        return std::make_shared<const GoalCell>(GoalCell{t, d, std::move(tail)});
    };

    if (n == 0 && f == kTrue)
        return run(rest, s, k);
    if (n == 0 && (f == kFail || f == kFalse))
        return true;
    if (n == 2 && f == kComma)
        return run(push(g.arg(0), depth, push(g.arg(1), depth, rest)), s, k);
    if (n == 1 && f == kCurly)
        return run(push(g.arg(0), depth, rest), s, k);
    if (n == 2 && f == kSemicolon) {
        const Term left = s.walk(g.arg(0));
        if (left.is_compound() && left.functor() == kArrow && left.arity() == 2) {
            std::optional<Substitution> first;
            run(push(left.arg(0), depth, nullptr), s, [&](const Substitution &t) {
                first = t;
                return false;
            });
            if (first)
                return run(push(left.arg(1), depth, rest), *first, k);
            return run(push(g.arg(1), depth, rest), s, k);
        }
        if (!run(push(left, depth, rest), s, k))
            return false;
        return run(push(g.arg(1), depth, rest), s, k);
    }
    if (n == 2 && f == kArrow) {
        std::optional<Substitution> first;
        run(push(g.arg(0), depth, nullptr), s, [&](const Substitution &t) {
            first = t;
            return false;
        });
        return first ? run(push(g.arg(1), depth, rest), *first, k) : true;
    }
    if (n == 1 && f == kNot) {
        bool found = false;
        run(push(g.arg(0), depth, nullptr), s, [&](const Substitution &) {
            found = true;
            return false;
        });
        return found ? true : run(rest, s, k);
    }

    const PredicateKey key = PredicateKey::of(g);
    if (const auto it = builtins_->find(key); it != builtins_->end())
        return it->second(*this, g.args(), s,
                          [&](const Substitution &t) { return run(rest, t, k); });

    if (!clauses_.defines(key))
        throw EvalError("unknown procedure " + key.to_string());
    if (options_.max_depth != 0 && depth >= options_.max_depth) {
        truncated_ = true;
        return true;
    }
    for (const std::size_t i : clauses_.lookup(key)) {
        const Clause &c = clauses_.at(i);
        const std::uint32_t scope = scopes_.next();
        Substitution t = s;
        if (!unify(rename_into_scope(c.head, scope), g, t))
            continue;
        if (!run(push(rename_into_scope(c.body, scope), depth + 1, rest), t, k))
            return false;
    }
    return true;
}

} // namespace stochlog
