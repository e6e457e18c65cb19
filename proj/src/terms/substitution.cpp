#include "stochlog/substitution.hpp"

#include <algorithm>
#include <sstream>

namespace stochlog {

const Term *Substitution::lookup(VarId v) const {
    for (const auto &[var, term] : bindings_)
        if (var == v)
            return &term;
    return nullptr;
}

void Substitution::bind(VarId v, Term t) { bindings_.emplace_back(v, std::move(t)); }

Term Substitution::walk(const Term &t) const {
    Term cur = t;
    while (cur.is_variable()) {
        const Term *next = lookup(cur.var_id());
        if (!next)
            break;
        cur = *next;
    }
    return cur;
}

Term Substitution::apply(const Term &t) const {
    if (t.is_ground() || bindings_.empty())
        return t;
    if (t.is_variable()) {
        const Term w = walk(t);
        return w.is_variable() ? w : apply(w);
    }
    std::vector<Term> args;
    args.reserve(t.arity());
    bool changed = false;
    for (const auto &a : t.args()) {
        args.push_back(apply(a));
        changed = changed || args.back().node() != a.node();
    }
    if (!changed)
        return t;
    return Term::compound(t.functor(), std::move(args));
}

Substitution Substitution::normalized() const {
    Substitution out;
    out.bindings_.reserve(bindings_.size());
    for (const auto &[var, term] : bindings_) {
        Term resolved = apply(term);
        if (resolved.is_variable() && resolved.var_id() == var)
            continue;
        out.bindings_.emplace_back(var, std::move(resolved));
    }
    return out;
}

Substitution Substitution::restricted(const std::vector<VarId> &vars) const {
    Substitution out;
    for (const auto &v : vars) {
        Term resolved = apply(Term::variable(v));
        if (resolved.is_variable() && resolved.var_id() == v)
            continue;
        out.bindings_.emplace_back(v, std::move(resolved));
    }
    return out;
}

Substitution Substitution::compose(const Substitution &first, const Substitution &second) {
    Substitution out;
    const Substitution a = first.normalized();
    const Substitution b = second.normalized();
    for (const auto &[var, term] : a.bindings_) {
        Term t = b.apply(term);
        if (t.is_variable() && t.var_id() == var)
            continue;
        out.bindings_.emplace_back(var, std::move(t));
    }
    for (const auto &[var, term] : b.bindings_)
        if (!a.lookup(var))
            out.bindings_.emplace_back(var, term);
    return out;
}

bool operator==(const Substitution &a, const Substitution &b) {
    const Substitution x = a.normalized();
    const Substitution y = b.normalized();
    if (x.size() != y.size())
        return false;
    for (const auto &[var, term] : x.bindings_) {
        const Term *other = y.lookup(var);
        if (!other || *other != term)
            return false;
    }
    return true;
}

std::string Substitution::to_string() const {
    std::ostringstream out;
    out << "{";
    bool first = true;
    for (const auto &[var, term] : normalized().bindings_) {
        if (!first)
            out << ", ";
        first = false;
        out << Term::variable(var) << "=" << term;
    }
    out << "}";
    return out.str();
}

namespace {

bool occurs(VarId v, const Term &t, const Substitution &s) {
    if (t.is_ground())
        return false;
    const Term w = s.walk(t);
    if (w.is_variable())
        return w.var_id() == v;
    for (const auto &a : w.args())
        if (occurs(v, a, s))
            return true;
    return false;
}

} // namespace

bool unify_into(const Term &a, const Term &b, Substitution &subst, UnifyOptions options) {
    const Term x = subst.walk(a);
    const Term y = subst.walk(b);
    if (x.node() == y.node())
        return true;
    if (x.is_variable()) {
        if (y.is_variable() && y.var_id() == x.var_id())
            return true;
        if (options.occurs_check && occurs(x.var_id(), y, subst))
            return false;
        subst.bind(x.var_id(), y);
        return true;
    }
    if (y.is_variable()) {
        if (options.occurs_check && occurs(y.var_id(), x, subst))
            return false;
        subst.bind(y.var_id(), x);
        return true;
    }
    if (x.kind() != y.kind())
        return false;
    switch (x.kind()) {
    case TermKind::Atom:
    case TermKind::Number:
    case TermKind::Feature:
        return x == y;
    case TermKind::Compound: {
        if (x.functor() != y.functor() || x.arity() != y.arity())
            return false;
        if (x.is_ground() && y.is_ground())
            return x == y;
        for (std::size_t i = 0; i < x.arity(); ++i)
            if (!unify_into(x.arg(i), y.arg(i), subst, options))
                return false;
        return true;
    }
    case TermKind::Variable:
        break;
    }
    return false;
}

std::optional<Substitution> unify(const Term &a, const Term &b, UnifyOptions options) {
    Substitution s;
    if (!unify_into(a, b, s, options))
        return std::nullopt;
    return s.normalized();
}

Term rename_into_scope(const Term &t, std::uint32_t scope) {
    if (t.is_ground())
        return t;
    if (t.is_variable())
        return Term::variable(VarId{t.var_id().name, scope});
    std::vector<Term> args;
    args.reserve(t.arity());
    for (const auto &a : t.args())
        args.push_back(rename_into_scope(a, scope));
    return Term::compound(t.functor(), std::move(args));
}

} // namespace stochlog
