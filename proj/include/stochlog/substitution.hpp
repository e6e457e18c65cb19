#pragma once

#include "stochlog/term.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace stochlog {

/// Finite map from variables to terms.
///
/// Internally bindings are kept in triangular form (a bound term may mention
/// other bound variables); `apply` resolves chains fully, and `normalized`
/// produces the idempotent form exposed by `unify`.
class Substitution {
public:
    Substitution() = default;

    bool empty() const { return bindings_.empty(); }
    std::size_t size() const { return bindings_.size(); }
    const std::vector<std::pair<VarId, Term>> &bindings() const { return bindings_; }

    const Term *lookup(VarId v) const;
    /// Caller guarantees `v` is unbound and `t` is not `v` itself.
    void bind(VarId v, Term t);

    /// Dereferences variable chains at the top of `t` only.
    Term walk(const Term &t) const;
    /// Replaces every bound variable, recursively.
    Term apply(const Term &t) const;

    /// Idempotent equivalent: no bound variable occurs in any bound term.
    Substitution normalized() const;
    /// Restriction of the (normalized) substitution to `vars`.
    Substitution restricted(const std::vector<VarId> &vars) const;

    /// Composition: apply(compose(a, b), t) == b.apply(a.apply(t)).
    static Substitution compose(const Substitution &first, const Substitution &second);

    friend bool operator==(const Substitution &a, const Substitution &b);

    std::string to_string() const;

private:
    std::vector<std::pair<VarId, Term>> bindings_;
};

struct UnifyOptions {
    bool occurs_check = true;
};

/// Extends `subst` so that a and b become equal; on failure `subst` may hold
/// partial bindings, so callers work on a copy.
bool unify_into(const Term &a, const Term &b, Substitution &subst, UnifyOptions options = {});

/// Most general unifier of a and b, in idempotent form.
std::optional<Substitution> unify(const Term &a, const Term &b, UnifyOptions options = {});

/// Fresh-scope source for standardizing apart.
class ScopeCounter {
public:
    explicit ScopeCounter(std::uint32_t start = 1) : next_(start) {}
    std::uint32_t next() { return next_++; }

private:
    std::uint32_t next_;
};

/// Moves every variable of `t` into `scope`. Ground terms are returned unchanged.
Term rename_into_scope(const Term &t, std::uint32_t scope);

} // namespace stochlog
