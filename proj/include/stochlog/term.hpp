#pragma once

#include "stochlog/number.hpp"
#include "stochlog/symbol.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stochlog {

enum class TermKind : std::uint8_t { Atom, Number, Variable, Compound, Feature };

/// Dense numeric vector standing in for a subsymbolic input (e.g. an image).
struct FeatureVector {
    std::string id;
    std::vector<double> values;
};

/// Variables are identified by (name, scope); scope 0 is the source text.
struct VarId {
    Symbol name = 0;
    std::uint32_t scope = 0;

    std::uint64_t key() const { return (std::uint64_t{scope} << 32) | name; }
    friend bool operator==(VarId a, VarId b) { return a.name == b.name && a.scope == b.scope; }
};

/// Reserved scope for canonical (variant-normalized) variables.
inline constexpr std::uint32_t kCanonicalScope = 0xffffffffu;

struct TermNode;

/// Immutable first-order term with shared structure. Copying is cheap.
class Term {
public:
    Term(); // the empty list atom `[]`

    static Term atom(Symbol name);
    static Term atom(std::string_view name) { return atom(intern(name)); }
    static Term number(Number value);
    static Term integer(long value) { return number(Number(value)); }
    static Term variable(VarId id);
    static Term variable(std::string_view name, std::uint32_t scope = 0) { return variable(VarId{intern(name), scope}); }
    /// Zero-argument compounds collapse to atoms.
    static Term compound(Symbol functor, std::vector<Term> args);
    static Term compound(std::string_view functor, std::vector<Term> args) { return compound(intern(functor), std::move(args)); }
    static Term feature(std::shared_ptr<const FeatureVector> vec);
    static Term nil();
    static Term cons(Term head, Term tail);
    static Term list(const std::vector<Term> &items, Term tail = nil());

    TermKind kind() const;
    bool is_atom() const { return kind() == TermKind::Atom; }
    bool is_number() const { return kind() == TermKind::Number; }
    bool is_variable() const { return kind() == TermKind::Variable; }
    bool is_compound() const { return kind() == TermKind::Compound; }
    bool is_feature() const { return kind() == TermKind::Feature; }
    bool is_callable() const { return is_atom() || is_compound(); }
    bool is_nil() const;
    bool is_cons() const;

    /// Atom name or compound functor.
    Symbol functor() const;
    std::size_t arity() const;
    const Term &arg(std::size_t i) const;
    std::span<const Term> args() const;
    const Number &number_value() const;
    VarId var_id() const;
    const FeatureVector &feature_value() const;
    const std::shared_ptr<const FeatureVector> &feature_ptr() const;

    bool is_ground() const;
    std::size_t hash() const;
    /// Number of nodes in the term tree.
    std::size_t size() const;

    /// Flattens a proper or partial list; returns false if `tail_out` would be needed but is null.
    bool list_items(std::vector<Term> &items, Term *tail_out = nullptr) const;

    friend bool operator==(const Term &a, const Term &b);
    friend bool operator!=(const Term &a, const Term &b) { return !(a == b); }

    const TermNode *node() const { return node_.get(); }

private:
    explicit Term(std::shared_ptr<const TermNode> node) : node_(std::move(node)) {}
    std::shared_ptr<const TermNode> node_;
};

struct TermHash {
    std::size_t operator()(const Term &t) const { return t.hash(); }
};

/// Predicate name/arity pair, e.g. e/1.
struct PredicateKey {
    Symbol name = 0;
    std::uint32_t arity = 0;

    static PredicateKey of(const Term &callable) {
        return {callable.functor(), static_cast<std::uint32_t>(callable.arity())};
    }
    std::string to_string() const;
    friend bool operator==(PredicateKey a, PredicateKey b) { return a.name == b.name && a.arity == b.arity; }
    friend bool operator<(PredicateKey a, PredicateKey b) {
        return a.name != b.name ? a.name < b.name : a.arity < b.arity;
    }
};

struct PredicateKeyHash {
    std::size_t operator()(PredicateKey k) const { return (std::size_t{k.name} << 8) ^ k.arity; }
};

/// Operator-aware printing; variables in scope > 0 print as Name_scope.
std::string to_string(const Term &t);
std::ostream &operator<<(std::ostream &out, const Term &t);

/// Collects variables in first-occurrence order, without duplicates.
void collect_variables(const Term &t, std::vector<VarId> &out);
bool occurs_in(VarId v, const Term &t);

/// Renames variables to canonical ones numbered by first occurrence, so that two
/// terms are variants of each other iff their canonical forms are equal.
Term canonical_variant(const Term &t);
bool is_variant(const Term &a, const Term &b);

} // namespace stochlog
