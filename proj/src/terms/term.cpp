#include "stochlog/term.hpp"

#include "stochlog/error.hpp"
#include "stochlog/ops.hpp"

#include <cctype>
#include <functional>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <variant>

namespace stochlog {

struct TermNode {
    TermKind kind;
    Symbol symbol = 0;
    std::uint32_t scope = 0;
    bool ground = true;
    std::size_t hash = 0;
    std::size_t size = 1;
    std::variant<std::monostate, Number, std::vector<Term>, std::shared_ptr<const FeatureVector>> payload;
};

namespace {

inline std::size_t mix(std::size_t seed, std::size_t value) {
    return seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

const Symbol kNil = intern("[]");
const Symbol kCons = intern("[|]");

const std::vector<Term> kNoArgs;

} // namespace

Term::Term() : Term(nil()) {}

Term Term::atom(Symbol name) {
    auto node = std::make_shared<TermNode>();
    node->kind = TermKind::Atom;
    node->symbol = name;
    node->hash = mix(1, name);
    return Term(std::move(node));
}

Term Term::nil() {
    static const Term instance = atom(kNil);
    return instance;
}

Term Term::number(Number value) {
    auto node = std::make_shared<TermNode>();
    node->kind = TermKind::Number;
    node->hash = mix(2, value.hash());
    node->payload = std::move(value);
    return Term(std::move(node));
}

Term Term::variable(VarId id) {
    auto node = std::make_shared<TermNode>();
    node->kind = TermKind::Variable;
    node->symbol = id.name;
    node->scope = id.scope;
    node->ground = false;
    node->hash = mix(mix(3, id.name), id.scope);
    return Term(std::move(node));
}

Term Term::compound(Symbol functor, std::vector<Term> args) {
    if (args.empty())
        return atom(functor);
    auto node = std::make_shared<TermNode>();
    node->kind = TermKind::Compound;
    node->symbol = functor;
    std::size_t h = mix(mix(4, functor), args.size());
    for (const auto &a : args) {
        h = mix(h, a.hash());
        node->ground = node->ground && a.is_ground();
        node->size += a.size();
    }
    node->hash = h;
    node->payload = std::move(args);
    return Term(std::move(node));
}

Term Term::feature(std::shared_ptr<const FeatureVector> vec) {
    auto node = std::make_shared<TermNode>();
    node->kind = TermKind::Feature;
    node->hash = mix(5, std::hash<std::string>{}(vec->id));
    node->payload = std::move(vec);
    return Term(std::move(node));
}

Term Term::cons(Term head, Term tail) { return compound(kCons, {std::move(head), std::move(tail)}); }

Term Term::list(const std::vector<Term> &items, Term tail) {
    Term out = std::move(tail);
    for (auto it = items.rbegin(); it != items.rend(); ++it)
        out = cons(*it, out);
    return out;
}

TermKind Term::kind() const { return node_->kind; }
bool Term::is_nil() const { return node_->kind == TermKind::Atom && node_->symbol == kNil; }
bool Term::is_cons() const {
    return node_->kind == TermKind::Compound && node_->symbol == kCons && arity() == 2;
}

Symbol Term::functor() const {
    if (node_->kind != TermKind::Atom && node_->kind != TermKind::Compound)
        throw Error("functor() on non-callable term " + to_string(*this));
    return node_->symbol;
}

std::size_t Term::arity() const {
    return node_->kind == TermKind::Compound ? std::get<std::vector<Term>>(node_->payload).size() : 0;
}

const Term &Term::arg(std::size_t i) const { return std::get<std::vector<Term>>(node_->payload).at(i); }

std::span<const Term> Term::args() const {
    if (node_->kind != TermKind::Compound)
        return kNoArgs;
    return std::get<std::vector<Term>>(node_->payload);
}

const Number &Term::number_value() const { return std::get<Number>(node_->payload); }
VarId Term::var_id() const { return VarId{node_->symbol, node_->scope}; }
const FeatureVector &Term::feature_value() const {
    return *std::get<std::shared_ptr<const FeatureVector>>(node_->payload);
}
const std::shared_ptr<const FeatureVector> &Term::feature_ptr() const {
    return std::get<std::shared_ptr<const FeatureVector>>(node_->payload);
}

bool Term::is_ground() const { return node_->ground; }
std::size_t Term::hash() const { return node_->hash; }
std::size_t Term::size() const { return node_->size; }

bool Term::list_items(std::vector<Term> &items, Term *tail_out) const {
    Term cur = *this;
    while (cur.is_cons()) {
        items.push_back(cur.arg(0));
        cur = cur.arg(1);
    }
    if (cur.is_nil())
        return true;
    if (tail_out) {
        *tail_out = cur;
        return true;
    }
    return false;
}

bool operator==(const Term &a, const Term &b) {
    const TermNode *x = a.node_.get();
    const TermNode *y = b.node_.get();
    if (x == y)
        return true;
    if (x->kind != y->kind || x->hash != y->hash)
        return false;
    switch (x->kind) {
    case TermKind::Atom:
        return x->symbol == y->symbol;
    case TermKind::Number:
        return std::get<Number>(x->payload) == std::get<Number>(y->payload);
    case TermKind::Variable:
        return x->symbol == y->symbol && x->scope == y->scope;
    case TermKind::Feature:
        return std::get<std::shared_ptr<const FeatureVector>>(x->payload)->id ==
               std::get<std::shared_ptr<const FeatureVector>>(y->payload)->id;
    case TermKind::Compound: {
        if (x->symbol != y->symbol)
            return false;
        const auto &xa = std::get<std::vector<Term>>(x->payload);
        const auto &ya = std::get<std::vector<Term>>(y->payload);
        if (xa.size() != ya.size())
            return false;
        for (std::size_t i = 0; i < xa.size(); ++i)
            if (xa[i] != ya[i])
                return false;
        return true;
    }
    }
    return false;
}

std::string PredicateKey::to_string() const { return symbol_name(name) + "/" + std::to_string(arity); }

// ---------------------------------------------------------------------------
// Printing

namespace {

bool is_solo_atom(const std::string &s) {
    return s == "[]" || s == "!" || s == ";" || s == "{}" || s == ",";
}

bool is_symbol_char(char c) { return std::string_view("+-*/\\^<>=~:.?@#&$").find(c) != std::string_view::npos; }

bool needs_quotes(const std::string &s) {
    if (s.empty())
        return true;
    if (is_solo_atom(s))
        return s == ",";
    if (std::islower(static_cast<unsigned char>(s[0]))) {
        for (char c : s)
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_')
                return true;
        return false;
    }
    for (char c : s)
        if (!is_symbol_char(c))
            return true;
    return false;
}

std::string atom_text(Symbol s) {
    const std::string &name = symbol_name(s);
    if (!needs_quotes(name))
        return name;
    std::string out = "'";
    for (char c : name) {
        if (c == '\'' || c == '\\')
            out += '\\';
        out += c;
    }
    return out + "'";
}

void print(std::ostream &out, const Term &t, int max_priority);

void print_args(std::ostream &out, std::span<const Term> args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i)
            out << ",";
        print(out, args[i], 999);
    }
}

void print(std::ostream &out, const Term &t, int max_priority) {
    switch (t.kind()) {
    case TermKind::Atom:
        out << atom_text(t.functor());
        return;
    case TermKind::Number: {
        const std::string s = t.number_value().to_string();
        // Negative numbers as operator arguments need parentheses to re-read unambiguously.
        if (s[0] == '-' && max_priority < 200)
            out << "(" << s << ")";
        else
            out << s;
        return;
    }
    case TermKind::Variable: {
        const VarId v = t.var_id();
        if (v.scope == kCanonicalScope)
            out << "_G" << v.name;
        else if (v.scope == 0 && symbol_name(v.name).starts_with("_#"))
            out << "_";
        else if (v.scope == 0)
            out << symbol_name(v.name);
        else
            out << symbol_name(v.name) << "_" << v.scope;
        return;
    }
    case TermKind::Feature:
        out << "vec:" << t.feature_value().id;
        return;
    case TermKind::Compound:
        break;
    }
    const std::string &name = symbol_name(t.functor());
    if (t.is_cons()) {
        out << "[";
        Term cur = t;
        bool first = true;
        while (cur.is_cons()) {
            if (!first)
                out << ",";
            first = false;
            print(out, cur.arg(0), 999);
            cur = cur.arg(1);
        }
        if (!cur.is_nil()) {
            out << "|";
            print(out, cur, 999);
        }
        out << "]";
        return;
    }
    if (name == "{}" && t.arity() == 1) {
        out << "{";
        print(out, t.arg(0), 1200);
        out << "}";
        return;
    }
    if (t.arity() == 2) {
        if (auto op = infix_operator(name)) {
            const int left_max = op->type == OpType::yfx ? op->priority : op->priority - 1;
            const int right_max = op->type == OpType::xfy ? op->priority : op->priority - 1;
            const bool paren = op->priority > max_priority;
            if (paren)
                out << "(";
            std::ostringstream left, right;
            print(left, t.arg(0), left_max);
            print(right, t.arg(1), right_max);
            const std::string l = left.str(), r = right.str();
            out << l;
            if (name == ",") {
                out << ", ";
            } else if (std::isalpha(static_cast<unsigned char>(name[0])) || name == "-->" || name == ":-" ||
                       name == "::") {
                out << " " << name << " ";
            } else {
                // Keep adjacent symbol characters from fusing into one token, e.g. `a- -1`.
                if (!l.empty() && is_symbol_char(l.back()))
                    out << " ";
                out << name;
                if (!r.empty() && is_symbol_char(r.front()))
                    out << " ";
            }
            out << r;
            if (paren)
                out << ")";
            return;
        }
    }
    if (t.arity() == 1) {
        if (auto op = prefix_operator(name)) {
            const bool paren = op->priority > max_priority;
            if (paren)
                out << "(";
            out << name;
            const Term &a = t.arg(0);
            std::ostringstream operand;
            print(operand, a, op->type == OpType::fy ? op->priority : op->priority - 1);
            const std::string text = operand.str();
            // Keep "- 1" distinct from the literal -1 and symbol characters from fusing.
            if (a.is_number() || is_symbol_char(text.front()) || std::isalpha(static_cast<unsigned char>(name[0])))
                out << " ";
            out << text;
            if (paren)
                out << ")";
            return;
        }
    }
    out << atom_text(t.functor()) << "(";
    print_args(out, t.args());
    out << ")";
}

} // namespace

std::string to_string(const Term &t) {
    std::ostringstream out;
    print(out, t, 1200);
    return out.str();
}

std::ostream &operator<<(std::ostream &out, const Term &t) {
    print(out, t, 1200);
    return out;
}

// ---------------------------------------------------------------------------
// Variables and variants

void collect_variables(const Term &t, std::vector<VarId> &out) {
    if (t.is_ground())
        return;
    if (t.is_variable()) {
        const VarId v = t.var_id();
        for (const auto &seen : out)
            if (seen == v)
                return;
        out.push_back(v);
        return;
    }
    for (const auto &a : t.args())
        collect_variables(a, out);
}

bool occurs_in(VarId v, const Term &t) {
    if (t.is_ground())
        return false;
    if (t.is_variable())
        return t.var_id() == v;
    for (const auto &a : t.args())
        if (occurs_in(v, a))
            return true;
    return false;
}

namespace {

Term canonicalize(const Term &t, std::vector<VarId> &seen) {
    if (t.is_ground())
        return t;
    if (t.is_variable()) {
        const VarId v = t.var_id();
        for (std::size_t i = 0; i < seen.size(); ++i)
            if (seen[i] == v)
                return Term::variable(VarId{static_cast<Symbol>(i), kCanonicalScope});
        seen.push_back(v);
        return Term::variable(VarId{static_cast<Symbol>(seen.size() - 1), kCanonicalScope});
    }
    std::vector<Term> args;
    args.reserve(t.arity());
    for (const auto &a : t.args())
        args.push_back(canonicalize(a, seen));
    return Term::compound(t.functor(), std::move(args));
}

} // namespace

Term canonical_variant(const Term &t) {
    std::vector<VarId> seen;
    return canonicalize(t, seen);
}

bool is_variant(const Term &a, const Term &b) { return canonical_variant(a) == canonical_variant(b); }

} // namespace stochlog
