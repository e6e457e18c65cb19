#include "stochlog/circuit.hpp"

#include "stochlog/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

namespace stochlog {

namespace {

constexpr NodeId kNone = std::numeric_limits<NodeId>::max();

std::size_t mix(std::size_t seed, std::size_t value) {
    return seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

bool is_internal(NodeKind kind) { return kind == NodeKind::And || kind == NodeKind::Or; }

} // namespace

std::size_t Circuit::count(NodeKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [kind](const Node &n) { return n.kind == kind; }));
}

std::size_t CircuitBuilder::KeyHash::operator()(const std::pair<NodeKind, std::vector<NodeId>> &k) const {
    std::size_t h = static_cast<std::size_t>(k.first);
    for (NodeId c : k.second)
        h = mix(h, c);
    return h;
}

std::size_t CircuitBuilder::NeuralHash::operator()(const NeuralRef &r) const {
    std::size_t h = mix(r.model, r.output);
    for (const auto &t : r.inputs)
        h = mix(h, t.hash());
    return h;
}

CircuitBuilder::CircuitBuilder(bool hash_cons) : hash_cons_(hash_cons) {
    nodes_.push_back({NodeKind::Zero, {}, 0});
    nodes_.push_back({NodeKind::One, {}, 0});
}

NodeId CircuitBuilder::weight_leaf(const WeightRef &ref) {
    auto [it, inserted] = weight_index_.try_emplace(ref, static_cast<NodeId>(nodes_.size()));
    if (inserted) {
        nodes_.push_back({NodeKind::WeightLeaf, {}, static_cast<std::uint32_t>(weight_leaves_.size())});
        weight_leaves_.push_back(ref);
    }
    return it->second;
}

NodeId CircuitBuilder::neural_leaf(const NeuralRef &ref) {
    auto [it, inserted] = neural_index_.try_emplace(ref, static_cast<NodeId>(nodes_.size()));
    if (inserted) {
        nodes_.push_back({NodeKind::NeuralLeaf, {}, static_cast<std::uint32_t>(neural_leaves_.size())});
        neural_leaves_.push_back(ref);
    }
    return it->second;
}

NodeId CircuitBuilder::intern_node(NodeKind kind, std::vector<NodeId> children) {
    if (!hash_cons_) {
        nodes_.push_back({kind, std::move(children), 0});
        return static_cast<NodeId>(nodes_.size() - 1);
    }
    auto key = std::make_pair(kind, children);
    auto it = internal_index_.find(key);
    if (it != internal_index_.end())
        return it->second;
    const auto id = static_cast<NodeId>(nodes_.size());
    nodes_.push_back({kind, std::move(children), 0});
    internal_index_.emplace(std::move(key), id);
    return id;
}

NodeId CircuitBuilder::and_node(std::vector<NodeId> children) {
    std::vector<NodeId> kept;
    kept.reserve(children.size());
    for (NodeId c : children) {
        if (c == kZero)
            return kZero;
        if (c != kOne)
            kept.push_back(c);
    }
    if (kept.empty())
        return kOne;
    if (kept.size() == 1)
        return kept[0];
    return intern_node(NodeKind::And, std::move(kept));
}

NodeId CircuitBuilder::or_node(std::vector<NodeId> children) {
    std::erase(children, kZero);
    if (children.empty())
        return kZero;
    if (children.size() == 1)
        return children[0];
    return intern_node(NodeKind::Or, std::move(children));
}

NodeId CircuitBuilder::placeholder() {
    nodes_.push_back({NodeKind::Or, {}, 0});
    return static_cast<NodeId>(nodes_.size() - 1);
}

void CircuitBuilder::fill(NodeId placeholder, std::vector<NodeId> children) {
    std::erase(children, kZero);
    nodes_[placeholder].children = std::move(children);
}

Circuit CircuitBuilder::finish(NodeId root, std::vector<NodeId> &keep, bool truncated, std::size_t unroll_depth) {
    // Forwarding of OR nodes with exactly one child; singleton-OR cycles derive nothing.
    std::vector<NodeId> forward(nodes_.size(), kNone);
    auto resolve = [&](NodeId start) {
        std::vector<NodeId> chain;
        NodeId cur = start;
        while (forward[cur] == kNone) {
            const auto &n = nodes_[cur];
            const bool single_or = n.kind == NodeKind::Or && n.children.size() == 1;
            const bool empty_or = n.kind == NodeKind::Or && n.children.empty();
            if (empty_or) {
                forward[cur] = kZero;
                break;
            }
            if (!single_or) {
                forward[cur] = cur;
                break;
            }
            if (std::find(chain.begin(), chain.end(), cur) != chain.end()) {
                forward[cur] = kZero;
                break;
            }
            chain.push_back(cur);
            cur = n.children[0];
        }
        const NodeId target = forward[cur];
        for (NodeId c : chain)
            forward[c] = target;
        return target;
    };

    // Iterative DFS for reachability, post-order and cycle detection.
    enum : std::uint8_t { kWhite, kGrey, kBlack };
    std::vector<std::uint8_t> colour(nodes_.size(), kWhite);
    std::vector<NodeId> post;
    bool cyclic = false;
    {
        std::vector<std::pair<NodeId, std::size_t>> stack;
        const NodeId r = resolve(root);
        stack.emplace_back(r, 0);
        colour[r] = kGrey;
        while (!stack.empty()) {
            auto &[id, next] = stack.back();
            const auto &n = nodes_[id];
            if (is_internal(n.kind) && next < n.children.size()) {
                const NodeId c = resolve(n.children[next++]);
                if (colour[c] == kGrey)
                    cyclic = true;
                else if (colour[c] == kWhite) {
                    colour[c] = kGrey;
                    stack.emplace_back(c, 0);
                }
                continue;
            }
            colour[id] = kBlack;
            post.push_back(id);
            stack.pop_back();
        }
    }

    Circuit out;
    out.truncated_ = truncated;
    std::vector<std::uint32_t> weight_map(weight_leaves_.size(), kNone);
    std::vector<std::uint32_t> neural_map(neural_leaves_.size(), kNone);
    auto emit = [&](NodeKind kind, std::uint32_t leaf, const std::vector<NodeId> &kids) {
        Circuit::Node n;
        n.kind = kind;
        if (kind == NodeKind::WeightLeaf) {
            if (weight_map[leaf] == kNone) {
                weight_map[leaf] = static_cast<std::uint32_t>(out.weight_leaves_.size());
                out.weight_leaves_.push_back(weight_leaves_[leaf]);
            }
            n.leaf = weight_map[leaf];
        } else if (kind == NodeKind::NeuralLeaf) {
            if (neural_map[leaf] == kNone) {
                neural_map[leaf] = static_cast<std::uint32_t>(out.neural_leaves_.size());
                out.neural_leaves_.push_back(neural_leaves_[leaf]);
            }
            n.leaf = neural_map[leaf];
        }
        n.first = static_cast<std::uint32_t>(out.children_.size());
        n.count = static_cast<std::uint32_t>(kids.size());
        out.children_.insert(out.children_.end(), kids.begin(), kids.end());
        out.nodes_.push_back(n);
        return static_cast<NodeId>(out.nodes_.size() - 1);
    };

    if (!cyclic) {
        std::vector<NodeId> renumber(nodes_.size(), kNone);
        for (NodeId id : post) {
            const auto &n = nodes_[id];
            std::vector<NodeId> kids;
            if (is_internal(n.kind))
                for (NodeId c : n.children)
                    kids.push_back(renumber[resolve(c)]);
            renumber[id] = emit(n.kind, n.leaf, kids);
        }
        // Root must be last; it is, since it finishes the DFS.
        for (auto &k : keep) {
            const NodeId r = resolve(k);
            if (renumber[r] == kNone)
                throw EvalError("circuit node to keep is unreachable from the root");
            k = renumber[r];
        }
        return out;
    }

    // Cyclic: unroll by depth. Each internal node consumes one level; exhausted
    // branches become Zero and mark the circuit as truncated.
    std::map<std::pair<NodeId, std::size_t>, NodeId> memo;
    NodeId zero_id = kNone;
    auto zero_node = [&]() {
        if (zero_id == kNone)
            zero_id = emit(NodeKind::Zero, 0, {});
        return zero_id;
    };
    std::vector<NodeId> leaf_ids(nodes_.size(), kNone);
    std::function<NodeId(NodeId, std::size_t)> unroll = [&](NodeId id, std::size_t depth) -> NodeId {
        const auto &n = nodes_[id];
        if (!is_internal(n.kind)) {
            if (leaf_ids[id] == kNone)
                leaf_ids[id] = emit(n.kind, n.leaf, {});
            return leaf_ids[id];
        }
        if (depth == 0) {
            out.truncated_ = true;
            return zero_node();
        }
        if (auto it = memo.find({id, depth}); it != memo.end())
            return it->second;
        std::vector<NodeId> kids;
        bool zero = false;
        for (NodeId c : n.children) {
            const NodeId k = unroll(resolve(c), depth - 1);
            if (out.nodes_[k].kind == NodeKind::Zero) {
                zero = zero || n.kind == NodeKind::And;
                continue;
            }
            kids.push_back(k);
        }
        NodeId result;
        if (zero || kids.empty())
            result = zero_node();
        else if (kids.size() == 1)
            result = kids[0];
        else
            result = emit(n.kind, 0, kids);
        memo[{id, depth}] = result;
        return result;
    };
    const std::size_t depth = std::max<std::size_t>(unroll_depth, 1);
    for (auto &k : keep)
        k = unroll(resolve(k), depth);
    const NodeId r = unroll(resolve(root), depth);
    // The root must be the last node.
    if (r != out.nodes_.size() - 1) {
        const Circuit::Node copy = out.nodes_[r];
        if (is_internal(copy.kind)) {
            std::vector<NodeId> kids(out.children_.begin() + copy.first,
                                     out.children_.begin() + copy.first + copy.count);
            emit(copy.kind, 0, kids);
        } else {
            out.nodes_.push_back(copy);
        }
    }
    return out;
}

namespace {

void check_env(const Circuit &c, const LeafValues &env) {
    if (env.weight.size() != c.weight_leaves().size() || env.neural.size() != c.neural_leaves().size())
        throw EvalError("leaf valuation does not match the circuit's leaf tables");
}

double leaf_value(const Circuit::Node &n, const LeafValues &env) {
    switch (n.kind) {
    case NodeKind::WeightLeaf: return env.weight[n.leaf];
    case NodeKind::NeuralLeaf: return env.neural[n.leaf];
    case NodeKind::One: return 1.0;
    default: return 0.0;
    }
}

double log_sum_exp(std::span<const NodeId> kids, const std::vector<double> &v) {
    double hi = -std::numeric_limits<double>::infinity();
    for (NodeId k : kids)
        hi = std::max(hi, v[k]);
    if (hi == -std::numeric_limits<double>::infinity())
        return hi;
    double sum = 0.0;
    for (NodeId k : kids)
        sum += std::exp(v[k] - hi);
    return hi + std::log(sum);
}

} // namespace

ForwardPass forward(const Circuit &c, const LeafValues &env, Semiring semiring) {
    check_env(c, env);
    ForwardPass pass;
    pass.semiring = semiring;
    pass.values.resize(c.size());
    if (semiring == Semiring::Viterbi)
        pass.choice.assign(c.size(), 0);
    for (NodeId id = 0; id < c.size(); ++id) {
        const auto &n = c.node(id);
        const auto kids = c.children(id);
        double v = 0.0;
        switch (n.kind) {
        case NodeKind::And:
            if (semiring == Semiring::Log) {
                v = 0.0;
                for (NodeId k : kids)
                    v += pass.values[k];
            } else {
                v = 1.0;
                for (NodeId k : kids)
                    v *= pass.values[k];
            }
            break;
        case NodeKind::Or:
            if (semiring == Semiring::Linear) {
                for (NodeId k : kids)
                    v += pass.values[k];
            } else if (semiring == Semiring::Log) {
                v = log_sum_exp(kids, pass.values);
            } else {
                std::uint32_t best = 0;
                v = kids.empty() ? 0.0 : pass.values[kids[0]];
                for (std::uint32_t i = 1; i < kids.size(); ++i)
                    if (pass.values[kids[i]] > v) {
                        v = pass.values[kids[i]];
                        best = i;
                    }
                pass.choice[id] = best;
            }
            break;
        default:
            v = leaf_value(n, env);
            if (semiring == Semiring::Log)
                v = std::log(v);
            break;
        }
        pass.values[id] = v;
    }
    return pass;
}

double eval(const Circuit &c, const LeafValues &env, Semiring semiring) {
    return forward(c, env, semiring).root_value();
}

Number eval_exact(const Circuit &c, const std::vector<Number> &weights) {
    if (weights.size() != c.weight_leaves().size())
        throw EvalError("leaf valuation does not match the circuit's leaf tables");
    if (!c.neural_leaves().empty())
        throw EvalError("exact evaluation needs a circuit without neural leaves");
    std::vector<Number> v(c.size());
    for (NodeId id = 0; id < c.size(); ++id) {
        const auto &n = c.node(id);
        switch (n.kind) {
        case NodeKind::And:
            v[id] = Number(1);
            for (NodeId k : c.children(id))
                v[id] = v[id] * v[k];
            break;
        case NodeKind::Or:
            v[id] = Number(0);
            for (NodeId k : c.children(id))
                v[id] = v[id] + v[k];
            break;
        case NodeKind::WeightLeaf: v[id] = weights[n.leaf]; break;
        case NodeKind::One: v[id] = Number(1); break;
        default: v[id] = Number(0); break;
        }
    }
    return v.back();
}

namespace {

LeafGradients gather(const Circuit &c, const std::vector<double> &adjoint) {
    LeafGradients g;
    g.weight.assign(c.weight_leaves().size(), 0.0);
    g.neural.assign(c.neural_leaves().size(), 0.0);
    for (NodeId id = 0; id < c.size(); ++id) {
        const auto &n = c.node(id);
        if (n.kind == NodeKind::WeightLeaf)
            g.weight[n.leaf] += adjoint[id];
        else if (n.kind == NodeKind::NeuralLeaf)
            g.neural[n.leaf] += adjoint[id];
    }
    return g;
}

void check_pass(const Circuit &c, const ForwardPass &pass, Semiring expected) {
    if (pass.values.size() != c.size())
        throw EvalError("backward pass requires a forward pass over the same circuit");
    if (pass.semiring != expected)
        throw EvalError("backward pass requires a forward pass in the matching semiring");
}

} // namespace

LeafGradients backward(const Circuit &c, const ForwardPass &pass) {
    check_pass(c, pass, Semiring::Linear);
    std::vector<double> adj(c.size(), 0.0);
    adj[c.root()] = 1.0;
    std::vector<double> prefix;
    for (NodeId id = static_cast<NodeId>(c.size()); id-- > 0;) {
        const double a = adj[id];
        if (a == 0.0)
            continue;
        const auto &n = c.node(id);
        const auto kids = c.children(id);
        if (n.kind == NodeKind::Or) {
            for (NodeId k : kids)
                adj[k] += a;
        } else if (n.kind == NodeKind::And) {
            // Product of the siblings via prefix and suffix products (robust to zeros).
            prefix.assign(kids.size() + 1, 1.0);
            for (std::size_t i = 0; i < kids.size(); ++i)
                prefix[i + 1] = prefix[i] * pass.values[kids[i]];
            double suffix = 1.0;
            for (std::size_t i = kids.size(); i-- > 0;) {
                adj[kids[i]] += a * prefix[i] * suffix;
                suffix *= pass.values[kids[i]];
            }
        }
    }
    return gather(c, adj);
}

LeafGradients backward_log(const Circuit &c, const ForwardPass &pass) {
    check_pass(c, pass, Semiring::Log);
    // rel[n] = (d root / d n) * n / root: the share of the root mass flowing through n.
    std::vector<double> rel(c.size(), 0.0);
    if (pass.root_value() == -std::numeric_limits<double>::infinity())
        return gather(c, rel);
    rel[c.root()] = 1.0;
    for (NodeId id = static_cast<NodeId>(c.size()); id-- > 0;) {
        const double r = rel[id];
        if (r == 0.0)
            continue;
        const auto &n = c.node(id);
        const auto kids = c.children(id);
        if (n.kind == NodeKind::Or) {
            for (NodeId k : kids)
                rel[k] += r * std::exp(pass.values[k] - pass.values[id]);
        } else if (n.kind == NodeKind::And) {
            for (NodeId k : kids)
                rel[k] += r;
        }
    }
    // d log root / d leaf = rel[leaf] / leaf.
    for (NodeId id = 0; id < c.size(); ++id) {
        const auto &n = c.node(id);
        if (n.kind == NodeKind::WeightLeaf || n.kind == NodeKind::NeuralLeaf) {
            const double lv = pass.values[id];
            rel[id] = lv == -std::numeric_limits<double>::infinity() ? 0.0 : rel[id] / std::exp(lv);
        }
    }
    return gather(c, rel);
}

BestDerivation most_probable_derivation(const Circuit &c, const ForwardPass &viterbi, NodeId from) {
    if (viterbi.semiring != Semiring::Viterbi || viterbi.values.size() != c.size())
        throw EvalError("most probable derivation requires a Viterbi pass over the same circuit");
    BestDerivation best;
    best.value = viterbi.values[from];
    std::vector<NodeId> stack{from};
    while (!stack.empty()) {
        const NodeId id = stack.back();
        stack.pop_back();
        const auto &n = c.node(id);
        const auto kids = c.children(id);
        switch (n.kind) {
        case NodeKind::And:
            for (std::size_t i = kids.size(); i-- > 0;)
                stack.push_back(kids[i]);
            break;
        case NodeKind::Or:
            if (!kids.empty())
                stack.push_back(kids[viterbi.choice[id]]);
            break;
        case NodeKind::WeightLeaf:
        case NodeKind::NeuralLeaf: best.trace.push_back({n.kind, n.leaf}); break;
        default: break;
        }
    }
    return best;
}

BestDerivation most_probable_derivation(const Circuit &c, const LeafValues &env) {
    const ForwardPass pass = forward(c, env, Semiring::Viterbi);
    return most_probable_derivation(c, pass, c.root());
}

double replay(const std::vector<TraceStep> &trace, const LeafValues &env) {
    double v = 1.0;
    for (const auto &s : trace)
        v *= s.kind == NodeKind::WeightLeaf ? env.weight.at(s.leaf) : env.neural.at(s.leaf);
    return v;
}

std::vector<std::vector<TraceStep>> enumerate_expansions(const Circuit &c, std::size_t limit) {
    std::vector<std::vector<std::vector<TraceStep>>> sets(c.size());
    for (NodeId id = 0; id < c.size(); ++id) {
        const auto &n = c.node(id);
        const auto kids = c.children(id);
        auto &out = sets[id];
        switch (n.kind) {
        case NodeKind::WeightLeaf:
        case NodeKind::NeuralLeaf: out.push_back({TraceStep{n.kind, n.leaf}}); break;
        case NodeKind::One: out.emplace_back(); break;
        case NodeKind::Zero: break;
        case NodeKind::Or:
            for (NodeId k : kids) {
                out.insert(out.end(), sets[k].begin(), sets[k].end());
                if (out.size() > limit)
                    throw EvalError("too many circuit expansions");
            }
            break;
        case NodeKind::And:
            out.emplace_back();
            for (NodeId k : kids) {
                std::vector<std::vector<TraceStep>> next;
                for (const auto &a : out)
                    for (const auto &b : sets[k]) {
                        auto merged = a;
                        merged.insert(merged.end(), b.begin(), b.end());
                        next.push_back(std::move(merged));
                        if (next.size() > limit)
                            throw EvalError("too many circuit expansions");
                    }
                out = std::move(next);
            }
            break;
        }
    }
    auto result = std::move(sets[c.root()]);
    for (auto &e : result)
        std::sort(e.begin(), e.end());
    return result;
}

std::string to_dot(const Circuit &c, const std::function<std::string(NodeKind, std::uint32_t)> &leaf_label) {
    auto escape = [](const std::string &s) {
        std::string out;
        for (char ch : s) {
            if (ch == '"' || ch == '\\')
                out += '\\';
            out += ch;
        }
        return out;
    };
    std::ostringstream out;
    out << "digraph circuit {\n  rankdir=BT;\n";
    for (NodeId id = 0; id < c.size(); ++id) {
        const auto &n = c.node(id);
        out << "  n" << id << " [";
        switch (n.kind) {
        case NodeKind::And: out << "label=\"AND\",shape=box"; break;
        case NodeKind::Or: out << "label=\"OR\",shape=ellipse"; break;
        case NodeKind::One: out << "label=\"1\",shape=plaintext"; break;
        case NodeKind::Zero: out << "label=\"0\",shape=plaintext"; break;
        default: out << "label=\"" << escape(leaf_label(n.kind, n.leaf)) << "\",shape=note"; break;
        }
        if (id == c.root())
            out << ",peripheries=2";
        out << "];\n";
    }
    for (NodeId id = 0; id < c.size(); ++id)
        for (NodeId k : c.children(id))
            out << "  n" << k << " -> n" << id << ";\n";
    out << "}\n";
    return out.str();
}

} // namespace stochlog
