#pragma once

#include "stochlog/term.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace stochlog {

using NodeId = std::uint32_t;

enum class NodeKind : std::uint8_t { And, Or, WeightLeaf, NeuralLeaf, One, Zero };

/// Probability of rule `slot` in rule group `group`.
struct WeightRef {
    std::uint32_t group = 0;
    std::uint32_t slot = 0;
    friend bool operator==(const WeightRef &, const WeightRef &) = default;
};

/// Probability that `model` assigns to flattened output `output` given ground `inputs`.
struct NeuralRef {
    Symbol model = 0;
    std::vector<Term> inputs;
    std::uint32_t output = 0;
    friend bool operator==(const NeuralRef &, const NeuralRef &) = default;
};

/// Immutable AND-OR DAG. Nodes are stored in topological order (children
/// before parents); the root is the last node.
class Circuit {
public:
    struct Node {
        NodeKind kind = NodeKind::Zero;
        std::uint32_t first = 0; // offset into the child array
        std::uint32_t count = 0;
        std::uint32_t leaf = 0; // index into the weight or neural leaf table
    };

    std::size_t size() const { return nodes_.size(); }
    NodeId root() const { return static_cast<NodeId>(nodes_.size() - 1); }
    const Node &node(NodeId id) const { return nodes_[id]; }
    std::span<const NodeId> children(NodeId id) const {
        return {children_.data() + nodes_[id].first, nodes_[id].count};
    }
    const std::vector<WeightRef> &weight_leaves() const { return weight_leaves_; }
    const std::vector<NeuralRef> &neural_leaves() const { return neural_leaves_; }
    /// Set when derivations were cut by a depth limit.
    bool truncated() const { return truncated_; }
    std::size_t count(NodeKind kind) const;

private:
    std::vector<Node> nodes_;
    std::vector<NodeId> children_;
    std::vector<WeightRef> weight_leaves_;
    std::vector<NeuralRef> neural_leaves_;
    bool truncated_ = false;

    friend class CircuitBuilder;
};

/// Incremental construction with constant folding (One/Zero), shared leaves,
/// optional structural hash-consing of internal nodes, and OR placeholders
/// whose children are supplied later (for tabled answers).
class CircuitBuilder {
public:
    explicit CircuitBuilder(bool hash_cons = true);

    NodeId one() const { return kOne; }
    NodeId zero() const { return kZero; }
    NodeId weight_leaf(const WeightRef &ref);
    NodeId neural_leaf(const NeuralRef &ref);
    NodeId and_node(std::vector<NodeId> children);
    NodeId or_node(std::vector<NodeId> children);
    NodeId placeholder();
    /// Sets the children of a placeholder (it behaves as an OR node).
    void fill(NodeId placeholder, std::vector<NodeId> children);
    std::size_t size() const { return nodes_.size(); }

    /// Keeps the nodes reachable from `root`, forwards single-child OR nodes,
    /// renumbers topologically and returns the circuit. `keep` ids are remapped
    /// in place. Cyclic graphs are unrolled to `unroll_depth` levels, with cut
    /// branches contributing zero and setting the truncation flag.
    Circuit finish(NodeId root, std::vector<NodeId> &keep, bool truncated, std::size_t unroll_depth);

private:
    static constexpr NodeId kZero = 0;
    static constexpr NodeId kOne = 1;

    struct BuildNode {
        NodeKind kind;
        std::vector<NodeId> children;
        std::uint32_t leaf = 0;
    };
    struct KeyHash {
        std::size_t operator()(const std::pair<NodeKind, std::vector<NodeId>> &k) const;
    };
    struct NeuralHash {
        std::size_t operator()(const NeuralRef &r) const;
    };
    struct WeightHash {
        std::size_t operator()(const WeightRef &r) const { return (std::size_t{r.group} << 20) ^ r.slot; }
    };

    NodeId intern_node(NodeKind kind, std::vector<NodeId> children);

    bool hash_cons_;
    std::vector<BuildNode> nodes_;
    std::vector<WeightRef> weight_leaves_;
    std::vector<NeuralRef> neural_leaves_;
    std::unordered_map<WeightRef, NodeId, WeightHash> weight_index_;
    std::unordered_map<NeuralRef, NodeId, NeuralHash> neural_index_;
    std::unordered_map<std::pair<NodeKind, std::vector<NodeId>>, NodeId, KeyHash> internal_index_;
};

/// Leaf valuation: probabilities of the circuit's weight and neural leaves.
struct LeafValues {
    std::vector<double> weight;
    std::vector<double> neural;
};

enum class Semiring {
    Linear,  // (+, x) on probabilities
    Log,     // (+, x) on log-probabilities, log-sum-exp at OR nodes
    Viterbi, // (max, x) on probabilities, with argmax witnesses
};

/// Per-node values of one bottom-up pass. Log passes hold log-values.
struct ForwardPass {
    Semiring semiring = Semiring::Linear;
    std::vector<double> values;
    std::vector<std::uint32_t> choice; // Viterbi: index of the best child of each OR node
    double root_value() const { return values.back(); }
};

ForwardPass forward(const Circuit &c, const LeafValues &env, Semiring semiring);
/// Root value in the semiring's own representation (log-probability for Log).
double eval(const Circuit &c, const LeafValues &env, Semiring semiring);

/// Exact rational (+, x) evaluation of a circuit without neural leaves.
Number eval_exact(const Circuit &c, const std::vector<Number> &weights);

/// Gradients indexed like the leaf tables.
struct LeafGradients {
    std::vector<double> weight;
    std::vector<double> neural;
};

/// d(root value)/d(leaf value) from a Linear pass, summed over all paths.
LeafGradients backward(const Circuit &c, const ForwardPass &pass);
/// d(log root value)/d(leaf value) from a Log pass. Zero-probability roots and
/// zero-valued leaves get zero gradient.
LeafGradients backward_log(const Circuit &c, const ForwardPass &pass);

struct TraceStep {
    NodeKind kind; // WeightLeaf or NeuralLeaf
    std::uint32_t leaf;
    friend bool operator==(const TraceStep &, const TraceStep &) = default;
    friend bool operator<(const TraceStep &a, const TraceStep &b) {
        return a.kind != b.kind ? a.kind < b.kind : a.leaf < b.leaf;
    }
};

/// The most probable derivation below `from` (the root by default): its
/// (max, x) value and its leaves in depth-first preorder. Ties between OR
/// children go to the lowest child index.
struct BestDerivation {
    double value = 0.0;
    std::vector<TraceStep> trace;
};
BestDerivation most_probable_derivation(const Circuit &c, const LeafValues &env);
BestDerivation most_probable_derivation(const Circuit &c, const ForwardPass &viterbi, NodeId from);
/// Product of the trace's leaf values.
double replay(const std::vector<TraceStep> &trace, const LeafValues &env);

/// All complete root expansions as sorted leaf multisets (One leaves omitted).
/// Throws EvalError when more than `limit` expansions exist.
std::vector<std::vector<TraceStep>> enumerate_expansions(const Circuit &c, std::size_t limit = 1000000);

/// Graphviz rendering; `leaf_label` names each leaf.
std::string to_dot(const Circuit &c, const std::function<std::string(NodeKind, std::uint32_t)> &leaf_label);

} // namespace stochlog
