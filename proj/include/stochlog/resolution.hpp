#pragma once

#include "stochlog/circuit.hpp"
#include "stochlog/program.hpp"

#include <string>
#include <vector>

namespace stochlog {

enum class Strategy {
    SLD, // plain depth-first resolution, no sharing of sub-derivations
    SLG, // linear tabling: one table per call variant and start position
};

struct ResolveOptions {
    Strategy strategy = Strategy::SLG;
    /// Bound on call nesting (and on tabling fixpoint rounds); 0 selects
    /// 10 * |sequence| + 50.
    std::size_t max_depth = 0;
    bool occurs_check = true;
    bool strict_single_answer = false;
};

/// One answer substitution of a derivation query, applied to the goal.
struct DerivedAnswer {
    Term goal;
    /// The sequence under the answer; differs from the input only for
    /// unknown-length queries, whose tokens start out as variables.
    std::vector<Term> tokens;
    NodeId node = 0; // circuit node summing this answer's derivations
};

/// Compiled derivations of derives(goal, sequence): the circuit's root sums
/// over all answers.
struct Forest {
    Circuit circuit;
    std::vector<DerivedAnswer> answers;
    bool truncated = false;
    /// Branches abandoned because a neural rule's inputs were still unbound
    /// when its body finished.
    std::size_t nonground_neural = 0;
    std::size_t tables = 0; // SLG call tables created
};

Forest derive(const Program &program, const Term &goal, const std::vector<Term> &tokens,
              const ResolveOptions &options = {});

/// Sums over every sequence of length 0..max_length (tokens are fresh variables).
Forest derive_unknown_length(const Program &program, const Term &goal, std::size_t max_length,
                             const ResolveOptions &options = {});

std::size_t default_depth_limit(std::size_t sequence_length);

/// Human-readable leaf names, e.g. `e/1#0 = 1/2` or `mnist(img3)[7]`.
std::string leaf_label(const Program &program, const Circuit &circuit, NodeKind kind, std::uint32_t leaf);

} // namespace stochlog
