#pragma once

#include "stochlog/circuit.hpp"
#include "stochlog/program.hpp"

#include <functional>

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace stochlog::testing {

inline std::string corpus_path(const std::string &name) { return std::string(STOCHLOG_CORPUS_DIR) + "/" + name; }

inline std::string read_file(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline Program load_corpus(const std::string &name) { return Program::parse(read_file(corpus_path(name))); }

/// Leaf values for tests: rule probabilities for fixed weights, uniform
/// probabilities for trainable groups, and a deterministic pseudo-random value
/// in (0.05, 0.95) for every neural leaf identity.
inline LeafValues test_env(const Program &program, const Circuit &c) {
    LeafValues env;
    for (const auto &w : c.weight_leaves()) {
        const auto &group = program.groups()[w.group];
        const auto &rule = program.rules()[group.rules[w.slot]];
        env.weight.push_back(group.kind == GroupKind::Trainable ? 1.0 / static_cast<double>(group.rules.size())
                                                                : rule.probability);
    }
    for (const auto &n : c.neural_leaves()) {
        std::string key = symbol_name(n.model) + "/" + std::to_string(n.output);
        for (const auto &t : n.inputs)
            key += "/" + to_string(t);
        const std::size_t h = std::hash<std::string>{}(key);
        env.neural.push_back(0.05 + 0.9 * static_cast<double>(h % 100003) / 100003.0);
    }
    return env;
}

} // namespace stochlog::testing
