#pragma once

#include "stochlog/learning.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace stochlog {

/// Feature tokens that stand in for images: a one-hot class vector of dimension
/// `dim` plus Gaussian noise. Every call yields a new token with a unique id.
class TokenFactory {
public:
    TokenFactory(std::string prefix, std::size_t classes, std::size_t dim, double noise, std::uint64_t seed);

    Term make(std::size_t cls);
    /// Every token made so far with its generating class.
    const std::vector<std::pair<Term, std::size_t>> &tokens() const { return tokens_; }
    std::size_t dim() const { return dim_; }

private:
    std::string prefix_;
    std::size_t classes_, dim_;
    std::normal_distribution<double> noise_;
    std::mt19937_64 rng_;
    std::vector<std::pair<Term, std::size_t>> tokens_;
};

/// A generated task: training and test instances plus the tokens of the test
/// split labelled with the output index the model should predict.
struct SyntheticTask {
    std::vector<QueryInstance> train, test;
    std::vector<std::pair<Term, std::size_t>> test_tokens;
};

/// Single-digit addition for the `addition(N) --> number(N1), number(N2)` grammar:
/// goal `addition(a+b)` over two digit tokens.
SyntheticTask make_addition_task(std::size_t n_train, std::size_t n_test, std::size_t dim, double noise,
                                 std::uint64_t seed);

/// Well-formed bracket sequences of even length 2..max_length for the
/// parentheses grammar; gold traces label every token's bracket class.
SyntheticTask make_parentheses_task(std::size_t n_train, std::size_t n_test, std::size_t max_length,
                                    std::size_t dim, double noise, std::uint64_t seed);

/// Three-block sequences a^k b^l c^m with 3 <= k+l+m <= max_length; goal
/// `s(1)` when k = l = m (half of the instances) and `s(0)` otherwise.
SyntheticTask make_anbncn_task(std::size_t n_train, std::size_t n_test, std::size_t min_length,
                               std::size_t max_length, std::size_t dim, double noise, std::uint64_t seed);

/// Fraction of labelled tokens whose model argmax equals the label.
double token_accuracy(const ParamStore &params, Symbol model, const std::vector<std::pair<Term, std::size_t>> &tokens);

/// Writes instances as JSON lines and their feature tokens as a CSV matrix.
void write_dataset(const std::vector<QueryInstance> &data, const std::string &jsonl_path, const std::string &csv_path);

} // namespace stochlog
