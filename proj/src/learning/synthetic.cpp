#include "stochlog/synthetic.hpp"

#include "stochlog/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>

namespace stochlog {

namespace {

Term goal(const char *functor, long value) { return Term::compound(functor, {Term::integer(value)}); }

std::vector<std::size_t> random_brackets(std::size_t pairs, std::mt19937_64 &rng) {
    std::vector<std::size_t> seq(2 * pairs, 1);
    std::fill(seq.begin(), seq.begin() + static_cast<long>(pairs), 0);
    for (;;) {
        std::shuffle(seq.begin(), seq.end(), rng);
        long depth = 0;
        bool ok = true;
        for (std::size_t b : seq) {
            depth += b == 0 ? 1 : -1;
            ok = ok && depth >= 0;
        }
        if (ok)
            return seq;
    }
}

} // namespace

TokenFactory::TokenFactory(std::string prefix, std::size_t classes, std::size_t dim, double noise,
                           std::uint64_t seed)
    : prefix_(std::move(prefix)), classes_(classes), dim_(dim), noise_(0.0, noise), rng_(seed) {
    if (dim < classes)
        throw ModelError("feature dimension must be at least the number of classes");
}

Term TokenFactory::make(std::size_t cls) {
    auto vec = std::make_shared<FeatureVector>();
    vec->id = prefix_ + std::to_string(tokens_.size());
    vec->values.resize(dim_);
    for (std::size_t i = 0; i < dim_; ++i)
        vec->values[i] = (i == cls ? 1.0 : 0.0) + noise_(rng_);
    Term t = Term::feature(std::move(vec));
    tokens_.emplace_back(t, cls);
    return t;
}

SyntheticTask make_addition_task(std::size_t n_train, std::size_t n_test, std::size_t dim, double noise,
                                 std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> digit(0, 9);
    TokenFactory train_tokens("tr", 10, dim, noise, seed + 1);
    TokenFactory test_tokens("te", 10, dim, noise, seed + 2);
    SyntheticTask task;
    auto fill = [&](std::vector<QueryInstance> &out, TokenFactory &f, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t a = digit(rng), b = digit(rng);
            QueryInstance q;
            q.goal = goal("addition", static_cast<long>(a + b));
            q.sequence = {f.make(a), f.make(b)};
            out.push_back(std::move(q));
        }
    };
    fill(task.train, train_tokens, n_train);
    fill(task.test, test_tokens, n_test);
    task.test_tokens = test_tokens.tokens();
    return task;
}

SyntheticTask make_parentheses_task(std::size_t n_train, std::size_t n_test, std::size_t max_length,
                                    std::size_t dim, double noise, std::uint64_t seed) {
    if (max_length < 2)
        throw TrainingError("parentheses sequences need length at least 2");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pairs(1, max_length / 2);
    TokenFactory train_tokens("ptr", 2, dim, noise, seed + 1);
    TokenFactory test_tokens("pte", 2, dim, noise, seed + 2);
    SyntheticTask task;
    auto fill = [&](std::vector<QueryInstance> &out, TokenFactory &f, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            QueryInstance q;
            q.goal = Term::atom("s");
            for (std::size_t b : random_brackets(pairs(rng), rng)) {
                q.sequence.push_back(f.make(b));
                q.gold_trace.push_back("bracket_nn(" + to_string(q.sequence.back()) + ")[" + std::to_string(b) + "]");
            }
            out.push_back(std::move(q));
        }
    };
    fill(task.train, train_tokens, n_train);
    fill(task.test, test_tokens, n_test);
    task.test_tokens = test_tokens.tokens();
    return task;
}

SyntheticTask make_anbncn_task(std::size_t n_train, std::size_t n_test, std::size_t min_length,
                               std::size_t max_length, std::size_t dim, double noise, std::uint64_t seed) {
    std::vector<std::array<std::size_t, 3>> positive, negative;
    for (std::size_t k = 1; k <= max_length; ++k)
        for (std::size_t l = 1; k + l <= max_length; ++l)
            for (std::size_t m = 1; k + l + m <= max_length; ++m) {
                if (k + l + m < std::max<std::size_t>(min_length, 3))
                    continue;
                (k == l && l == m ? positive : negative).push_back({k, l, m});
            }
    if (positive.empty() || negative.empty())
        throw TrainingError("length range admits no positive or no negative sequences");
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    TokenFactory train_tokens("atr", 3, dim, noise, seed + 1);
    TokenFactory test_tokens("ate", 3, dim, noise, seed + 2);
    SyntheticTask task;
    auto fill = [&](std::vector<QueryInstance> &out, TokenFactory &f, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            const bool pos = coin(rng);
            const auto &pool = pos ? positive : negative;
            const auto &blocks = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
            QueryInstance q;
            q.goal = goal("s", pos ? 1 : 0);
            for (std::size_t letter = 0; letter < 3; ++letter)
                for (std::size_t j = 0; j < blocks[letter]; ++j)
                    q.sequence.push_back(f.make(letter));
            out.push_back(std::move(q));
        }
    };
    fill(task.train, train_tokens, n_train);
    fill(task.test, test_tokens, n_test);
    task.test_tokens = test_tokens.tokens();
    return task;
}

double token_accuracy(const ParamStore &params, Symbol model,
                      const std::vector<std::pair<Term, std::size_t>> &tokens) {
    if (tokens.empty())
        return 0.0;
    const Model &m = params.model(model);
    std::vector<double> probs(m.output_size());
    std::size_t correct = 0;
    for (const auto &[token, cls] : tokens) {
        m.forward(std::span<const Term>(&token, 1), probs);
        correct += static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin()) == cls;
    }
    return static_cast<double>(correct) / static_cast<double>(tokens.size());
}

void write_dataset(const std::vector<QueryInstance> &data, const std::string &jsonl_path,
                   const std::string &csv_path) {
    std::ofstream jsonl(jsonl_path);
    std::ofstream csv(csv_path);
    if (!jsonl || !csv)
        throw TrainingError("cannot write dataset files " + jsonl_path + ", " + csv_path);
    csv << std::setprecision(std::numeric_limits<double>::max_digits10);
    std::set<std::string> written;
    for (const auto &q : data) {
        nlohmann::json j;
        j["goal"] = to_string(q.goal);
        j["sequence"] = nlohmann::json::array();
        for (const auto &t : q.sequence) {
            if (t.is_feature()) {
                const auto &f = t.feature_value();
                j["sequence"].push_back("vec:" + f.id);
                if (written.insert(f.id).second) {
                    csv << f.id;
                    for (double v : f.values)
                        csv << "," << v;
                    csv << "\n";
                }
            } else {
                j["sequence"].push_back(to_string(t));
            }
        }
        j["target"] = q.target;
        if (q.query)
            j["query"] = to_string(*q.query);
        if (!q.gold_trace.empty())
            j["trace"] = q.gold_trace;
        jsonl << j.dump() << "\n";
    }
}

} // namespace stochlog
