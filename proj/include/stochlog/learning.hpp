#pragma once

#include "stochlog/models.hpp"
#include "stochlog/resolution.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace stochlog {

/// One training or evaluation triple: goal, terminal sequence, target probability.
struct QueryInstance {
    Term goal;
    std::vector<Term> sequence;
    double target = 1.0;
    /// Goal with open arguments used for answer accuracy; derived from `goal` when absent.
    std::optional<Term> query;
    /// Gold derivation labels for parse accuracy (see `trace_labels`).
    std::vector<std::string> gold_trace;
};

/// Feature vectors by id, as read from a sidecar CSV (`id,v1,...,vd`).
using FeatureTable = std::map<std::string, std::shared_ptr<const FeatureVector>>;

FeatureTable load_features(const std::string &csv_path);

/// Dataset token text to a term: `tok:X` is the atom X, `vec:<id>` is the
/// feature vector <id>, anything else is read as a term.
Term parse_token(const std::string &text, const FeatureTable &features);

/// JSON-lines dataset: `{"goal": ..., "sequence": [...], "target": 1.0}` with
/// optional `"query"` and `"trace"` fields.
std::vector<QueryInstance> load_dataset(const std::string &jsonl_path, const FeatureTable &features);

enum class Loss { NegativeLogLikelihood, Squared, CrossEntropy };

Loss parse_loss(const std::string &name);
/// Loss of one instance and its derivative times P, d(loss)/d(log P).
std::pair<double, double> loss_and_log_gradient(Loss loss, double probability, double target);

enum class Metric { AnswerAccuracy, ParseAccuracy };

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;
    std::optional<double> metric;
};

struct TrainConfig {
    Loss loss = Loss::NegativeLogLikelihood;
    AdamConfig adam;
    std::size_t batch_size = 1;
    std::size_t epochs = 1;
    std::uint64_t seed = 42;
    ResolveOptions resolve;
    /// Use the OpenMP kernels for forest construction and batch gradients.
    bool parallel = false;
    /// Evaluate `eval_metric` on `eval_data` every this many epochs (0: never).
    std::size_t eval_every = 0;
    Metric eval_metric = Metric::AnswerAccuracy;
    const std::vector<QueryInstance> *eval_data = nullptr;
    /// Called after every epoch.
    std::function<void(const EpochRecord &)> on_epoch;
};

/// Forests are parameter-independent, so they are built once per instance and reused.
std::vector<Forest> build_forests(const Program &program, const std::vector<QueryInstance> &data,
                                  const ResolveOptions &options, bool parallel);

/// P(derives(goal, sequence)) under the current parameters.
double query_probability(const ParamStore &params, const QueryInstance &q, const ResolveOptions &options = {});
double forest_probability(const ParamStore &params, NeuralCache &cache, const Forest &forest);

struct BatchResult {
    double loss = 0.0;
    Gradients gradients;
};

/// Summed loss and parameter gradients over `indices`; the parallel kernel
/// reduces per-instance results in index order, so both paths agree exactly.
BatchResult batch_gradient(const ParamStore &params, NeuralCache &cache, const std::vector<Forest> &forests,
                           const std::vector<QueryInstance> &data, const std::vector<std::size_t> &indices,
                           Loss loss, bool parallel);

/// Runs mini-batch Adam over `data`; returns one record per epoch.
std::vector<EpochRecord> train(ParamStore &params, const std::vector<QueryInstance> &data, const TrainConfig &cfg);

/// Label of a derivation step: `name/arity#slot` for rule weights and
/// `model(inputs)[k]` for neural outputs.
std::string trace_label(const Program &program, const Circuit &c, const TraceStep &step);
std::vector<std::string> trace_labels(const Program &program, const Circuit &c, const std::vector<TraceStep> &trace);

/// Goal with every argument replaced by a fresh variable.
Term open_query(const Term &goal);

/// Most probable answer of `q.query` (or the opened goal) over the sequence.
std::optional<Term> most_probable_answer(const ParamStore &params, NeuralCache &cache, const QueryInstance &q,
                                         const ResolveOptions &options);

/// Fraction of instances that are correct under `metric`.
double evaluate(const ParamStore &params, const std::vector<QueryInstance> &data, Metric metric,
                const ResolveOptions &options = {});

std::string history_csv(const std::vector<EpochRecord> &history);

} // namespace stochlog
