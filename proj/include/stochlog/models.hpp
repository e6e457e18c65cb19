#pragma once

#include "stochlog/circuit.hpp"
#include "stochlog/program.hpp"

#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace stochlog {

/// Key of a ground input tuple, e.g. `(a,vec:7)`; used by table models and caches.
std::string input_key(std::span<const Term> inputs);

/// A probability backend for neural rules: ground inputs to a distribution over
/// the K flattened output values.
class Model {
public:
    Model(std::string name, std::size_t outputs) : name_(std::move(name)), outputs_(outputs) {}
    virtual ~Model() = default;

    const std::string &name() const { return name_; }
    std::size_t output_size() const { return outputs_; }
    virtual std::string kind() const = 0;

    std::vector<double> &parameters() { return params_; }
    const std::vector<double> &parameters() const { return params_; }

    /// Writes K probabilities into `out`.
    virtual void forward(std::span<const Term> inputs, std::span<double> out) const = 0;
    /// Adds d(loss)/d(parameters) to `grad` given d(loss)/d(probabilities)
    /// (`upstream`) and the probabilities from forward (`probs`).
    virtual void backward(std::span<const Term> inputs, std::span<const double> probs,
                          std::span<const double> upstream, std::span<double> grad) const = 0;

protected:
    std::string name_;
    std::size_t outputs_;
    std::vector<double> params_;
};

/// Fixed rows looked up by input key; no trainable parameters.
class FixedTableModel : public Model {
public:
    FixedTableModel(std::string name, std::size_t outputs) : Model(std::move(name), outputs) {}
    std::string kind() const override { return "fixed"; }
    void set_row(const std::string &key, std::vector<double> row);
    /// Row used for keys without an entry; without one, unknown keys are an error.
    void set_default(std::vector<double> row);
    const std::map<std::string, std::vector<double>> &rows() const { return rows_; }
    const std::vector<double> &default_row() const { return default_; }
    void forward(std::span<const Term> inputs, std::span<double> out) const override;
    void backward(std::span<const Term>, std::span<const double>, std::span<const double>,
                  std::span<double>) const override {}

private:
    std::map<std::string, std::vector<double>> rows_;
    std::vector<double> default_;
};

/// One trainable logit row per input key, softmax-normalized. Unknown keys get
/// the uniform distribution until `add_key` registers them.
class SoftmaxTableModel : public Model {
public:
    SoftmaxTableModel(std::string name, std::size_t outputs) : Model(std::move(name), outputs) {}
    std::string kind() const override { return "softmax"; }
    /// Adds a row with logits drawn uniformly from (-0.1, 0.1); returns false if present.
    bool add_key(const std::string &key, std::mt19937_64 &rng);
    const std::map<std::string, std::size_t> &keys() const { return keys_; }
    void forward(std::span<const Term> inputs, std::span<double> out) const override;
    void backward(std::span<const Term> inputs, std::span<const double> probs, std::span<const double> upstream,
                  std::span<double> grad) const override;

private:
    std::map<std::string, std::size_t> keys_; // key -> row
};

/// Feed-forward network over feature-vector inputs (concatenated): one tanh
/// hidden layer and a softmax output layer.
class DenseModel : public Model {
public:
    DenseModel(std::string name, std::size_t inputs, std::size_t hidden, std::size_t outputs);
    std::string kind() const override { return "dense"; }
    std::size_t input_size() const { return in_; }
    std::size_t hidden_size() const { return hidden_; }
    /// Xavier-style init: weights uniform in +-1/sqrt(fan_in), zero biases.
    void initialize(std::mt19937_64 &rng);
    void forward(std::span<const Term> inputs, std::span<double> out) const override;
    void backward(std::span<const Term> inputs, std::span<const double> probs, std::span<const double> upstream,
                  std::span<double> grad) const override;

private:
    std::vector<double> gather_input(std::span<const Term> inputs) const;
    void hidden_layer(const std::vector<double> &x, std::vector<double> &h) const;

    std::size_t in_, hidden_;
    // Layout: W1 (hidden x in), b1 (hidden), W2 (outputs x hidden), b2 (outputs).
};

void softmax(std::span<const double> logits, std::span<double> out);

struct Gradients;

/// Adam moments for one parameter vector.
struct AdamState {
    std::vector<double> m, v;
};

struct AdamConfig {
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// All learnable state: logits of trainable rule groups and the models used by
/// neural rules, plus optimizer moments.
class ParamStore {
public:
    /// Creates logits for every trainable group (uniform(-0.1, 0.1) from `seed`).
    /// Models are registered separately.
    explicit ParamStore(const Program &program, std::uint64_t seed = 42);

    const Program &program() const { return *program_; }
    std::mt19937_64 &rng() { return rng_; }

    void register_model(Symbol name, std::unique_ptr<Model> model);
    bool has_model(Symbol name) const { return models_.count(name) > 0; }
    Model &model(Symbol name);
    const Model &model(Symbol name) const;
    /// Throws ModelError naming the first model used by the program but not registered.
    void check_models() const;
    const std::map<Symbol, std::unique_ptr<Model>> &models() const { return models_; }

    /// Indexed by group id; empty for non-trainable groups.
    std::vector<double> &group_logits(std::size_t group) { return logits_[group]; }
    const std::vector<double> &group_logits(std::size_t group) const { return logits_[group]; }
    std::vector<double> group_probabilities(std::size_t group) const;

    /// Registers unseen input keys of softmax-table models used by `c`, drawing
    /// their initial logits from the store's generator.
    void register_inputs(const Circuit &c);

    std::uint64_t step() const { return step_; }
    /// One Adam update from summed gradients (same layout as the parameters).
    void adam_step(const Gradients &grads, const AdamConfig &cfg);

    /// Textual `key = v1 v2 ...` checkpoint with round-trip double precision.
    void save(const std::string &path) const;
    /// Loads a checkpoint written by `save`, replacing groups, models and moments.
    void load(const std::string &path);
    std::string serialize() const;
    void deserialize(const std::string &text);

private:
    const Program *program_;
    std::mt19937_64 rng_;
    std::vector<std::vector<double>> logits_;
    std::vector<AdamState> group_adam_;
    std::map<Symbol, std::unique_ptr<Model>> models_;
    std::map<Symbol, AdamState> model_adam_;
    std::uint64_t step_ = 0;
};

/// Gradient buffers shaped like a ParamStore's parameters.
struct Gradients {
    std::vector<std::vector<double>> groups;
    std::map<Symbol, std::vector<double>> models;

    static Gradients zeros_like(const ParamStore &params);
    void add(const Gradients &other, double scale = 1.0);
    double squared_norm() const;
};

/// Forward outputs of neural models per (model, inputs), valid until the next
/// parameter update.
class NeuralCache {
public:
    explicit NeuralCache(const ParamStore &params) : params_(&params) {}

    /// Computes (if needed) and returns the distribution for a neural leaf.
    const std::vector<double> &get(Symbol model, std::span<const Term> inputs);
    /// Fills the cache for every neural leaf of the given circuits; with
    /// `parallel`, distinct keys are evaluated concurrently.
    void precompute(std::span<const Circuit *const> circuits, bool parallel);
    void clear() { entries_.clear(); }
    std::size_t size() const { return entries_.size(); }

private:
    struct Entry {
        std::vector<Term> inputs;
        std::vector<double> probs;
    };
    const ParamStore *params_;
    std::map<std::pair<Symbol, std::string>, Entry> entries_;
};

/// Probability of every weight leaf and neural leaf of `c`.
LeafValues leaf_values(const ParamStore &params, NeuralCache &cache, const Circuit &c);

/// Chains d(loss)/d(leaf) through group softmaxes and model backward passes,
/// adding `scale` times the result into `out`.
void accumulate_gradients(const ParamStore &params, NeuralCache &cache, const Circuit &c,
                          const LeafGradients &leaf_grads, double scale, Gradients &out);

/// Model specification as used by the CLI and datasets, e.g. `mnist=dense:16:32`,
/// `ops=softmax`, `digits=fixed:table.csv`, `m=fixed` (uniform). The part after
/// `=` is `spec`.
std::unique_ptr<Model> make_model(const std::string &name, const std::string &spec, std::size_t outputs,
                                  std::mt19937_64 &rng);

} // namespace stochlog
