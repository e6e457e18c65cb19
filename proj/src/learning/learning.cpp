#include "stochlog/learning.hpp"

#include "stochlog/error.hpp"
#include "stochlog/reader.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

namespace stochlog {

namespace {

constexpr double kMinProbability = 1e-30;

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// Everything before the first `(` or `#`: the model or group a label belongs to.
std::string label_family(const std::string &label) {
    return label.substr(0, label.find_first_of("(#"));
}

Term json_token(const nlohmann::json &j, const FeatureTable &features) {
    if (j.is_string())
        return parse_token(j.get<std::string>(), features);
    if (j.is_number_integer())
        return Term::integer(j.get<long>());
    throw TrainingError("sequence items must be strings or integers, got " + j.dump());
}

} // namespace

FeatureTable load_features(const std::string &csv_path) {
    std::ifstream in(csv_path);
    if (!in)
        throw TrainingError("cannot open " + csv_path);
    FeatureTable table;
    std::string line;
    std::size_t lineno = 0, dim = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty())
            continue;
        std::istringstream fields(line);
        std::string id, cell;
        std::getline(fields, id, ',');
        auto vec = std::make_shared<FeatureVector>();
        vec->id = trim(id);
        while (std::getline(fields, cell, ',')) {
            char *end = nullptr;
            const std::string c = trim(cell);
            const double v = std::strtod(c.c_str(), &end);
            if (c.empty() || end != c.c_str() + c.size() || !std::isfinite(v))
                throw TrainingError(csv_path + ":" + std::to_string(lineno) + ": bad feature value '" + c + "'");
            vec->values.push_back(v);
        }
        if (dim == 0)
            dim = vec->values.size();
        if (vec->values.empty() || vec->values.size() != dim)
            throw TrainingError(csv_path + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                                " values");
        table[vec->id] = std::move(vec);
    }
    return table;
}

Term parse_token(const std::string &text, const FeatureTable &features) {
    if (text.rfind("tok:", 0) == 0)
        return Term::atom(text.substr(4));
    if (text.rfind("vec:", 0) == 0) {
        const auto it = features.find(text.substr(4));
        if (it == features.end())
            throw TrainingError("unknown feature vector " + text);
        return Term::feature(it->second);
    }
    return read_term(text);
}

std::vector<QueryInstance> load_dataset(const std::string &jsonl_path, const FeatureTable &features) {
    std::ifstream in(jsonl_path);
    if (!in)
        throw TrainingError("cannot open " + jsonl_path);
    std::vector<QueryInstance> data;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty())
            continue;
        const std::string where = jsonl_path + ":" + std::to_string(lineno);
        try {
            const auto j = nlohmann::json::parse(line);
            QueryInstance q;
            q.goal = read_term(j.at("goal").get<std::string>());
            for (const auto &t : j.at("sequence"))
                q.sequence.push_back(json_token(t, features));
            q.target = j.value("target", 1.0);
            if (!(q.target >= 0.0 && q.target <= 1.0))
                throw TrainingError("target must lie in [0, 1]");
            if (j.contains("query"))
                q.query = read_term(j.at("query").get<std::string>());
            if (j.contains("trace"))
                q.gold_trace = j.at("trace").get<std::vector<std::string>>();
            data.push_back(std::move(q));
        } catch (const nlohmann::json::exception &e) {
            throw TrainingError(where + ": " + e.what());
        } catch (const Error &e) {
            throw TrainingError(where + ": " + e.what());
        }
    }
    return data;
}

Loss parse_loss(const std::string &name) {
    if (name == "nll")
        return Loss::NegativeLogLikelihood;
    if (name == "squared" || name == "mse")
        return Loss::Squared;
    if (name == "cross-entropy" || name == "ce")
        return Loss::CrossEntropy;
    throw TrainingError("unknown loss '" + name + "' (nll, squared, cross-entropy)");
}

std::pair<double, double> loss_and_log_gradient(Loss loss, double p, double t) {
    switch (loss) {
    case Loss::NegativeLogLikelihood:
        if (p < kMinProbability)
            return {-t * std::log(kMinProbability), 0.0};
        return {-t * std::log(p), -t};
    case Loss::Squared: return {(p - t) * (p - t), 2.0 * (p - t) * p};
    case Loss::CrossEntropy: {
        const double pc = std::clamp(p, kMinProbability, 1.0 - 1e-15);
        const double value = -t * std::log(pc) - (1.0 - t) * std::log(1.0 - pc);
        if (p < kMinProbability)
            return {value, 0.0};
        return {value, -t + (1.0 - t) * pc / (1.0 - pc)};
    }
    }
    return {0.0, 0.0};
}

std::vector<Forest> build_forests(const Program &program, const std::vector<QueryInstance> &data,
                                  const ResolveOptions &options, bool parallel) {
    std::vector<Forest> forests(data.size());
    const long n = static_cast<long>(data.size());
    std::string error;
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
    for (long i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            forests[k] = derive(program, data[k].goal, data[k].sequence, options);
        } catch (const std::exception &e) {
#pragma omp critical(stochlog_forest_error)
            if (error.empty())
                error = "instance " + std::to_string(k) + ": " + e.what();
        }
    }
    if (!error.empty())
        throw TrainingError(error);
    return forests;
}

double forest_probability(const ParamStore &params, NeuralCache &cache, const Forest &forest) {
    return eval(forest.circuit, leaf_values(params, cache, forest.circuit), Semiring::Linear);
}

double query_probability(const ParamStore &params, const QueryInstance &q, const ResolveOptions &options) {
    const Forest f = derive(params.program(), q.goal, q.sequence, options);
    if (f.truncated && options.strict_single_answer)
        throw EvalError("derivation of " + to_string(q.goal) + " was truncated at the depth limit");
    NeuralCache cache(params);
    return forest_probability(params, cache, f);
}

BatchResult batch_gradient(const ParamStore &params, NeuralCache &cache, const std::vector<Forest> &forests,
                           const std::vector<QueryInstance> &data, const std::vector<std::size_t> &indices,
                           Loss loss, bool parallel) {
    std::vector<const Circuit *> circuits;
    for (std::size_t i : indices)
        circuits.push_back(&forests[i].circuit);
    cache.precompute(circuits, parallel);

    const long n = static_cast<long>(indices.size());
    std::vector<double> losses(indices.size(), 0.0);
    std::vector<double> probs(indices.size(), 0.0);
    std::vector<Gradients> grads(indices.size());
    std::string error;
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
    for (long j = 0; j < n; ++j) {
        const auto k = static_cast<std::size_t>(j);
        const std::size_t i = indices[k];
        try {
            const Circuit &c = forests[i].circuit;
            const ForwardPass pass = forward(c, leaf_values(params, cache, c), Semiring::Log);
            const double p = std::exp(pass.root_value());
            const auto [value, dlogp] = loss_and_log_gradient(loss, p, data[i].target);
            probs[k] = p;
            losses[k] = value;
            grads[k] = Gradients::zeros_like(params);
            if (dlogp != 0.0)
                accumulate_gradients(params, cache, c, backward_log(c, pass), dlogp, grads[k]);
        } catch (const std::exception &e) {
#pragma omp critical(stochlog_batch_error)
            if (error.empty())
                error = "instance " + std::to_string(i) + ": " + e.what();
        }
    }
    if (!error.empty())
        throw TrainingError(error);

    BatchResult result;
    result.gradients = Gradients::zeros_like(params);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (!std::isfinite(losses[k]))
            throw TrainingError("non-finite loss on instance " + std::to_string(indices[k]) + " (" +
                                to_string(data[indices[k]].goal) + ")");
        if (loss != Loss::Squared && probs[k] < kMinProbability && data[indices[k]].target > 0.0)
            std::cerr << "warning: instance " << indices[k] << " (" << to_string(data[indices[k]].goal)
                      << ") has probability zero; its loss is clamped\n";
        result.loss += losses[k];
        result.gradients.add(grads[k]);
    }
    return result;
}

std::vector<EpochRecord> train(ParamStore &params, const std::vector<QueryInstance> &data, const TrainConfig &cfg) {
    if (cfg.batch_size == 0)
        throw TrainingError("batch size must be at least 1");
    if (!(cfg.adam.learning_rate > 0.0))
        throw TrainingError("learning rate must be positive");
    params.check_models();
    std::vector<EpochRecord> history;
    if (cfg.epochs == 0)
        return history;
    if (data.empty())
        throw TrainingError("training data is empty");

    const std::vector<Forest> forests = build_forests(params.program(), data, cfg.resolve, cfg.parallel);
    for (std::size_t i = 0; i < forests.size(); ++i) {
        if (forests[i].truncated)
            std::cerr << "warning: derivation of instance " << i << " was truncated at the depth limit\n";
        params.register_inputs(forests[i].circuit);
    }

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    NeuralCache cache(params);
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::vector<std::size_t> batch(
                order.begin() + static_cast<long>(start),
                order.begin() + static_cast<long>(std::min(order.size(), start + cfg.batch_size)));
            cache.clear();
            const BatchResult r = batch_gradient(params, cache, forests, data, batch, cfg.loss, cfg.parallel);
            if (!std::isfinite(r.gradients.squared_norm()))
                throw TrainingError("non-finite gradient in epoch " + std::to_string(epoch));
            params.adam_step(r.gradients, cfg.adam);
            total += r.loss;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = total / static_cast<double>(data.size());
        if (cfg.eval_every && cfg.eval_data && epoch % cfg.eval_every == 0)
            rec.metric = evaluate(params, *cfg.eval_data, cfg.eval_metric, cfg.resolve);
        history.push_back(rec);
        if (cfg.on_epoch)
            cfg.on_epoch(rec);
    }
    return history;
}

std::string trace_label(const Program &program, const Circuit &c, const TraceStep &step) {
    if (step.kind == NodeKind::WeightLeaf) {
        const auto &w = c.weight_leaves().at(step.leaf);
        return program.groups().at(w.group).name() + "#" + std::to_string(w.slot);
    }
    const auto &n = c.neural_leaves().at(step.leaf);
    return symbol_name(n.model) + "(" + input_key(n.inputs) + ")[" + std::to_string(n.output) + "]";
}

std::vector<std::string> trace_labels(const Program &program, const Circuit &c, const std::vector<TraceStep> &trace) {
    std::vector<std::string> out;
    for (const auto &step : trace)
        out.push_back(trace_label(program, c, step));
    return out;
}

Term open_query(const Term &goal) {
    if (goal.is_atom())
        return goal;
    std::vector<Term> args;
    for (std::size_t i = 0; i < goal.arity(); ++i)
        args.push_back(Term::variable("A" + std::to_string(i)));
    return Term::compound(goal.functor(), std::move(args));
}

std::optional<Term> most_probable_answer(const ParamStore &params, NeuralCache &cache, const QueryInstance &q,
                                         const ResolveOptions &options) {
    const Term query = q.query ? *q.query : open_query(q.goal);
    const Forest f = derive(params.program(), query, q.sequence, options);
    if (f.answers.empty())
        return std::nullopt;
    const ForwardPass pass = forward(f.circuit, leaf_values(params, cache, f.circuit), Semiring::Linear);
    std::size_t best = 0;
    for (std::size_t i = 1; i < f.answers.size(); ++i)
        if (pass.values[f.answers[i].node] > pass.values[f.answers[best].node])
            best = i;
    if (!(pass.values[f.answers[best].node] > 0.0))
        return std::nullopt;
    return f.answers[best].goal;
}

double evaluate(const ParamStore &params, const std::vector<QueryInstance> &data, Metric metric,
                const ResolveOptions &options) {
    if (data.empty())
        return 0.0;
    NeuralCache cache(params);
    std::size_t correct = 0;
    for (const auto &q : data) {
        if (metric == Metric::AnswerAccuracy) {
            const auto answer = most_probable_answer(params, cache, q, options);
            correct += answer && *answer == q.goal;
            continue;
        }
        if (q.gold_trace.empty())
            throw TrainingError("parse accuracy needs gold traces, but instance " + to_string(q.goal) + " has none");
        const Forest f = derive(params.program(), q.goal, q.sequence, options);
        if (f.answers.empty())
            continue;
        const auto best = most_probable_derivation(f.circuit, leaf_values(params, cache, f.circuit));
        if (!(best.value > 0.0))
            continue;
        std::vector<std::string> families;
        for (const auto &label : q.gold_trace)
            families.push_back(label_family(label));
        std::vector<std::string> predicted;
        for (const auto &label : trace_labels(params.program(), f.circuit, best.trace))
            if (std::find(families.begin(), families.end(), label_family(label)) != families.end())
                predicted.push_back(label);
        std::vector<std::string> gold = q.gold_trace;
        std::sort(gold.begin(), gold.end());
        std::sort(predicted.begin(), predicted.end());
        correct += predicted == gold;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::string history_csv(const std::vector<EpochRecord> &history) {
    std::ostringstream out;
    out.precision(10);
    out << "epoch,loss,metric\n";
    for (const auto &r : history) {
        out << r.epoch << "," << r.loss << ",";
        if (r.metric)
            out << *r.metric;
        out << "\n";
    }
    return out.str();
}

} // namespace stochlog
