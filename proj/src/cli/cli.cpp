#include "stochlog/cli.hpp"

#include "stochlog/error.hpp"
#include "stochlog/learning.hpp"
#include "stochlog/models.hpp"
#include "stochlog/reader.hpp"
#include "stochlog/synthetic.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace stochlog {

namespace {

using nlohmann::json;

std::string read_text(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw CLI::ValidationError("cannot open " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

std::string strategy_name(Strategy s) { return s == Strategy::SLD ? "sld" : "slg"; }

Strategy parse_strategy(const std::string &s) {
    if (s == "sld")
        return Strategy::SLD;
    if (s == "slg")
        return Strategy::SLG;
    throw CLI::ValidationError("--strategy must be sld or slg");
}

/// Shortest text that reads back as the same double.
std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Exact probability when every leaf is a constant rule weight.
std::optional<Number> exact_probability(const Program &p, const Circuit &c) {
    if (!c.neural_leaves().empty() || c.truncated())
        return std::nullopt;
    std::vector<Number> weights;
    for (const auto &w : c.weight_leaves()) {
        const auto &group = p.groups()[w.group];
        if (group.kind == GroupKind::Trainable)
            return std::nullopt;
        weights.push_back(evaluate_constant(p.rules()[group.rules[w.slot]].weight_term));
    }
    return eval_exact(c, weights);
}

/// Options shared by the commands that evaluate a grammar.
struct Common {
    std::string grammar;
    std::string strategy = "slg";
    std::size_t max_depth = 0;
    std::uint64_t seed = 42;
    int threads = 1;
    bool json_output = false;
    std::string params;
    std::vector<std::string> models;
    std::string features;
    bool strict = false;

    void add_to(CLI::App &cmd, bool needs_grammar = true) {
        auto *g = cmd.add_option("--grammar,-g", grammar, "Grammar file (*.sdcg)");
        if (needs_grammar)
            g->required();
        cmd.add_option("--strategy", strategy, "Resolution strategy: sld or slg")->default_val("slg");
        cmd.add_option("--max-depth", max_depth, "Derivation depth limit (0: 10*|T|+50)");
        cmd.add_option("--seed", seed, "Random seed")->default_val(42);
        cmd.add_option("--threads", threads, "OpenMP threads (1: serial kernels)")->default_val(1);
        cmd.add_flag("--json", json_output, "Machine-readable JSON output");
        cmd.add_option("--params", params, "Parameter checkpoint to load");
        cmd.add_option("--model", models, "Model registration name=spec (dense:D[:H], softmax, fixed[:table.csv])");
        cmd.add_option("--features", features, "Feature-vector CSV for vec:<id> tokens");
        cmd.add_flag("--strict", strict, "Multiple answers of a {} goal and truncation are errors");
    }

    ResolveOptions resolve() const {
        ResolveOptions o;
        o.strategy = parse_strategy(strategy);
        o.max_depth = max_depth;
        o.strict_single_answer = strict;
        return o;
    }

    FeatureTable feature_table() const { return features.empty() ? FeatureTable{} : load_features(features); }

    void apply_threads() const {
#ifdef _OPENMP
        omp_set_num_threads(std::max(1, threads));
#endif
    }

    /// Loads the checkpoint (if any) and registers `--model` specifications for
    /// models the checkpoint does not provide.
    void setup(ParamStore &store) const {
        if (!params.empty())
            store.load(params);
        for (const auto &spec : models) {
            const auto eq = spec.find('=');
            if (eq == std::string::npos)
                throw CLI::ValidationError("--model expects name=spec, got " + spec);
            const std::string name = spec.substr(0, eq);
            if (store.has_model(intern(name)))
                continue;
            store.register_model(intern(name), make_model(name, spec.substr(eq + 1),
                                                          store.program().model_output_size(intern(name)),
                                                          store.rng()));
        }
    }
};

struct MissingModel : Error {
    using Error::Error;
};

void require_models(const ParamStore &store) {
    try {
        store.check_models();
    } catch (const ModelError &e) {
        throw MissingModel(e.what());
    }
}

std::vector<Term> parse_sequence(const std::string &text, const FeatureTable &features) {
    std::vector<Term> seq;
    for (const auto &item : split_sequence(text))
        seq.push_back(parse_token(item, features));
    return seq;
}

Program load_program(const std::string &path) { return Program::parse(read_text(path)); }

// ------------------------------------------------------------------ commands

int cmd_translate(const Common &c, std::ostream &out) {
    const Program p = load_program(c.grammar);
    const auto clauses = translate(p);
    if (c.json_output) {
        json j = json::array();
        for (const auto &t : clauses)
            j.push_back(t.to_string());
        out << j.dump(2) << "\n";
    } else {
        for (const auto &t : clauses)
            out << t.to_string() << "\n";
    }
    return kExitOk;
}

struct Query {
    std::string goal, sequence, emit_dot;
};

int cmd_prob(const Common &c, const Query &q, std::ostream &out) {
    const Program p = load_program(c.grammar);
    ParamStore store(p, c.seed);
    c.setup(store);
    const Term goal = read_term(q.goal);
    const auto seq = parse_sequence(q.sequence, c.feature_table());
    const Forest f = derive(p, goal, seq, c.resolve());
    if (f.truncated && c.strict)
        throw EvalError("derivation was truncated at the depth limit");
    if (f.circuit.neural_leaves().size())
        require_models(store);
    NeuralCache cache(store);
    const ForwardPass pass = forward(f.circuit, leaf_values(store, cache, f.circuit), Semiring::Linear);
    const auto exact = c.params.empty() ? exact_probability(p, f.circuit) : std::nullopt;
    const double prob = exact ? exact->to_double() : pass.root_value();
    const double logp = eval(f.circuit, leaf_values(store, cache, f.circuit), Semiring::Log);
    if (!q.emit_dot.empty()) {
        std::ofstream dot(q.emit_dot);
        dot << to_dot(f.circuit, [&](NodeKind kind, std::uint32_t leaf) { return leaf_label(p, f.circuit, kind, leaf); });
    }
    if (c.json_output) {
        json j;
        j["goal"] = to_string(goal);
        j["probability"] = prob;
        j["exact"] = exact ? json(exact->to_string()) : json(nullptr);
        j["log_probability"] = std::isinf(logp) ? json(nullptr) : json(logp);
        j["strategy"] = strategy_name(c.resolve().strategy);
        j["nodes"] = f.circuit.size();
        j["truncated"] = f.truncated;
        j["answers"] = json::array();
        for (const auto &a : f.answers)
            j["answers"].push_back({{"answer", to_string(a.goal)}, {"probability", pass.values[a.node]}});
        out << j.dump(2) << "\n";
    } else {
        out << "probability " << format_double(prob) << "\n";
        if (exact)
            out << "exact " << exact->to_string() << "\n";
        out << "log_probability " << (std::isinf(logp) ? std::string("-inf") : format_double(logp)) << "\n";
        if (f.answers.size() > 1 || (f.answers.size() == 1 && !(f.answers[0].goal == goal)))
            for (const auto &a : f.answers)
                out << "answer " << to_string(a.goal) << " " << format_double(pass.values[a.node]) << "\n";
        if (f.truncated)
            out << "warning: derivation truncated at the depth limit\n";
    }
    return f.answers.empty() ? kExitNoProof : kExitOk;
}

int cmd_mpd(const Common &c, const Query &q, std::ostream &out) {
    const Program p = load_program(c.grammar);
    ParamStore store(p, c.seed);
    c.setup(store);
    const Term goal = read_term(q.goal);
    const auto seq = parse_sequence(q.sequence, c.feature_table());
    const Forest f = derive(p, goal, seq, c.resolve());
    if (f.circuit.neural_leaves().size())
        require_models(store);
    NeuralCache cache(store);
    const LeafValues env = leaf_values(store, cache, f.circuit);
    const ForwardPass vit = forward(f.circuit, env, Semiring::Viterbi);
    if (f.answers.empty() || !(vit.root_value() > 0.0)) {
        if (c.json_output)
            out << json{{"goal", to_string(goal)}, {"probability", 0.0}, {"trace", json::array()}}.dump(2) << "\n";
        else
            out << "no derivation\n";
        return kExitNoProof;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < f.answers.size(); ++i)
        if (vit.values[f.answers[i].node] > vit.values[f.answers[best].node])
            best = i;
    const auto d = most_probable_derivation(f.circuit, vit, f.answers[best].node);
    if (!q.emit_dot.empty()) {
        std::ofstream dot(q.emit_dot);
        dot << to_dot(f.circuit, [&](NodeKind kind, std::uint32_t leaf) { return leaf_label(p, f.circuit, kind, leaf); });
    }
    auto leaf_value = [&](const TraceStep &s) {
        return s.kind == NodeKind::WeightLeaf ? env.weight[s.leaf] : env.neural[s.leaf];
    };
    if (c.json_output) {
        json j;
        j["goal"] = to_string(goal);
        j["answer"] = to_string(f.answers[best].goal);
        j["probability"] = d.value;
        j["trace"] = json::array();
        for (const auto &s : d.trace)
            j["trace"].push_back({{"step", trace_label(p, f.circuit, s)}, {"probability", leaf_value(s)}});
        out << j.dump(2) << "\n";
    } else {
        out << "answer " << to_string(f.answers[best].goal) << "\n";
        out << "probability " << format_double(d.value) << "\n";
        for (const auto &s : d.trace)
            out << "  " << trace_label(p, f.circuit, s) << " " << format_double(leaf_value(s)) << "\n";
    }
    return kExitOk;
}

struct TrainOptions {
    std::string manifest, data, eval_data, output = "run", loss = "nll", metric = "answer";
    std::size_t epochs = 10, batch_size = 1, eval_every = 1;
    double learning_rate = 1e-2;
};

Metric parse_metric(const std::string &m) {
    if (m == "answer")
        return Metric::AnswerAccuracy;
    if (m == "parse")
        return Metric::ParseAccuracy;
    throw CLI::ValidationError("--metric must be answer or parse");
}

/// Fills options not given on the command line from a JSON run manifest.
void apply_manifest(CLI::App &cmd, Common &c, TrainOptions &t) {
    if (t.manifest.empty())
        return;
    json m;
    try {
        m = json::parse(read_text(t.manifest));
    } catch (const json::exception &e) {
        throw CLI::ValidationError(t.manifest + ": " + e.what());
    }
    const auto base = std::filesystem::path(t.manifest).parent_path();
    auto path = [&](const std::string &p) { return std::filesystem::path(p).is_absolute() ? p : (base / p).string(); };
    auto take = [&](const char *key, const char *flag, auto &field, bool is_path = false) {
        const CLI::Option *opt = cmd.get_option_no_throw(flag);
        if (!m.contains(key) || !opt || opt->count() > 0)
            return;
        using T = std::decay_t<decltype(field)>;
        field = m.at(key).get<T>();
        if constexpr (std::is_same_v<T, std::string>)
            if (is_path)
                field = path(field);
    };
    take("grammar", "--grammar", c.grammar, true);
    take("data", "--data", t.data, true);
    take("eval_data", "--eval-data", t.eval_data, true);
    take("features", "--features", c.features, true);
    take("params", "--params", c.params, true);
    take("output", "--output", t.output, true);
    take("loss", "--loss", t.loss);
    take("metric", "--metric", t.metric);
    take("epochs", "--epochs", t.epochs);
    take("batch_size", "--batch-size", t.batch_size);
    take("eval_every", "--eval-every", t.eval_every);
    take("learning_rate", "--lr", t.learning_rate);
    take("seed", "--seed", c.seed);
    take("strategy", "--strategy", c.strategy);
    take("threads", "--threads", c.threads);
    if (m.contains("models") && cmd.count("--model") == 0)
        for (const auto &[name, spec] : m.at("models").items())
            c.models.push_back(name + "=" + spec.get<std::string>());
    if (c.grammar.empty())
        throw CLI::ValidationError("no grammar given (--grammar or manifest)");
}

int cmd_train(CLI::App &cmd, Common &c, TrainOptions &t, std::ostream &out) {
    apply_manifest(cmd, c, t);
    if (t.data.empty())
        throw CLI::ValidationError("no training data given (--data or manifest)");
    const Program p = load_program(c.grammar);
    ParamStore store(p, c.seed);
    c.setup(store);
    require_models(store);
    const FeatureTable features = c.feature_table();
    const auto data = load_dataset(t.data, features);
    std::vector<QueryInstance> eval_data;
    if (!t.eval_data.empty())
        eval_data = load_dataset(t.eval_data, features);

    TrainConfig cfg;
    cfg.loss = parse_loss(t.loss);
    cfg.adam.learning_rate = t.learning_rate;
    cfg.batch_size = t.batch_size;
    cfg.epochs = t.epochs;
    cfg.seed = c.seed;
    cfg.resolve = c.resolve();
    cfg.parallel = c.threads > 1;
    cfg.eval_every = eval_data.empty() ? 0 : t.eval_every;
    cfg.eval_metric = parse_metric(t.metric);
    cfg.eval_data = &eval_data;
    cfg.on_epoch = [&](const EpochRecord &r) {
        if (c.json_output)
            return;
        out << "epoch " << r.epoch << " loss " << format_double(r.loss);
        if (r.metric)
            out << " " << t.metric << "_accuracy " << *r.metric;
        out << "\n";
    };
    const auto history = train(store, data, cfg);

    std::filesystem::create_directories(t.output);
    const std::string ckpt = (std::filesystem::path(t.output) / "params.txt").string();
    const std::string hist = (std::filesystem::path(t.output) / "history.csv").string();
    store.save(ckpt);
    std::ofstream(hist) << history_csv(history);
    if (c.json_output) {
        json j;
        j["checkpoint"] = ckpt;
        j["history_file"] = hist;
        j["history"] = json::array();
        for (const auto &r : history)
            j["history"].push_back({{"epoch", r.epoch}, {"loss", r.loss}, {"metric", r.metric ? json(*r.metric) : json(nullptr)}});
        out << j.dump(2) << "\n";
    } else {
        out << "checkpoint " << ckpt << "\nhistory " << hist << "\n";
    }
    return kExitOk;
}

int cmd_eval(CLI::App &cmd, Common &c, TrainOptions &t, std::ostream &out) {
    apply_manifest(cmd, c, t);
    const std::string data_path = t.eval_data.empty() ? t.data : t.eval_data;
    if (data_path.empty())
        throw CLI::ValidationError("no evaluation data given (--data or manifest)");
    const Program p = load_program(c.grammar);
    ParamStore store(p, c.seed);
    c.setup(store);
    require_models(store);
    const auto data = load_dataset(data_path, c.feature_table());
    const double acc = evaluate(store, data, parse_metric(t.metric), c.resolve());
    if (c.json_output)
        out << json{{"metric", t.metric}, {"accuracy", acc}, {"instances", data.size()}}.dump(2) << "\n";
    else
        out << t.metric << "_accuracy " << acc << " over " << data.size() << " instances\n";
    return kExitOk;
}

struct BenchOptions {
    std::string goal;
    std::size_t min_length = 1, max_length = 7, step = 1, repeats = 5;
    std::vector<std::string> strategies{"sld", "slg"};
};

int cmd_bench(const Common &c, const BenchOptions &b, std::ostream &out) {
    const Program p = load_program(c.grammar);
    std::vector<Strategy> strategies;
    for (const auto &s : b.strategies)
        strategies.push_back(parse_strategy(s));
    ResolveOptions base;
    base.max_depth = c.max_depth;
    const auto rows = run_parse_bench(p, read_term(b.goal), b.min_length, b.max_length, b.step, strategies, b.repeats, base);
    if (c.json_output) {
        json j = json::array();
        for (const auto &r : rows)
            j.push_back({{"length", r.length},
                         {"strategy", strategy_name(r.strategy)},
                         {"answers", r.answers},
                         {"nodes", r.nodes},
                         {"wall_ms", r.wall_ms}});
        out << j.dump(2) << "\n";
    } else {
        out << bench_csv(rows);
    }
    return kExitOk;
}

struct GenerateOptions {
    std::string task = "addition", output = "data";
    std::size_t train = 200, test = 100, dim = 16, max_length = 10;
    double noise = 0.2;
};

int cmd_generate(const Common &c, const GenerateOptions &g, std::ostream &out) {
    SyntheticTask task;
    if (g.task == "addition")
        task = make_addition_task(g.train, g.test, g.dim, g.noise, c.seed);
    else if (g.task == "parentheses")
        task = make_parentheses_task(g.train, g.test, g.max_length, g.dim, g.noise, c.seed);
    else if (g.task == "anbncn")
        task = make_anbncn_task(g.train, g.test, 3, g.max_length, g.dim, g.noise, c.seed);
    else
        throw CLI::ValidationError("--task must be addition, parentheses or anbncn");
    const std::filesystem::path dir(g.output);
    std::filesystem::create_directories(dir);
    write_dataset(task.train, (dir / "train.jsonl").string(), (dir / "train.csv").string());
    write_dataset(task.test, (dir / "test.jsonl").string(), (dir / "test.csv").string());
    // Combined sidecar for both splits.
    std::ofstream all(dir / "features.csv");
    all << read_text((dir / "train.csv").string()) << read_text((dir / "test.csv").string());
    out << "wrote " << task.train.size() << " training and " << task.test.size() << " test instances to "
        << dir.string() << "\n";
    return kExitOk;
}

} // namespace

std::vector<std::string> split_sequence(const std::string &text) {
    std::string s = text;
    const auto b = s.find_first_not_of(" \t\n");
    const auto e = s.find_last_not_of(" \t\n");
    s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
    if (s.size() >= 2 && s.front() == '[' && s.back() == ']')
        s = s.substr(1, s.size() - 2);
    std::vector<std::string> items;
    std::string cur;
    int depth = 0;
    char quote = 0;
    auto flush = [&] {
        const auto fb = cur.find_first_not_of(" \t\n");
        const auto fe = cur.find_last_not_of(" \t\n");
        if (fb != std::string::npos)
            items.push_back(cur.substr(fb, fe - fb + 1));
        else if (!items.empty() || !cur.empty())
            throw ParseError("empty item in sequence '" + text + "'", 1, 1);
        cur.clear();
    };
    for (char ch : s) {
        if (quote) {
            cur += ch;
            if (ch == quote)
                quote = 0;
            continue;
        }
        if (ch == '\'' || ch == '"')
            quote = ch;
        else if (ch == '(' || ch == '[' || ch == '{')
            ++depth;
        else if (ch == ')' || ch == ']' || ch == '}')
            --depth;
        if (ch == ',' && depth == 0) {
            flush();
            continue;
        }
        cur += ch;
    }
    if (!cur.empty() || !items.empty())
        flush();
    return items;
}

std::vector<BenchRow> run_parse_bench(const Program &program, const Term &goal, std::size_t min_length,
                                      std::size_t max_length, std::size_t step, const std::vector<Strategy> &strategies,
                                      std::size_t repeats, const ResolveOptions &base) {
    std::vector<BenchRow> rows;
    for (std::size_t n = min_length; n <= max_length; n += std::max<std::size_t>(step, 1)) {
        std::vector<Term> seq;
        for (std::size_t i = 0; i < n; ++i)
            seq.push_back(Term::atom("x" + std::to_string(i)));
        for (Strategy s : strategies) {
            ResolveOptions o = base;
            o.strategy = s;
            BenchRow row;
            row.length = n;
            row.strategy = s;
            const Forest warm = derive(program, goal, seq, o);
            row.answers = warm.answers.size();
            row.nodes = warm.circuit.size();
            std::vector<double> times;
            for (std::size_t r = 0; r < std::max<std::size_t>(repeats, 1); ++r) {
                const auto t0 = std::chrono::steady_clock::now();
                const Forest f = derive(program, goal, seq, o);
                times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
            }
            std::sort(times.begin(), times.end());
            row.wall_ms = times[times.size() / 2];
            rows.push_back(row);
        }
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow> &rows) {
    std::ostringstream out;
    out << "length,strategy,answers,nodes,wall_ms\n";
    for (const auto &r : rows)
        out << r.length << "," << strategy_name(r.strategy) << "," << r.answers << "," << r.nodes << ","
            << std::fixed << std::setprecision(3) << r.wall_ms << std::defaultfloat << "\n";
    return out.str();
}

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Inference and learning for stochastic definite clause grammars with neural rules", "stochlog"};
    app.require_subcommand(1);
    Common common;
    Query query;
    TrainOptions topts;
    BenchOptions bopts;
    GenerateOptions gopts;

    auto *translate_cmd = app.add_subcommand("translate", "Print the difference-list clause translation");
    std::string grammar_file;
    translate_cmd->add_option("file", grammar_file, "Grammar file");
    common.add_to(*translate_cmd, false);

    auto add_query = [&](CLI::App &cmd) {
        common.add_to(cmd);
        cmd.add_option("--goal", query.goal, "Goal atom, e.g. e(2)")->required();
        cmd.add_option("--sequence,-s", query.sequence, "Terminal sequence, e.g. [2,+,0] or [vec:a, tok:b]")
            ->required();
        cmd.add_option("--emit-dot", query.emit_dot, "Write the circuit as a DOT graph");
    };
    auto *prob_cmd = app.add_subcommand("prob", "Probability that a goal derives a sequence");
    add_query(*prob_cmd);
    auto *mpd_cmd = app.add_subcommand("mpd", "Most probable derivation of a goal over a sequence");
    add_query(*mpd_cmd);

    auto add_training = [&](CLI::App &cmd) {
        common.add_to(cmd, false);
        cmd.add_option("--manifest", topts.manifest, "JSON run manifest (flags given explicitly take precedence)");
        cmd.add_option("--data", topts.data, "Training (or evaluation) dataset, JSON lines");
        cmd.add_option("--eval-data", topts.eval_data, "Evaluation dataset, JSON lines");
        cmd.add_option("--metric", topts.metric, "answer or parse")->default_val("answer");
    };
    auto *train_cmd = app.add_subcommand("train", "Fit rule weights and models to a dataset");
    add_training(*train_cmd);
    train_cmd->add_option("--output,-o", topts.output, "Output directory for params.txt and history.csv");
    train_cmd->add_option("--epochs", topts.epochs, "Epochs")->default_val(10);
    train_cmd->add_option("--batch-size", topts.batch_size, "Instances per optimizer step")->default_val(1);
    train_cmd->add_option("--lr", topts.learning_rate, "Adam learning rate")->default_val(1e-2);
    train_cmd->add_option("--loss", topts.loss, "nll, squared or cross-entropy")->default_val("nll");
    train_cmd->add_option("--eval-every", topts.eval_every, "Evaluate every n epochs")->default_val(1);
    auto *eval_cmd = app.add_subcommand("eval", "Accuracy of the current parameters on a dataset");
    add_training(*eval_cmd);

    auto *bench_cmd = app.add_subcommand("bench", "Parse distinct-symbol sequences and report sizes and times");
    common.add_to(*bench_cmd);
    bench_cmd->add_option("--goal", bopts.goal, "Goal atom, e.g. expression(N)")->required();
    bench_cmd->add_option("--min-length", bopts.min_length)->default_val(1);
    bench_cmd->add_option("--max-length", bopts.max_length)->default_val(7);
    bench_cmd->add_option("--step", bopts.step, "Length increment (2 for odd-length expression grammars)")->default_val(1);
    bench_cmd->add_option("--repeats", bopts.repeats, "Timed repeats (median reported)")->default_val(5);
    bench_cmd->add_option("--strategies", bopts.strategies, "Strategies to compare")->delimiter(',');

    auto *gen_cmd = app.add_subcommand("generate", "Write a synthetic dataset with feature tokens");
    common.add_to(*gen_cmd, false);
    gen_cmd->add_option("--task", gopts.task, "addition, parentheses or anbncn");
    gen_cmd->add_option("--output,-o", gopts.output, "Output directory");
    gen_cmd->add_option("--train", gopts.train, "Training instances")->default_val(200);
    gen_cmd->add_option("--test", gopts.test, "Test instances")->default_val(100);
    gen_cmd->add_option("--dim", gopts.dim, "Feature dimension")->default_val(16);
    gen_cmd->add_option("--max-length", gopts.max_length, "Longest sequence (parentheses, anbncn)")->default_val(10);
    gen_cmd->add_option("--noise", gopts.noise, "Feature noise standard deviation")->default_val(0.2);

    try {
        app.parse(argc, argv);
        common.apply_threads();
        if (*translate_cmd) {
            if (!grammar_file.empty())
                common.grammar = grammar_file;
            if (common.grammar.empty())
                throw CLI::ValidationError("translate needs a grammar file");
            return cmd_translate(common, out);
        }
        if (*prob_cmd)
            return cmd_prob(common, query, out);
        if (*mpd_cmd)
            return cmd_mpd(common, query, out);
        if (*train_cmd)
            return cmd_train(*train_cmd, common, topts, out);
        if (*eval_cmd)
            return cmd_eval(*eval_cmd, common, topts, out);
        if (*bench_cmd)
            return cmd_bench(common, bopts, out);
        if (*gen_cmd)
            return cmd_generate(common, gopts, out);
    } catch (const CLI::ParseError &e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    } catch (const ParseError &e) {
        err << "parse error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ProgramError &e) {
        err << "grammar error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const MissingModel &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const EvalError &e) {
        err << "proof failure: " << e.what() << "\n";
        return kExitNoProof;
    } catch (const ModelError &e) {
        err << "model error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const TrainingError &e) {
        err << "training error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitUsage;
}

} // namespace stochlog
