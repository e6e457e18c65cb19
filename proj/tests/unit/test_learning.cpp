#include "doctest.h"

#include "oracle.hpp"
#include "test_support.hpp"

#include "stochlog/error.hpp"
#include "stochlog/learning.hpp"
#include "stochlog/reader.hpp"
#include "stochlog/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

using namespace stochlog;
using namespace stochlog::testing;

namespace {

Term T(const char *text) { return read_term(text); }

std::vector<Term> tokens(const std::string &list) {
    std::vector<Term> items;
    read_term(list).list_items(items);
    return items;
}

std::vector<Term> symbols(const std::string &prefix, std::size_t n) {
    std::vector<Term> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(Term::atom(prefix + std::to_string(i)));
    return out;
}

QueryInstance instance(const char *goal, std::vector<Term> seq, double target = 1.0) {
    QueryInstance q;
    q.goal = T(goal);
    q.sequence = std::move(seq);
    q.target = target;
    return q;
}

/// Registers a softmax table with random logits for every model of the program.
void register_tables(ParamStore &params, const Circuit &c) {
    for (Symbol m : params.program().models())
        if (!params.has_model(m))
            params.register_model(m, make_model(symbol_name(m), "softmax", params.program().model_output_size(m),
                                                params.rng()));
    params.register_inputs(c);
    std::normal_distribution<double> n(0.0, 1.0);
    for (const auto &[name, model] : params.models())
        for (auto &p : model->parameters())
            p = n(params.rng());
}

/// Sum over oracle derivations of the product of their leaf values.
double oracle_probability(const ParamStore &params, NeuralCache &cache, const Forest &f,
                          const std::vector<OracleDerivation> &derivations) {
    std::map<std::string, double> neural;
    for (const auto &n : f.circuit.neural_leaves())
        neural[neural_label(n.model, n.inputs, n.output)] = cache.get(n.model, n.inputs)[n.output];
    const Program &p = params.program();
    double total = 0.0;
    for (const auto &d : derivations) {
        double prod = 1.0;
        for (const auto &label : d.leaves) {
            if (label.rfind("w:", 0) == 0) {
                const auto slash = label.find('/');
                const std::size_t g = std::stoul(label.substr(2, slash - 2));
                const std::size_t s = std::stoul(label.substr(slash + 1));
                prod *= p.groups()[g].kind == GroupKind::Trainable
                            ? params.group_probabilities(g)[s]
                            : p.rules()[p.groups()[g].rules[s]].probability;
            } else {
                const auto it = neural.find(label);
                REQUIRE(it != neural.end());
                prod *= it->second;
            }
        }
        total += prod;
    }
    return total;
}

const char *kToyGrammar = "digit(Y) :- member(Y, [0, 1, 2]).\n"
                          "nn(num, [X], [Y], [digit]) :: number(Y) --> [X].\n"
                          "t :: e(N) --> number(N).\n"
                          "t :: e(N) --> e(N1), [+], number(N2), {N is N1 + N2}.\n";

/// Three instances over a toy grammar with a trainable group and a dense model.
struct Toy {
    Program program = Program::parse(kToyGrammar);
    ParamStore params{program, 5};
    std::vector<QueryInstance> data;
    Toy() {
        params.register_model(intern("num"), make_model("num", "dense:4:3", 3, params.rng()));
        std::normal_distribution<double> n(0.0, 0.5);
        for (auto &p : params.model(intern("num")).parameters())
            p += n(params.rng());
        TokenFactory tok("toy", 3, 4, 0.3, 11);
        const Term plus = Term::atom("+");
        data.push_back(instance("e(1)", {tok.make(1)}));
        data.push_back(instance("e(3)", {tok.make(1), plus, tok.make(2)}, 0.7));
        data.push_back(instance("e(2)", {tok.make(0), plus, tok.make(1), plus, tok.make(1)}, 0.4));
    }
};

double total_loss(const ParamStore &params, const std::vector<Forest> &forests,
                  const std::vector<QueryInstance> &data, Loss loss) {
    NeuralCache cache(params);
    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i)
        all[i] = i;
    return batch_gradient(params, cache, forests, data, all, loss, false).loss;
}

} // namespace

TEST_CASE("query probabilities of the worked examples") {
    const Program p = load_corpus("digit_sum.sdcg");
    const ParamStore params(p);
    CHECK(query_probability(params, instance("e(2)", tokens("[2]"))) == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(query_probability(params, instance("e(2)", tokens("[2, +, 0]"))) ==
          doctest::Approx(0.0025).epsilon(1e-15));
    CHECK(query_probability(params, instance("e(5)", tokens("[2]"))) == 0.0);
    ResolveOptions sld;
    sld.strategy = Strategy::SLD;
    CHECK(query_probability(params, instance("e(4)", tokens("[1, +, 3]")), sld) ==
          query_probability(params, instance("e(4)", tokens("[1, +, 3]"))));
}

TEST_CASE("query probability equals the brute-force sum of products") {
    struct Case {
        const char *file;
        const char *goal;
        std::size_t max_length;
    };
    for (const Case &k : {Case{"digit_sum_neural.sdcg", "e(N)", 5}, Case{"digit_sum_trainable.sdcg", "e(N)", 5},
                          Case{"operator_translation.sdcg", "e(N)", 5}, Case{"addition.sdcg", "addition(N)", 6},
                          Case{"expressions.sdcg", "expression(N)", 3}, Case{"parentheses.sdcg", "s", 6},
                          Case{"anbncn.sdcg", "s(C)", 6}}) {
        const Program p = load_corpus(k.file);
        for (std::size_t len = 0; len <= k.max_length; ++len) {
            INFO(k.file << " length " << len);
            std::vector<Term> seq = symbols("v", len);
            if (std::string(k.file).find("digit_sum_trainable") != std::string::npos)
                for (std::size_t i = 0; i < len; ++i)
                    seq[i] = i % 2 ? Term::atom("+") : Term::integer(static_cast<long>(i % 10));
            const Forest f = derive(p, T(k.goal), seq);
            ParamStore params(p, 100 + len);
            register_tables(params, f.circuit);
            NeuralCache cache(params);
            BruteForceEnumerator oracle(p, seq, default_depth_limit(seq.size()));
            const double expected = oracle_probability(params, cache, f, oracle.run(T(k.goal)));
            const double actual = forest_probability(params, cache, f);
            CHECK(actual == doctest::Approx(expected).epsilon(1e-12).scale(1e-300));
        }
    }
}

TEST_CASE("loss functions and their log-derivatives") {
    for (Loss loss : {Loss::NegativeLogLikelihood, Loss::Squared, Loss::CrossEntropy})
        for (double p : {0.1, 0.5, 0.93})
            for (double t : {1.0, 0.3}) {
                const auto [v, dlog] = loss_and_log_gradient(loss, p, t);
                const double h = 1e-6;
                const double fd = (loss_and_log_gradient(loss, p * std::exp(h), t).first -
                                   loss_and_log_gradient(loss, p * std::exp(-h), t).first) /
                                  (2 * h);
                CHECK(dlog == doctest::Approx(fd).epsilon(1e-6));
                CHECK(std::isfinite(v));
            }
    const auto [v, g] = loss_and_log_gradient(Loss::NegativeLogLikelihood, 0.0, 1.0);
    CHECK(v == doctest::Approx(30 * std::log(10.0)));
    CHECK(g == 0.0);
    CHECK(parse_loss("nll") == Loss::NegativeLogLikelihood);
    CHECK_THROWS_AS(parse_loss("hinge"), TrainingError);
}

TEST_CASE("end-to-end gradients match finite differences over all parameters") {
    for (Loss loss : {Loss::NegativeLogLikelihood, Loss::Squared, Loss::CrossEntropy}) {
        Toy toy;
        const auto forests = build_forests(toy.program, toy.data, {}, false);
        NeuralCache cache(toy.params);
        const BatchResult r = batch_gradient(toy.params, cache, forests, toy.data, {0, 1, 2}, loss, false);
        CHECK(r.loss == doctest::Approx(total_loss(toy.params, forests, toy.data, loss)));
        auto check = [&](double &param, double analytic) {
            const double h = 1e-5, keep = param;
            param = keep + h;
            const double plus = total_loss(toy.params, forests, toy.data, loss);
            param = keep - h;
            const double minus = total_loss(toy.params, forests, toy.data, loss);
            param = keep;
            CHECK(analytic == doctest::Approx((plus - minus) / (2 * h)).epsilon(1e-4).scale(1e-8));
        };
        std::size_t checked = 0;
        for (std::size_t g = 0; g < toy.program.groups().size(); ++g)
            for (std::size_t j = 0; j < toy.params.group_logits(g).size(); ++j, ++checked)
                check(toy.params.group_logits(g)[j], r.gradients.groups[g][j]);
        auto &model = toy.params.model(intern("num")).parameters();
        for (std::size_t j = 0; j < model.size(); ++j, ++checked)
            check(model[j], r.gradients.models.at(intern("num"))[j]);
        CHECK(checked == 2 + model.size());
    }
}

TEST_CASE("serial and OpenMP kernels agree exactly") {
    const auto task = make_addition_task(30, 0, 10, 0.2, 4);
    const Program p = load_corpus("addition.sdcg");
    ParamStore params(p);
    params.register_model(intern("number"), make_model("number", "dense:10:6", 10, params.rng()));
    const auto serial = build_forests(p, task.train, {}, false);
    const auto parallel = build_forests(p, task.train, {}, true);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].circuit.size() == parallel[i].circuit.size());
        CHECK(serial[i].answers.size() == parallel[i].answers.size());
    }
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < task.train.size(); ++i)
        all.push_back(i);
    NeuralCache c1(params), c2(params);
    const auto a = batch_gradient(params, c1, serial, task.train, all, Loss::NegativeLogLikelihood, false);
    const auto b = batch_gradient(params, c2, parallel, task.train, all, Loss::NegativeLogLikelihood, true);
    CHECK(a.loss == b.loss);
    CHECK(a.gradients.models == b.gradients.models);
}

TEST_CASE("zero epochs leave parameters unchanged") {
    Toy toy;
    const std::string before = toy.params.serialize();
    TrainConfig cfg;
    cfg.epochs = 0;
    CHECK(train(toy.params, toy.data, cfg).empty());
    CHECK(toy.params.serialize() == before);
}

TEST_CASE("a target already equal to P is stationary under squared error") {
    const Program p = load_corpus("digit_sum_trainable.sdcg");
    ParamStore params(p, 2);
    std::vector<QueryInstance> data{instance("e(3)", tokens("[1, +, 2]"))};
    data[0].target = query_probability(params, data[0]);
    const auto forests = build_forests(p, data, {}, false);
    NeuralCache cache(params);
    const auto r = batch_gradient(params, cache, forests, data, {0}, Loss::Squared, false);
    CHECK(std::sqrt(r.gradients.squared_norm()) < 1e-8);
}

TEST_CASE("training keeps every group normalized and is deterministic") {
    auto run = [](bool parallel) {
        Toy toy;
        TrainConfig cfg;
        cfg.epochs = 5;
        cfg.batch_size = 2;
        cfg.parallel = parallel;
        cfg.seed = 17;
        cfg.on_epoch = [&](const EpochRecord &) {
            for (std::size_t g = 0; g < toy.program.groups().size(); ++g) {
                if (toy.params.group_logits(g).empty())
                    continue;
                double sum = 0.0;
                for (double v : toy.params.group_probabilities(g)) {
                    CHECK(v > 0.0);
                    sum += v;
                }
                CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
            }
        };
        const auto history = train(toy.params, toy.data, cfg);
        CHECK(history.size() == 5);
        return toy.params.serialize();
    };
    const std::string a = run(false);
    CHECK(run(false) == a);
    CHECK(run(true) == a);
}

TEST_CASE("addition toy: separable digit tokens are learned from sums alone") {
    const Program p = load_corpus("addition.sdcg");
    ParamStore params(p, 1);
    params.register_model(intern("number"), make_model("number", "dense:16:32", 10, params.rng()));
    const auto task = make_addition_task(200, 100, 16, 0.2, 1);
    CHECK(evaluate(params, task.test, Metric::AnswerAccuracy) < 0.2);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.seed = 1;
    const auto history = train(params, task.train, cfg);
    REQUIRE(history.size() == 30);
    CHECK(history.back().loss < 0.05);
    for (std::size_t i = 1; i < history.size(); ++i)
        CHECK(history[i].loss <= history[i - 1].loss);
    CHECK(token_accuracy(params, intern("number"), task.test_tokens) == 1.0);
    CHECK(evaluate(params, task.test, Metric::AnswerAccuracy) == 1.0);
    CHECK(history_csv(history).rfind("epoch,loss,metric\n1,", 0) == 0);
}

TEST_CASE("uniform digit models answer with the most likely sum") {
    const Program p = load_corpus("addition.sdcg");
    ParamStore params(p);
    params.register_model(intern("number"), make_model("number", "fixed", 10, params.rng()));
    const auto task = make_addition_task(0, 300, 10, 0.2, 3);
    std::size_t nines = 0;
    for (const auto &q : task.test)
        nines += to_string(q.goal) == "addition(9)";
    CHECK(evaluate(params, task.test, Metric::AnswerAccuracy) ==
          doctest::Approx(static_cast<double>(nines) / 300.0));
}

TEST_CASE("perfect token models give perfect parse and class accuracy") {
    {
        const Program p = load_corpus("parentheses.sdcg");
        ParamStore params(p);
        const auto task = make_parentheses_task(0, 50, 10, 4, 0.1, 8);
        auto brackets = std::make_unique<FixedTableModel>("bracket_nn", 2);
        for (const auto &[tok, cls] : task.test_tokens)
            brackets->set_row(to_string(tok), cls == 0 ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0});
        params.register_model(intern("bracket_nn"), std::move(brackets));
        params.register_model(intern("s_nn"), make_model("s_nn", "fixed", 3, params.rng()));
        CHECK(evaluate(params, task.test, Metric::ParseAccuracy) == 1.0);
        std::vector<QueryInstance> no_gold = task.test;
        no_gold[0].gold_trace.clear();
        CHECK_THROWS_AS(evaluate(params, no_gold, Metric::ParseAccuracy), TrainingError);
    }
    {
        const Program p = load_corpus("anbncn.sdcg");
        ParamStore params(p);
        const auto task = make_anbncn_task(0, 60, 3, 12, 4, 0.1, 8);
        auto letters = std::make_unique<FixedTableModel>("mnist", 3);
        for (const auto &[tok, cls] : task.test_tokens) {
            std::vector<double> row(3, 0.0);
            row[cls] = 1.0;
            letters->set_row(to_string(tok), row);
        }
        params.register_model(intern("mnist"), std::move(letters));
        CHECK(evaluate(params, task.test, Metric::AnswerAccuracy) == 1.0);
    }
}

TEST_CASE("datasets load from JSON lines with feature sidecars") {
    const auto dir = std::filesystem::temp_directory_path() / "stochlog_dataset_test";
    std::filesystem::create_directories(dir);
    const auto task = make_parentheses_task(5, 0, 6, 3, 0.1, 2);
    std::vector<QueryInstance> data = task.train;
    data[0].query = T("s");
    write_dataset(data, (dir / "d.jsonl").string(), (dir / "d.csv").string());
    const FeatureTable features = load_features((dir / "d.csv").string());
    const auto loaded = load_dataset((dir / "d.jsonl").string(), features);
    REQUIRE(loaded.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(loaded[i].goal == data[i].goal);
        CHECK(loaded[i].gold_trace == data[i].gold_trace);
        REQUIRE(loaded[i].sequence.size() == data[i].sequence.size());
        for (std::size_t j = 0; j < data[i].sequence.size(); ++j)
            CHECK(loaded[i].sequence[j].feature_value().values == data[i].sequence[j].feature_value().values);
    }
    CHECK(loaded[0].query.has_value());

    CHECK(parse_token("tok:3", features) == Term::atom("3"));
    CHECK(parse_token("+", features) == Term::atom("+"));
    CHECK(parse_token("7", features) == Term::integer(7));
    CHECK_THROWS_AS(parse_token("vec:missing", features), TrainingError);
    {
        std::ofstream out(dir / "bad.jsonl");
        out << "{\"goal\": \"s\", \"sequence\": [], \"target\": 2}\n";
    }
    CHECK_THROWS_AS(load_dataset((dir / "bad.jsonl").string(), features), TrainingError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("instances without derivations are clamped under NLL, not fatal") {
    const Program p = load_corpus("digit_sum.sdcg");
    ParamStore params(p);
    const std::vector<QueryInstance> data{instance("e(5)", tokens("[2]"))};
    const auto forests = build_forests(p, data, {}, false);
    NeuralCache cache(params);
    const auto r = batch_gradient(params, cache, forests, data, {0}, Loss::NegativeLogLikelihood, false);
    CHECK(r.loss == doctest::Approx(30 * std::log(10.0)));
    CHECK(r.gradients.squared_norm() == 0.0);
}
