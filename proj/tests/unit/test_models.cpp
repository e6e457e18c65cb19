#include "doctest.h"

#include "test_support.hpp"

#include "stochlog/error.hpp"
#include "stochlog/models.hpp"
#include "stochlog/reader.hpp"
#include "stochlog/resolution.hpp"
#include "stochlog/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace stochlog;
using namespace stochlog::testing;

namespace {

Term feature(const std::string &id, std::vector<double> values) {
    auto v = std::make_shared<FeatureVector>();
    v->id = id;
    v->values = std::move(values);
    return Term::feature(v);
}

std::vector<double> run(const Model &m, const std::vector<Term> &inputs) {
    std::vector<double> out(m.output_size());
    m.forward(inputs, out);
    return out;
}

void check_simplex(const std::vector<double> &p) {
    double sum = 0.0;
    for (double v : p) {
        CHECK(v >= 0.0);
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
}

/// Checks backward against central differences of sum_k u_k p_k(params).
void check_param_gradient(Model &m, const std::vector<Term> &inputs, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> upstream(m.output_size());
    for (auto &x : upstream)
        x = u(rng);
    auto objective = [&] {
        const auto p = run(m, inputs);
        double s = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k)
            s += upstream[k] * p[k];
        return s;
    };
    std::vector<double> grad(m.parameters().size(), 0.0);
    m.backward(inputs, run(m, inputs), upstream, grad);
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double h = 1e-5;
        const double keep = m.parameters()[i];
        m.parameters()[i] = keep + h;
        const double plus = objective();
        m.parameters()[i] = keep - h;
        const double minus = objective();
        m.parameters()[i] = keep;
        const double fd = (plus - minus) / (2 * h);
        CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-4).scale(1e-7));
    }
}

} // namespace

TEST_CASE("fixed-table model returns the stored row") {
    FixedTableModel m("digits", 3);
    m.set_row("a", {0.9, 0.05, 0.05});
    CHECK(run(m, {Term::atom("a")}) == std::vector<double>{0.9, 0.05, 0.05});
    CHECK_THROWS_AS(run(m, {Term::atom("b")}), ModelError);
    m.set_default({0.2, 0.3, 0.5});
    CHECK(run(m, {Term::atom("b")}) == std::vector<double>{0.2, 0.3, 0.5});
    CHECK_THROWS_AS(m.set_row("c", {0.5, 0.6, 0.0}), ModelError);
    CHECK_THROWS_AS(m.set_row("c", {0.5, 0.5}), ModelError);
}

TEST_CASE("softmax table with zero logits is uniform") {
    SoftmaxTableModel m("m", 10);
    std::mt19937_64 rng(1);
    CHECK(m.add_key("a", rng));
    CHECK_FALSE(m.add_key("a", rng));
    std::fill(m.parameters().begin(), m.parameters().end(), 0.0);
    for (double p : run(m, {Term::atom("a")}))
        CHECK(p == doctest::Approx(0.1).epsilon(1e-15));
    for (double p : run(m, {Term::atom("unseen")}))
        CHECK(p == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("dense network on a synthetic token yields a distribution") {
    std::mt19937_64 rng(42);
    auto m = make_model("mnist", "dense:16:32", 10, rng);
    TokenFactory tokens("x", 10, 16, 0.2, 7);
    check_simplex(run(*m, {tokens.make(3)}));
    CHECK_THROWS_AS(run(*m, {Term::atom("a")}), ModelError);
    CHECK_THROWS_AS(run(*m, {feature("short", {1.0, 2.0})}), ModelError);
    std::vector<double> bad(16, 0.0);
    bad[2] = std::nan("");
    CHECK_THROWS_AS(run(*m, {feature("nan", bad)}), ModelError);
}

TEST_CASE("every backend yields distributions for random parameters and inputs") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        DenseModel d("d", 6, 5, 4);
        for (auto &p : d.parameters())
            p = n(rng);
        std::vector<double> x(6);
        for (auto &v : x)
            v = n(rng);
        check_simplex(run(d, {feature("f", x)}));
        SoftmaxTableModel s("s", 7);
        s.add_key("k", rng);
        for (auto &p : s.parameters())
            p = 10 * n(rng);
        check_simplex(run(s, {Term::atom("k")}));
    }
}

TEST_CASE("group probabilities are the softmax of the logits") {
    std::vector<double> p(2);
    softmax(std::vector<double>{0.0, 0.0}, p);
    CHECK(p == std::vector<double>{0.5, 0.5});
    softmax(std::vector<double>{std::log(2.0), 0.0}, p);
    CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    softmax(std::vector<double>{1000.0, 0.0}, p);
    CHECK(p[0] == 1.0);
}

TEST_CASE("softmax-table gradient is the Jacobian row and vanishes on the simplex direction") {
    std::mt19937_64 rng(3);
    SoftmaxTableModel m("m", 4);
    m.add_key("a", rng);
    const std::vector<Term> in{Term::atom("a")};
    const auto p = run(m, in);
    for (std::size_t k = 0; k < 4; ++k) {
        std::vector<double> e(4, 0.0), grad(4, 0.0);
        e[k] = 2.5;
        m.backward(in, p, e, grad);
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(grad[j] == doctest::Approx(2.5 * p[k] * ((j == k ? 1.0 : 0.0) - p[j])).epsilon(1e-14));
    }
    std::vector<double> ones(4, 1.0), grad(4, 0.0);
    m.backward(in, p, ones, grad);
    for (double g : grad)
        CHECK(std::abs(g) < 1e-16);
}

TEST_CASE("zero upstream adjoints give zero gradients") {
    std::mt19937_64 rng(8);
    auto dense = make_model("d", "dense:3:4", 5, rng);
    SoftmaxTableModel table("t", 5);
    table.add_key("a", rng);
    const std::vector<Term> fin{feature("f", {0.1, -0.3, 0.7})}, ain{Term::atom("a")};
    std::vector<double> zero(5, 0.0);
    std::vector<double> g1(dense->parameters().size(), 0.0), g2(table.parameters().size(), 0.0);
    dense->backward(fin, run(*dense, fin), zero, g1);
    table.backward(ain, run(table, ain), zero, g2);
    for (double g : g1)
        CHECK(g == 0.0);
    for (double g : g2)
        CHECK(g == 0.0);
}

TEST_CASE("parameter gradients match central finite differences") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        DenseModel d("d", 5, 4, 3);
        d.initialize(rng);
        for (auto &p : d.parameters())
            p += 0.3 * n(rng);
        std::vector<double> x1(3), x2(2);
        for (auto &v : x1)
            v = n(rng);
        for (auto &v : x2)
            v = n(rng);
        check_param_gradient(d, {feature("a", x1), feature("b", x2)}, rng);
        SoftmaxTableModel s("s", 6);
        s.add_key("p", rng);
        s.add_key("q", rng);
        for (auto &p : s.parameters())
            p = n(rng);
        check_param_gradient(s, {Term::atom("q")}, rng);
    }
}

TEST_CASE("parameter store: registration, leaf values and gradient chaining") {
    const Program p = load_corpus("digit_sum_trainable.sdcg");
    ParamStore params(p, 42);
    for (std::size_t g = 0; g < p.groups().size(); ++g) {
        const auto probs = params.group_probabilities(g);
        CHECK(probs.size() == p.groups()[g].rules.size());
        double sum = 0.0;
        for (double v : probs) {
            CHECK(v > 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
    }
    const Forest f = derive(p, read_term("e(N)"), {Term::integer(1), Term::atom("+"), Term::integer(2)});
    NeuralCache cache(params);
    const LeafValues env = leaf_values(params, cache, f.circuit);
    REQUIRE(env.weight.size() == f.circuit.weight_leaves().size());

    // d log P / d logits against finite differences on the group logits.
    Gradients g = Gradients::zeros_like(params);
    const auto pass = forward(f.circuit, env, Semiring::Log);
    accumulate_gradients(params, cache, f.circuit, backward_log(f.circuit, pass), 1.0, g);
    for (std::size_t gi = 0; gi < p.groups().size(); ++gi)
        for (std::size_t j = 0; j < params.group_logits(gi).size(); ++j) {
            const double h = 1e-5;
            const double keep = params.group_logits(gi)[j];
            params.group_logits(gi)[j] = keep + h;
            const double plus = eval(f.circuit, leaf_values(params, cache, f.circuit), Semiring::Log);
            params.group_logits(gi)[j] = keep - h;
            const double minus = eval(f.circuit, leaf_values(params, cache, f.circuit), Semiring::Log);
            params.group_logits(gi)[j] = keep;
            CHECK(g.groups[gi][j] == doctest::Approx((plus - minus) / (2 * h)).epsilon(1e-4).scale(1e-8));
        }
}

TEST_CASE("models must match the grammar and be registered") {
    const Program p = load_corpus("addition.sdcg");
    ParamStore params(p);
    CHECK_THROWS_AS(params.check_models(), ModelError);
    try {
        params.check_models();
    } catch (const ModelError &e) {
        CHECK(std::string(e.what()).find("number") != std::string::npos);
    }
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(params.register_model(intern("number"), make_model("number", "softmax", 9, rng)), ModelError);
    params.register_model(intern("number"), make_model("number", "softmax", 10, rng));
    CHECK_NOTHROW(params.check_models());
    CHECK_THROWS_AS(make_model("m", "convnet", 3, rng), ModelError);
}

TEST_CASE("Adam keeps groups normalized and moves against the gradient") {
    const Program p = load_corpus("digit_sum_trainable.sdcg");
    ParamStore params(p, 1);
    const auto before = params.group_logits(0);
    Gradients g = Gradients::zeros_like(params);
    g.groups[0] = {1.0, -2.0};
    AdamConfig cfg;
    cfg.learning_rate = 0.1;
    params.adam_step(g, cfg);
    CHECK(params.step() == 1);
    // The first bias-corrected step is lr * sign(gradient).
    CHECK(params.group_logits(0)[0] == doctest::Approx(before[0] - 0.1).epsilon(1e-6));
    CHECK(params.group_logits(0)[1] == doctest::Approx(before[1] + 0.1).epsilon(1e-6));
    double sum = 0.0;
    for (double v : params.group_probabilities(0))
        sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("checkpoints round-trip every parameter, moment and model") {
    const Program p = load_corpus("expressions.sdcg");
    ParamStore params(p, 3);
    std::mt19937_64 rng(4);
    params.register_model(intern("number"), make_model("number", "dense:4:3", 10, rng));
    params.register_model(intern("operator"), make_model("operator", "softmax", 4, rng));
    auto fixed = std::make_unique<FixedTableModel>("term", 3);
    fixed->set_row("", {0.25, 0.5, 0.25});
    params.register_model(intern("term"), std::move(fixed));
    params.register_model(intern("expression"), make_model("expression", "fixed", 3, rng));
    SoftmaxTableModel &ops = dynamic_cast<SoftmaxTableModel &>(params.model(intern("operator")));
    ops.add_key("y", rng);
    ops.add_key("a,b", rng);
    Gradients g = Gradients::zeros_like(params);
    for (auto &[name, v] : g.models)
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] = std::sin(static_cast<double>(i) + 0.5);
    params.adam_step(g, AdamConfig{});
    const std::string text = params.serialize();

    ParamStore loaded(p, 99);
    loaded.deserialize(text);
    CHECK(loaded.serialize() == text);
    CHECK(loaded.step() == params.step());
    for (const auto &[name, m] : params.models())
        CHECK(loaded.model(name).parameters() == m->parameters());
    CHECK(run(loaded.model(intern("operator")), {Term::atom("y")}) ==
          run(params.model(intern("operator")), {Term::atom("y")}));

    const std::string path = (std::filesystem::temp_directory_path() / "stochlog_ckpt_test.txt").string();
    params.save(path);
    ParamStore from_file(p);
    from_file.load(path);
    CHECK(from_file.serialize() == text);
    std::remove(path.c_str());

    CHECK_THROWS_AS(loaded.deserialize("group.nosuch/1 = 1 2\n"), ModelError);
    CHECK_THROWS_AS(loaded.deserialize("model.number.params = 1 2\n"), ModelError);
    CHECK_THROWS_AS(loaded.deserialize("garbage\n"), ModelError);
    CHECK(loaded.serialize() == text);
}

TEST_CASE("fixed tables load from CSV with a wildcard default") {
    const std::string path = (std::filesystem::temp_directory_path() / "stochlog_table_test.csv").string();
    {
        std::ofstream out(path);
        out << "# key, p0, p1\n'(',1,0\n')',0,1\n*,0.5,0.5\n";
    }
    std::mt19937_64 rng(1);
    auto m = make_model("bracket_nn", "fixed:" + path, 2, rng);
    CHECK(run(*m, {read_term("'('")}) == std::vector<double>{1.0, 0.0});
    CHECK(run(*m, {read_term("')'")}) == std::vector<double>{0.0, 1.0});
    CHECK(run(*m, {Term::atom("z")}) == std::vector<double>{0.5, 0.5});
    std::remove(path.c_str());
}

TEST_CASE("parallel cache precompute matches lazy serial evaluation") {
    const Program p = load_corpus("addition.sdcg");
    ParamStore params(p);
    params.register_model(intern("number"), make_model("number", "dense:12:8", 10, params.rng()));
    const auto task = make_addition_task(40, 0, 12, 0.2, 9);
    std::vector<Forest> forests;
    std::vector<const Circuit *> circuits;
    for (const auto &q : task.train)
        forests.push_back(derive(p, q.goal, q.sequence));
    for (const auto &f : forests)
        circuits.push_back(&f.circuit);
    NeuralCache parallel(params), serial(params);
    parallel.precompute(circuits, true);
    CHECK(parallel.size() == 80);
    for (const auto &f : forests) {
        const auto a = leaf_values(params, parallel, f.circuit);
        const auto b = leaf_values(params, serial, f.circuit);
        CHECK(a.neural == b.neural);
    }
    CHECK(serial.size() == 80);
}
