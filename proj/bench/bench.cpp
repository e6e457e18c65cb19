#include "stochlog/cli.hpp"
#include "stochlog/learning.hpp"
#include "stochlog/reader.hpp"
#include "stochlog/synthetic.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace stochlog;

namespace {

std::string read_file(const std::string &path) {
    std::ifstream in(path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

template <class F> double median_ms(std::size_t repeats, F &&f) {
    f();
    std::vector<double> times;
    for (std::size_t r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

void report(const char *kernel, double serial, double parallel, bool agree) {
    std::printf("%-22s %10.2f %10.2f %8.2fx  %s\n", kernel, serial, parallel, serial / parallel,
                agree ? "identical" : "MISMATCH");
}

} // namespace

int main(int argc, char **argv) {
    const std::string corpus = argc > 1 ? argv[1] : STOCHLOG_CORPUS_DIR;
    const std::size_t repeats = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 5;
    bool ok = true;

    std::printf("threads %d, median of %zu runs (ms)\n\n", omp_get_max_threads(), repeats);
    std::printf("%-22s %10s %10s %9s\n", "kernel", "serial", "openmp", "speedup");

    const Program t4 = Program::parse(read_file(corpus + "/anbncn.sdcg"));
    const SyntheticTask task = make_anbncn_task(256, 0, 3, 12, 8, 0.2, 7);
    ParamStore params(t4, 7);
    params.register_model(intern("mnist"), make_model("mnist", "dense:8:64", 3, params.rng()));

    std::vector<Forest> serial_forests, parallel_forests;
    const double fs = median_ms(repeats, [&] { serial_forests = build_forests(t4, task.train, {}, false); });
    const double fp = median_ms(repeats, [&] { parallel_forests = build_forests(t4, task.train, {}, true); });
    bool same = serial_forests.size() == parallel_forests.size();
    for (std::size_t i = 0; same && i < serial_forests.size(); ++i)
        same = serial_forests[i].circuit.size() == parallel_forests[i].circuit.size();
    report("build_forests", fs, fp, same);
    ok &= same;

    std::vector<const Circuit *> circuits;
    for (const auto &f : serial_forests)
        circuits.push_back(&f.circuit);
    NeuralCache cs(params), cp(params);
    const double cse = median_ms(repeats, [&] {
        cs.clear();
        cs.precompute(circuits, false);
    });
    const double cpa = median_ms(repeats, [&] {
        cp.clear();
        cp.precompute(circuits, true);
    });
    same = cs.size() == cp.size();
    report("cache precompute", cse, cpa, same);
    ok &= same;

    std::vector<std::size_t> all(task.train.size());
    for (std::size_t i = 0; i < all.size(); ++i)
        all[i] = i;
    BatchResult bs, bp;
    const double gs = median_ms(repeats, [&] {
        NeuralCache cache(params);
        bs = batch_gradient(params, cache, serial_forests, task.train, all, Loss::NegativeLogLikelihood, false);
    });
    const double gp = median_ms(repeats, [&] {
        NeuralCache cache(params);
        bp = batch_gradient(params, cache, serial_forests, task.train, all, Loss::NegativeLogLikelihood, true);
    });
    same = bs.loss == bp.loss && bs.gradients.groups == bp.gradients.groups &&
           bs.gradients.models == bp.gradients.models;
    report("batch_gradient", gs, gp, same);
    ok &= same;

    std::printf("\nSLD vs SLG on expression parsing (odd lengths)\n");
    const Program t2 = Program::parse(read_file(corpus + "/expressions.sdcg"));
    const auto rows = run_parse_bench(t2, read_term("expression(N)"), 1, 7, 2, {Strategy::SLD, Strategy::SLG},
                                      std::max<std::size_t>(1, repeats / 2));
    std::printf("%s", bench_csv(rows).c_str());
    for (std::size_t i = 0; i + 1 < rows.size(); i += 2)
        ok &= rows[i].answers == rows[i + 1].answers;

    return ok ? 0 : 1;
}
