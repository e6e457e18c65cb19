#pragma once

#include "stochlog/program.hpp"
#include "stochlog/resolution.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace stochlog {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitNoProof = 2, kExitNumeric = 3 };

/// One measurement of parsing a length-n sequence of distinct symbols.
struct BenchRow {
    std::size_t length = 0;
    Strategy strategy = Strategy::SLG;
    std::size_t answers = 0;
    std::size_t nodes = 0;
    double wall_ms = 0.0; // median over the timed repeats
};

/// Parses `goal` over `x0 .. x(n-1)` for n = min_length, min_length + step, ...
/// up to max_length and every strategy, with one warmup and `repeats` timed runs each.
std::vector<BenchRow> run_parse_bench(const Program &program, const Term &goal, std::size_t min_length,
                                      std::size_t max_length, std::size_t step, const std::vector<Strategy> &strategies,
                                      std::size_t repeats, const ResolveOptions &base = {});

std::string bench_csv(const std::vector<BenchRow> &rows);

/// Splits `[a, tok:b, vec:c]` at top-level commas into item texts.
std::vector<std::string> split_sequence(const std::string &text);

/// Runs the command-line tool; returns its exit code.
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace stochlog
