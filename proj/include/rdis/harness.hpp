#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdis/expr.hpp"
#include "rdis/optimizers.hpp"
#include "rdis/rdis.hpp"

namespace rdis {

/// Invalid run configuration (unknown algorithm, bad key, zero budget...).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Algorithm { Rdis, RdisRnd, RdisNrr, Cgd, BcdCgd, Lm, BcdLm, Grid };

Algorithm parse_algorithm(const std::string& name);
const char* algorithm_name(Algorithm a);

struct Problem {
    std::string source;
    ObjectiveFunction f;
    std::vector<double> initial;  // empty: first start is drawn like a restart
    std::vector<std::vector<int>> blocks;
    std::uint64_t hash = 0;
};

/// `gen:<family>:k=v,...` for the built-in generators, a `.bal` file, or a
/// problem-format text file.
Problem load_problem(const std::string& source);

/// FNV-1a over the canonical text form of f.
std::uint64_t problem_hash(const ObjectiveFunction& f);

/// Parses "k=v,k=v" into a map; throws ConfigError on malformed input.
std::map<std::string, std::string> parse_params(const std::string& text);

struct RunConfig {
    std::string problem;
    Algorithm algorithm = Algorithm::Rdis;
    RdisConfig rdis;
    OptimizerConfig optimizer;  // used by the baselines
    double epsilon = 0.0;
    std::uint64_t seed = 1;
    double time_limit = 0.0;        // seconds; 0 = none
    std::uint64_t eval_limit = 0;   // term evaluations; 0 = none
    int restarts = 0;               // top-level starts; 0 = until a budget runs out
    int bcd_rounds = 50;
    bool record_time = true;        // false writes 0 for elapsed_s (byte-stable output)
    std::string trajectory_path;
    std::string summary_path;
    std::string name;
    std::string group;

    void validate() const;
};

struct TrajectoryPoint {
    double elapsed_s;
    std::uint64_t evals;
    double best_value;
};

/// Best-so-far record, optionally streamed to a CSV file as it grows.
class Trajectory {
public:
    static constexpr const char* header = "elapsed_s,evals,best_value";

    void open(const std::string& path);
    void add(const TrajectoryPoint& p);
    const std::vector<TrajectoryPoint>& points() const { return points_; }
    void write_csv(const std::string& path) const;
    static std::string format(const TrajectoryPoint& p);

private:
    std::vector<TrajectoryPoint> points_;
    std::shared_ptr<std::ofstream> out_;
};

struct RunResult {
    Trajectory trajectory;
    BestRecord best;
    RecursionStats stats;  // summed over top-level starts (RDIS variants only)
    std::uint64_t evals = 0;
    double wall_s = 0.0;
    int starts = 0;
    bool budget_exhausted = false;
    std::uint64_t problem_hash = 0;
};

RunResult run(const RunConfig& cfg);
RunResult run(const RunConfig& cfg, const Problem& problem);

/// Summary CSV row for one run.
std::string summary_header();
std::string summary_row(const RunConfig& cfg, const RunResult& r);

/// Cyclic block-coordinate descent. `blocks` must be disjoint; variables
/// outside every block stay fixed. `on_block` sees the state after each block.
OptResult bcd_minimize(const ObjectiveFunction& f, const std::vector<std::vector<int>>& blocks,
                       const OptimizerConfig& inner, int rounds, std::span<const double> x0,
                       EvalCounter* counter = nullptr,
                       const std::function<void(std::span<const double>)>& on_block = {});

struct CompareRow {
    std::string name;
    std::string group;  // run block the row came from
    Algorithm algorithm;
    double epsilon;
    std::uint64_t seed;
    double best_value;
    double wall_s;
    std::uint64_t evals;
    std::uint64_t simplified_terms;
    std::uint64_t hash;
};

struct CompareResult {
    std::vector<CompareRow> rows;
    std::vector<RunResult> runs;  // parallel to rows
    std::string table_csv() const;
    /// (epsilon, min value, total time, simplified terms, evals) per epsilon of the named run.
    std::string sweep_csv() const;
};

/// Runs every config; all must share one problem.
CompareResult compare(const std::vector<RunConfig>& configs);

/// Expands a key=value run list into configs. Keys before the first
/// `[run <name>]` header apply to every run. `seeds = 1,2,3` and
/// `epsilons = 0,0.5` expand into one config per combination.
struct CompareSpec {
    std::vector<RunConfig> runs;
    std::string out_dir;
    std::string svg_path;
};
CompareSpec parse_compare_config(const std::string& text);

/// Applies one key=value setting to a run config; throws ConfigError.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Self-contained SVG line chart of best value against evaluations.
std::string trajectories_svg(const std::vector<std::pair<std::string, const Trajectory*>>& series);

}  // namespace rdis
