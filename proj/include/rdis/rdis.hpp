#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "rdis/expr.hpp"
#include "rdis/optimizers.hpp"
#include "rdis/rng.hpp"
#include "rdis/structure.hpp"

namespace rdis {

struct RdisConfig {
    double epsilon = 0.0;
    int d_min = 2;  // base case when the active variable count is at most this
    PartitionOptions partition;
    int restarts = 5;              // starts per value loop, the inherited one included
    int patience = 3;              // consecutive non-improving iterations before leaving a loop
    int max_value_iterations = 200;  // hard cap on the value loop
    double improvement_tolerance = 1e-6;  // relative gain below which an iteration counts as stale
    bool random_selection = false;   // cutset replaced by a random subset of equal size
    OptimizerConfig optimizer;
    std::size_t record_limit = 100000;  // per-node records kept in the stats

    void validate() const;
};

struct SimplifiedTerm {
    int term;
    double constant;
    Interval bounds;
};

/// Terms split into those kept and those replaced by constants.
struct SimplifiedFunction {
    std::vector<int> retained;
    std::vector<SimplifiedTerm> removed;
    double offset = 0.0;  // sum of removed constants
};

/// Replaces every term whose bounds over `box` have width <= 2*eps by the
/// midpoint of those bounds. Terms whose variables are all pinned to points
/// are removed with their exact value. `box` is indexed by variable.
SimplifiedFunction simplify(const ObjectiveFunction& f, std::span<const int> terms, std::span<const Interval> box,
                            double eps);

/// Sum of retained terms plus the removed constants.
double simplified_value(const ObjectiveFunction& f, const SimplifiedFunction& s, std::span<const double> x);

/// Components of the graph once `assigned` variables and the removed terms
/// are deleted. The graph is left unchanged.
ComponentView decompose(TermVarGraph& g, std::span<const int> assigned, const SimplifiedFunction& s);

double component_value(const ObjectiveFunction& f, const Component& c, std::span<const double> x);

/// Variable selection for a subfunction given by active variables and terms.
/// Returns every variable when there are at most d_min of them or no proper
/// cut exists; otherwise the partitioner's cutset (or, in random mode, a
/// uniformly drawn subset of the same size).
std::vector<int> choose_vars(const ObjectiveFunction& f, std::span<const int> vars, std::span<const int> terms,
                             const RdisConfig& cfg, RngStream& rng);

struct NodeRecord {
    int depth = 0;
    int num_vars = 0;
    int cut_size = 0;  // |x_C|; equals num_vars at a base case
    int max_components = 0;
    int iterations = 0;
    int optimizer_calls = 0;
    std::uint64_t term_evals = 0;  // including descendants
    bool base_case = false;
};

struct RecursionStats {
    std::vector<NodeRecord> nodes;  // post-order, truncated at the record limit
    std::uint64_t node_count = 0;
    std::uint64_t optimizer_calls = 0;
    std::uint64_t term_evals = 0;
    std::uint64_t lattice_evals = 0;  // points evaluated by grid search
    std::uint64_t simplify_calls = 0;
    std::uint64_t tested_terms = 0;      // terms examined by simplification
    std::uint64_t simplified_terms = 0;  // removed by the width test
    std::uint64_t exact_terms = 0;       // removed because their scope was fully assigned
    int max_depth = 0;
};

struct BestRecord {
    double value = std::numeric_limits<double>::infinity();       // simplified objective at x
    double true_value = std::numeric_limits<double>::infinity();  // unsimplified objective at x
    std::vector<double> x;
};

struct RdisResult {
    BestRecord best;
    RecursionStats stats;
};

struct SimplifyEvent {
    const ObjectiveFunction* f;
    std::span<const int> terms;       // terms tested
    std::span<const Interval> box;    // per-variable box used for the bounds
    const SimplifiedFunction* result;
    double epsilon;
    int depth;
};

struct RdisHooks {
    std::function<void(const SimplifyEvent&)> on_simplify;
    /// A node found a better value; `state` is a complete assignment.
    std::function<void(std::span<const double> state, int depth)> on_improve;
};

/// Recursive decomposition optimizer. Throws BudgetExhausted from the
/// counter; callers wanting an incumbent should track on_improve.
RdisResult rdis(const ObjectiveFunction& f, std::span<const double> x0, const RdisConfig& cfg, RngStream& rng,
                EvalCounter* counter = nullptr, const RdisHooks* hooks = nullptr);

}  // namespace rdis
