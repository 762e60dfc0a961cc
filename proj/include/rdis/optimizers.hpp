#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rdis/expr.hpp"
#include "rdis/interval.hpp"
#include "rdis/rng.hpp"

namespace rdis {

/// Thrown from inside an optimizer when the evaluation or wall-clock budget
/// runs out. Drivers catch it at the top level and keep the incumbent.
class BudgetExhausted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shared tally of term evaluations. A value evaluation of one term and a
/// gradient evaluation of one term each cost one unit.
class EvalCounter {
public:
    using Clock = std::chrono::steady_clock;

    std::uint64_t value_evals = 0;
    std::uint64_t gradient_evals = 0;
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max();
    std::optional<Clock::time_point> deadline;

    std::uint64_t total() const { return value_evals + gradient_evals; }
    void charge_values(std::uint64_t n) { check(n), value_evals += n; }
    void charge_gradients(std::uint64_t n) { check(n), gradient_evals += n; }

private:
    void check(std::uint64_t n) const;
};

/// Feasible region plus the region restarts are drawn from. Sampling bounds
/// equal the domain when it is finite; otherwise a surrogate box centred on
/// a reference point is used.
struct Box {
    std::vector<Interval> domain;
    std::vector<Interval> sampling;

    static Box make(std::vector<Interval> domain, std::span<const double> center, double half_width);
    std::vector<double> sample(RngStream& rng) const;
    std::size_t size() const { return domain.size(); }
};

/// Sum of selected terms as a function of the selected variables, with every
/// other variable held at its value in a shared full-length state vector.
/// Evaluating writes the trial point into the state; optimizers leave the
/// best point they found there on return.
class Subspace {
public:
    Subspace(const ObjectiveFunction& f, std::vector<int> vars, std::vector<int> terms, std::vector<double>& state,
             EvalCounter* counter = nullptr, double offset = 0.0);

    /// All variables and terms of f, including the offset.
    static Subspace whole(const ObjectiveFunction& f, std::vector<double>& state, EvalCounter* counter = nullptr);
    /// The given variables and every term touching them.
    static Subspace touching(const ObjectiveFunction& f, std::vector<int> vars, std::vector<double>& state,
                             EvalCounter* counter = nullptr);

    std::size_t dim() const { return vars_.size(); }
    const std::vector<int>& vars() const { return vars_; }
    const std::vector<int>& terms() const { return terms_; }
    const ObjectiveFunction& function() const { return *f_; }
    double offset() const { return offset_; }
    std::vector<double>& state() { return *state_; }
    EvalCounter* counter() const { return counter_; }
    /// Position of each variable of f within the subset, or -1.
    std::span<const int> slots() const { return slot_; }

    std::vector<double> current() const;
    void assign(std::span<const double> y);
    std::vector<Interval> domains() const;

    double value(std::span<const double> y);
    double value_and_gradient(std::span<const double> y, std::span<double> grad);

    /// Instrumented call counts (one per value / gradient call, regardless of
    /// the number of terms).
    std::uint64_t value_calls = 0;
    std::uint64_t gradient_calls = 0;

    /// Called with every successfully computed value.
    std::function<void(double)> observer;

private:
    const ObjectiveFunction* f_;
    std::vector<int> vars_;
    std::vector<int> terms_;
    std::vector<double>* state_;
    EvalCounter* counter_;
    double offset_;
    std::vector<int> slot_;
};

struct OptResult {
    double value = std::numeric_limits<double>::infinity();
    double start_value = std::numeric_limits<double>::infinity();  // value at the (first) start point
    std::vector<double> point;  // over the optimized subset, in subset order
    int iterations = 0;
    std::uint64_t value_evals = 0;
    std::uint64_t gradient_evals = 0;
    bool converged = false;
    int restarts_used = 0;
};

enum class OptimizerKind { Grid, Cgd, Lm };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Cgd;
    int grid_points = 5;
    double gradient_tolerance = 1e-8;
    int max_iterations = 1000;
    double armijo_c = 1e-4;
    double backtrack = 0.5;  // largest shrink factor per rejected trial
    int max_backtracks = 60;
    double eta = 0.0;  // forcing parameter; 0 disables the forcing test
    int restarts = 1;
    int early_stop_iterations = 25;
    double progress_tolerance = 1e-8;  // relative improvement counted as progress
    double sampling_half_width = 1.0;

    void validate() const;
};

/// One accepted descent step: f_new <= f_old + c * slope must hold, where
/// slope = <grad, x_new - x_old>.
struct StepRecord {
    double f_old;
    double f_new;
    double slope;
    double lambda;
    double c;
};

/// Exhaustive search over the lattice with s points per dimension, both
/// endpoints included. Requires finite domains.
OptResult grid_search(Subspace& sub, int s);

/// Polak-Ribiere+ conjugate gradient with Armijo backtracking. Steps are
/// projected onto finite domain bounds. When `forcing_reference` > 0 and
/// eta > 0 the run also stops once the gradient norm drops below
/// eta * forcing_reference.
OptResult cgd_minimize(Subspace& sub, std::span<const double> x0, const OptimizerConfig& cfg,
                       std::vector<StepRecord>* log = nullptr, double forcing_reference = 0.0);

/// Levenberg-Marquardt on a subspace whose terms are all of the form r^2.
OptResult lm_minimize(Subspace& sub, std::span<const double> x0, const OptimizerConfig& cfg);

using InnerOptimizer = std::function<OptResult(Subspace&, std::span<const double>)>;

/// First start from x0, then `restarts - 1` uniform draws from the box's
/// sampling bounds. Returns the best over all starts.
OptResult multi_start(const InnerOptimizer& inner, Subspace& sub, std::span<const double> x0, const Box& box,
                      int restarts, RngStream& rng);

/// Inner optimizer for cfg.kind with cfg's iteration cap.
InnerOptimizer make_inner(const OptimizerConfig& cfg);

}  // namespace rdis
