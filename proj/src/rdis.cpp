#include "rdis/rdis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rdis {

void RdisConfig::validate() const {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be non-negative");
    if (d_min < 1) throw std::invalid_argument("d_min must be at least 1");
    if (partition.k < 2) throw std::invalid_argument("partition k must be at least 2");
    if (restarts < 1) throw std::invalid_argument("restarts must be at least 1");
    if (patience < 1) throw std::invalid_argument("patience must be at least 1");
    if (max_value_iterations < 1) throw std::invalid_argument("value iteration cap must be positive");
    if (!(improvement_tolerance >= 0.0)) throw std::invalid_argument("improvement tolerance must be non-negative");
    optimizer.validate();
}

// ---------------------------------------------------------------------------
// Simplification and decomposition

SimplifiedFunction simplify(const ObjectiveFunction& f, std::span<const int> terms, std::span<const Interval> box,
                            double eps) {
    SimplifiedFunction out;
    std::vector<double> point;
    for (int id : terms) {
        const Term& t = f.term(id);
        const bool pinned = std::all_of(t.scope.begin(), t.scope.end(), [&](int v) {
            return box[v].lo() == box[v].hi();
        });
        if (pinned) {
            if (point.empty()) point.assign(f.num_variables(), 0.0);
            for (int v : t.scope) point[v] = box[v].lo();
            const double k = t.expr.evaluate(point);
            out.removed.push_back({id, k, Interval::point(k)});
            out.offset += k;
            continue;
        }
        Interval b;
        try {
            b = term_bounds(t, box);
        } catch (const IntervalDomainError&) {
            out.retained.push_back(id);
            continue;
        }
        if (b.is_finite() && b.width() <= 2.0 * eps) {
            const double k = b.midpoint();
            out.removed.push_back({id, k, b});
            out.offset += k;
        } else {
            out.retained.push_back(id);
        }
    }
    return out;
}

double simplified_value(const ObjectiveFunction& f, const SimplifiedFunction& s, std::span<const double> x) {
    double v = s.offset;
    for (int t : s.retained) v += f.term(t).expr.evaluate(x);
    return v;
}

ComponentView decompose(TermVarGraph& g, std::span<const int> assigned, const SimplifiedFunction& s) {
    std::vector<int> removed;
    removed.reserve(s.removed.size());
    for (const auto& r : s.removed) removed.push_back(r.term);
    return g.components_after(assigned, removed);
}

double component_value(const ObjectiveFunction& f, const Component& c, std::span<const double> x) {
    double v = 0.0;
    for (int t : c.terms) v += f.term(t).expr.evaluate(x);
    return v;
}

std::vector<int> choose_vars(const ObjectiveFunction& f, std::span<const int> vars, std::span<const int> terms,
                             const RdisConfig& cfg, RngStream& rng) {
    std::vector<int> all(vars.begin(), vars.end());
    if (static_cast<int>(vars.size()) <= cfg.d_min) return all;
    const Hypergraph h = build_hypergraph(f, vars, terms);
    const PartitionResult p = partition_cutset(h, cfg.partition);
    if (!p.split) return all;
    if (!cfg.random_selection) return p.cutset;
    // Partial Fisher-Yates draw of |cutset| variables.
    for (std::size_t i = 0; i < p.cutset.size(); ++i) {
        const std::size_t j = i + rng.below(all.size() - i);
        std::swap(all[i], all[j]);
    }
    all.resize(p.cutset.size());
    std::sort(all.begin(), all.end());
    return all;
}

// ---------------------------------------------------------------------------
// Recursion

namespace {

class Engine {
public:
    Engine(const ObjectiveFunction& f, std::span<const double> x0, const RdisConfig& cfg, EvalCounter& counter,
           const RdisHooks* hooks)
        : f_(f),
          cfg_(cfg),
          counter_(counter),
          hooks_(hooks),
          graph_(f),
          state_(x0.begin(), x0.end()),
          domains_(f.domains()),
          box_(domains_),
          term_mark_(f.num_terms(), 0) {
        early_ = cfg.optimizer;
        early_.max_iterations = cfg.optimizer.early_stop_iterations;
    }

    double solve(const Component& comp, int depth, RngStream& rng, double offset);

    std::vector<double>& state() { return state_; }
    RecursionStats& stats() { return stats_; }

private:
    // Restores the graph and the box entries of assigned variables on exit.
    struct AssignScope {
        Engine& e;
        std::size_t epoch;
        std::span<const int> vars;
        ~AssignScope() {
            e.graph_.restore_to(epoch);
            for (int v : vars) e.box_[v] = e.domains_[v];
        }
    };

    double solve_components(std::vector<Component> comps, int depth, RngStream& rng);
    double evaluate_assignment(std::span<const int> C, std::span<const int> touching, std::span<const int> U,
                               double node_const, std::uint64_t carried, int depth, RngStream& rng,
                               NodeRecord& rec);
    double base_case(const Component& comp, std::span<const int> terms, double node_const, int depth,
                     RngStream& rng, NodeRecord& rec);
    double fallback_value(std::span<const int> vars, std::span<const int> terms, std::span<const double> entry,
                          double node_const);
    std::vector<int> active_terms_touching(std::span<const int> vars);
    // Returns the number of terms removed by the width test; they are added
    // to the stats only when `count` is set.
    std::uint64_t record_simplify(const SimplifiedFunction& s, std::span<const int> terms, int depth, bool count);
    void improved(int depth) {
        if (hooks_ && hooks_->on_improve) hooks_->on_improve(state_, depth);
    }
    void finish(NodeRecord& rec, std::uint64_t evals0) {
        rec.term_evals = counter_.total() - evals0;
        if (stats_.nodes.size() < cfg_.record_limit) stats_.nodes.push_back(rec);
    }
    std::vector<double> snapshot(std::span<const int> vars) const {
        std::vector<double> s(vars.size());
        for (std::size_t i = 0; i < vars.size(); ++i) s[i] = state_[vars[i]];
        return s;
    }
    void load(std::span<const int> vars, std::span<const double> s) {
        for (std::size_t i = 0; i < vars.size(); ++i) state_[vars[i]] = s[i];
    }

    const ObjectiveFunction& f_;
    const RdisConfig& cfg_;
    OptimizerConfig early_;
    EvalCounter& counter_;
    const RdisHooks* hooks_;
    TermVarGraph graph_;
    std::vector<double> state_;
    std::vector<Interval> domains_;
    std::vector<Interval> box_;
    std::vector<int> term_mark_;
    int mark_epoch_ = 0;
    RecursionStats stats_;
};

std::vector<int> Engine::active_terms_touching(std::span<const int> vars) {
    ++mark_epoch_;
    std::vector<int> out;
    for (int v : vars) {
        for (int t : graph_.terms_of(v)) {
            if (graph_.term_active(t) && term_mark_[t] != mark_epoch_) {
                term_mark_[t] = mark_epoch_;
                out.push_back(t);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::uint64_t Engine::record_simplify(const SimplifiedFunction& s, std::span<const int> terms, int depth,
                                      bool count) {
    ++stats_.simplify_calls;
    stats_.tested_terms += terms.size();
    std::uint64_t exact = 0;
    for (const auto& r : s.removed) exact += r.bounds.width() == 0.0 ? 1 : 0;
    stats_.exact_terms += exact;
    const std::uint64_t approx = s.removed.size() - exact;
    if (count) stats_.simplified_terms += approx;
    if (exact > 0) counter_.charge_values(exact);
    if (hooks_ && hooks_->on_simplify) hooks_->on_simplify({&f_, terms, box_, &s, cfg_.epsilon, depth});
    return approx;
}

double Engine::solve_components(std::vector<Component> comps, int depth, RngStream& rng) {
    std::vector<RngStream> child;
    child.reserve(comps.size());
    for (std::size_t i = 0; i < comps.size(); ++i) child.push_back(rng.split());
    std::vector<std::size_t> order(comps.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (comps[a].variables.size() != comps[b].variables.size()) {
            return comps[a].variables.size() > comps[b].variables.size();
        }
        return comps[a].terms.size() > comps[b].terms.size();
    });
    std::vector<double> values(comps.size(), 0.0);
    for (std::size_t i : order) {
        if (!comps[i].terms.empty()) values[i] = solve(comps[i], depth, child[i], 0.0);
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum;
}

double Engine::fallback_value(std::span<const int> vars, std::span<const int> terms, std::span<const double> entry,
                              double node_const) {
    load(vars, entry);
    double v = node_const;
    try {
        counter_.charge_values(terms.size());
        for (int t : terms) v += f_.term(t).expr.evaluate(state_);
    } catch (const EvaluationError&) {
        return std::numeric_limits<double>::infinity();
    }
    return v;
}

double Engine::base_case(const Component& comp, std::span<const int> terms, double node_const, int depth,
                         RngStream& rng, NodeRecord& rec) {
    rec.base_case = true;
    rec.cut_size = static_cast<int>(comp.variables.size());
    Subspace sub(f_, comp.variables, std::vector<int>(terms.begin(), terms.end()), state_, &counter_, node_const);
    const auto entry = sub.current();
    OptResult res;
    try {
        if (cfg_.optimizer.kind == OptimizerKind::Grid) {
            res = grid_search(sub, cfg_.optimizer.grid_points);
            stats_.lattice_evals += res.value_evals;
        } else {
            const Box box = Box::make(sub.domains(), entry, cfg_.optimizer.sampling_half_width);
            res = multi_start(make_inner(cfg_.optimizer), sub, entry, box, cfg_.restarts, rng);
        }
    } catch (const EvaluationError&) {
        ++rec.optimizer_calls;
        ++stats_.optimizer_calls;
        return fallback_value(comp.variables, terms, entry, node_const);
    }
    rec.iterations = res.restarts_used;
    ++rec.optimizer_calls;
    ++stats_.optimizer_calls;
    improved(depth);
    return res.value;
}

double Engine::evaluate_assignment(std::span<const int> C, std::span<const int> touching, std::span<const int> U,
                                   double node_const, std::uint64_t carried, int depth, RngStream& rng,
                                   NodeRecord& rec) {
    AssignScope scope{*this, graph_.epoch(), C};
    for (int v : C) {
        graph_.remove_variable(v);
        box_[v] = Interval::point(state_[v]);
    }
    const SimplifiedFunction s = simplify(f_, touching, box_, cfg_.epsilon);
    // Terms simplified on entry to the node stay simplified for every
    // assignment, so they count toward each iteration's simplified function.
    stats_.simplified_terms += record_simplify(s, touching, depth, true) + carried;
    for (const auto& r : s.removed) graph_.remove_term(r.term);
    auto comps = graph_.components_from(U);
    rec.max_components = std::max(rec.max_components, static_cast<int>(comps.size()));
    return node_const + s.offset + solve_components(std::move(comps), depth + 1, rng);
}

double Engine::solve(const Component& comp, int depth, RngStream& rng, double offset) {
    const std::uint64_t evals0 = counter_.total();
    AssignScope scope{*this, graph_.epoch(), {}};
    ++stats_.node_count;
    stats_.max_depth = std::max(stats_.max_depth, depth);
    NodeRecord rec;
    rec.depth = depth;
    rec.num_vars = static_cast<int>(comp.variables.size());

    double node_const = offset;
    std::vector<int> terms = comp.terms;
    std::uint64_t carried = 0;
    if (cfg_.epsilon > 0.0) {
        SimplifiedFunction s = simplify(f_, terms, box_, cfg_.epsilon);
        if (!s.removed.empty()) {
            carried = record_simplify(s, terms, depth, false);
            for (const auto& r : s.removed) graph_.remove_term(r.term);
            node_const += s.offset;
            terms = std::move(s.retained);
        }
    }
    const auto& vars = comp.variables;
    auto finish_early = [&] {
        stats_.simplified_terms += carried;
        finish(rec, evals0);
    };
    if (terms.empty()) {
        finish_early();
        return node_const;
    }
    if (depth == 0 || terms.size() != comp.terms.size()) {
        auto comps = graph_.components_from(vars);
        if (comps.size() > 1) {
            rec.max_components = static_cast<int>(comps.size());
            const double v = node_const + solve_components(std::move(comps), depth + 1, rng);
            finish_early();
            return v;
        }
    }

    const std::vector<int> C = choose_vars(f_, vars, terms, cfg_, rng);
    if (C.empty()) {
        auto comps = graph_.components_from(vars);
        rec.max_components = static_cast<int>(comps.size());
        const double v = node_const + solve_components(std::move(comps), depth + 1, rng);
        finish_early();
        return v;
    }
    if (C.size() == vars.size()) {
        const double v = base_case(comp, terms, node_const, depth, rng, rec);
        finish_early();
        return v;
    }
    rec.cut_size = static_cast<int>(C.size());

    std::vector<int> U;
    std::set_difference(vars.begin(), vars.end(), C.begin(), C.end(), std::back_inserter(U));
    const std::vector<int> touching = active_terms_touching(C);
    const auto entry = snapshot(vars);
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_state = entry;

    // Returns whether v beat the incumbent by more than the improvement
    // tolerance; any strict improvement is kept.
    auto consider = [&](double v) {
        ++rec.iterations;
        if (v < best) {
            const bool significant =
                !std::isfinite(best) || best - v > cfg_.improvement_tolerance * std::max(1.0, std::abs(best));
            best = v;
            best_state = snapshot(vars);
            improved(depth);
            return significant;
        }
        load(vars, best_state);
        return false;
    };

    if (cfg_.optimizer.kind == OptimizerKind::Grid) {
        // Every lattice point of x_C is a value-loop iteration.
        const int s = cfg_.optimizer.grid_points;
        for (int v : C) {
            if (!domains_[v].is_finite()) throw std::invalid_argument("grid search requires finite domains");
        }
        std::vector<int> idx(C.size(), 0);
        while (true) {
            for (std::size_t i = 0; i < C.size(); ++i) {
                const Interval& d = domains_[C[i]];
                state_[C[i]] = idx[i] == s - 1 ? d.hi() : d.lo() + (d.hi() - d.lo()) * idx[i] / (s - 1);
            }
            ++stats_.lattice_evals;
            consider(evaluate_assignment(C, touching, U, node_const, carried, depth, rng, rec));
            std::size_t i = 0;
            while (i < C.size() && ++idx[i] == s) idx[i++] = 0;
            if (i == C.size()) break;
        }
        load(vars, best_state);
        finish(rec, evals0);
        return best;
    }

    Subspace sub(f_, C, touching, state_, &counter_);
    const Box cbox = Box::make(sub.domains(), sub.current(), cfg_.optimizer.sampling_half_width);
    std::vector<double> start = sub.current();
    int starts = 1;
    int stale = 0;
    for (int it = 0; it < cfg_.max_value_iterations; ++it) {
        bool progress = false;
        try {
            OptResult r = cfg_.optimizer.kind == OptimizerKind::Lm ? lm_minimize(sub, start, early_)
                                                                   : cgd_minimize(sub, start, early_);
            progress = r.start_value - r.value > cfg_.optimizer.progress_tolerance * std::abs(r.start_value);
            ++rec.optimizer_calls;
            ++stats_.optimizer_calls;
        } catch (const EvaluationError&) {
            ++rec.optimizer_calls;
            ++stats_.optimizer_calls;
            load(vars, best_state);
            if (starts >= cfg_.restarts) break;
            ++starts;
            start = cbox.sample(rng);
            continue;
        }
        double v;
        try {
            v = evaluate_assignment(C, touching, U, node_const, carried, depth, rng, rec);
        } catch (const EvaluationError&) {
            v = std::numeric_limits<double>::infinity();
        }
        if (consider(v)) {
            stale = 0;
        } else if (++stale >= cfg_.patience) {
            break;
        }
        if (progress) {
            start = sub.current();
        } else {
            if (starts >= cfg_.restarts) break;
            ++starts;
            start = cbox.sample(rng);
        }
    }
    if (!std::isfinite(best)) best = fallback_value(vars, terms, entry, node_const);
    else load(vars, best_state);
    finish(rec, evals0);
    return best;
}

}  // namespace

RdisResult rdis(const ObjectiveFunction& f, std::span<const double> x0, const RdisConfig& cfg, RngStream& rng,
                EvalCounter* counter, const RdisHooks* hooks) {
    cfg.validate();
    if (x0.size() != f.num_variables()) throw std::invalid_argument("start point size mismatch");
    for (std::size_t i = 0; i < x0.size(); ++i) {
        if (!f.variable(static_cast<int>(i)).domain.contains(x0[i])) {
            throw std::invalid_argument("start point outside the domain of " + f.variable(static_cast<int>(i)).name);
        }
    }
    EvalCounter local;
    EvalCounter& c = counter ? *counter : local;
    const std::uint64_t evals0 = c.total();
    Engine e(f, x0, cfg, c, hooks);
    Component all;
    all.variables.resize(f.num_variables());
    std::iota(all.variables.begin(), all.variables.end(), 0);
    all.terms.resize(f.num_terms());
    std::iota(all.terms.begin(), all.terms.end(), 0);

    RdisResult out;
    if (f.num_terms() == 0) {
        out.best.value = f.offset();
    } else {
        out.best.value = e.solve(all, 0, rng, f.offset());
    }
    out.best.x = e.state();
    out.best.true_value = f.evaluate(out.best.x);
    // Without approximation the two differ only by summation order.
    if (cfg.epsilon == 0.0) out.best.value = out.best.true_value;
    out.stats = std::move(e.stats());
    out.stats.term_evals = c.total() - evals0;
    return out;
}

}  // namespace rdis
