// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rdis/harness.hpp"
#include "rdis/optimizers.hpp"
#include "rdis/problems.hpp"
#include "rdis/rdis.hpp"
#include "rdis/structure.hpp"

using namespace rdis;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct Family {
    std::string name;
    ObjectiveFunction f;
    Box box;
    std::vector<double> center;
};

std::vector<Family> families() {
    std::vector<Family> out;
    {
        SinusoidSpec s;
        s.h = 5;
        s.a = 4;
        ObjectiveFunction f = make_sinusoid(s);
        std::vector<double> c(f.num_variables(), 0.0);
        Box b = Box::make(f.domains(), c, 1.0);
        out.push_back({"sinusoid", std::move(f), std::move(b), std::move(c)});
    }
    {
        ChainSpec s;
        s.residues = 10;
        ObjectiveFunction f = make_lj_chain(s);
        std::vector<double> c(f.num_variables(), 0.0);
        Box b = Box::make(f.domains(), c, 1.0);
        out.push_back({"ljchain", std::move(f), std::move(b), std::move(c)});
    }
    {
        BundleSpec s;
        BundleProblem p = make_bundle(s);
        std::vector<double> c = p.ground_truth;
        std::vector<Interval> dom = p.f.domains();
        Box b;
        b.domain = dom;
        for (double v : c) {
            const double w = 0.02 * (1.0 + std::abs(v));
            b.sampling.emplace_back(v - w, v + w);
        }
        out.push_back({"bundle", std::move(p.f), std::move(b), std::move(c)});
    }
    return out;
}

// ---------------------------------------------------------------------------

Outcome sinusoid_calibration() {
    const std::size_t expected[] = {16372, 24404, 30036};
    std::ostringstream d;
    bool ok = true;
    for (int i = 0; i < 3; ++i) {
        SinusoidSpec s;
        s.h = 11;
        s.a = 4 * (i + 1);
        const ObjectiveFunction f = make_sinusoid(s);
        ok = ok && f.num_variables() == 4095 && f.num_terms() == expected[i];
        d << "a=" << s.a << ": " << f.num_variables() << " vars/" << f.num_terms() << " terms; ";
    }
    return {ok, d.str()};
}

Outcome decomposition_exactness() {
    std::ostringstream d;
    bool ok = true;
    RngStream rng(11);
    for (const auto& fam : families()) {
        const ObjectiveFunction& f = fam.f;
        TermVarGraph g(f);
        std::vector<int> all_vars(f.num_variables()), all_terms(f.num_terms());
        std::iota(all_vars.begin(), all_vars.end(), 0);
        std::iota(all_terms.begin(), all_terms.end(), 0);
        RdisConfig cfg;
        const std::vector<int> cut = choose_vars(f, all_vars, all_terms, cfg, rng);
        double worst = 0.0;
        int multi = 0;
        for (int trial = 0; trial < 100; ++trial) {
            const std::vector<double> x = fam.box.sample(rng);
            // Alternate between the partitioner's cutset and a random subset.
            std::vector<int> C;
            if (trial % 2 == 0) {
                C = cut;
            } else {
                for (int v : all_vars) {
                    if (rng.uniform() < 0.3) C.push_back(v);
                }
            }
            std::vector<Interval> box = f.domains();
            for (int v : C) box[v] = Interval::point(x[v]);
            const SimplifiedFunction s = simplify(f, all_terms, box, 0.1);
            const ComponentView view = decompose(g, C, s);
            double sum = s.offset;
            double scale = 1.0;
            for (const auto& comp : view.components) sum += component_value(f, comp, x);
            for (int t : view.scope_empty_terms) sum += f.evaluate_term(t, x);
            for (std::size_t t = 0; t < f.num_terms(); ++t) scale += std::abs(f.evaluate_term(static_cast<int>(t), x));
            const double direct = simplified_value(f, s, x);
            const double err = std::abs(sum - direct) / scale;
            worst = std::max(worst, err);
            if (view.components.size() > 1) ++multi;
        }
        ok = ok && worst <= 1e-12;
        d << fam.name << " max rel err " << worst << " (" << multi << "/100 split); ";
    }
    return {ok, d.str()};
}

Outcome simplification_bound() {
    std::ostringstream d;
    bool ok = true;
    ChainSpec spec;
    spec.residues = 20;
    const ObjectiveFunction f = make_lj_chain(spec);
    for (double eps : {0.5, 1.0, 2.0}) {
        std::uint64_t events = 0, checks = 0, violations = 0;
        RngStream sample_rng(7);
        RdisHooks hooks;
        hooks.on_simplify = [&](const SimplifyEvent& e) {
            ++events;
            if (e.result->removed.empty()) return;
            std::vector<double> x(f.num_variables(), 0.0);
            const double bound = static_cast<double>(e.result->removed.size()) * e.epsilon;
            for (int p = 0; p < 100; ++p) {
                for (std::size_t v = 0; v < x.size(); ++v) x[v] = sample_rng.uniform(e.box[v].lo(), e.box[v].hi());
                // Retained terms appear on both sides, so only removed terms differ.
                double diff = 0.0;
                for (const auto& r : e.result->removed) diff += r.constant - f.evaluate_term(r.term, x);
                ++checks;
                if (!(std::abs(diff) <= bound)) ++violations;
            }
        };
        RdisConfig cfg;
        cfg.epsilon = eps;
        cfg.restarts = 1;
        EvalCounter counter;
        counter.limit = 3'000'000;
        RngStream rng(3);
        std::vector<double> x0(f.num_variables(), 0.0);
        try {
            rdis::rdis(f, x0, cfg, rng, &counter, &hooks);
        } catch (const BudgetExhausted&) {
        }
        ok = ok && violations == 0 && checks > 0;
        d << "eps=" << eps << ": " << events << " simplify calls, " << checks << " checks, " << violations
          << " violations; ";
    }
    return {ok, d.str()};
}

Outcome interval_soundness() {
    std::ostringstream d;
    bool ok = true;
    RngStream rng(5);
    for (const auto& fam : families()) {
        const ObjectiveFunction& f = fam.f;
        int violations = 0, skipped = 0;
        for (int trial = 0; trial < 1000; ++trial) {
            const Term& t = f.term(static_cast<int>(rng.below(f.num_terms())));
            std::vector<Interval> box = f.domains();
            std::vector<double> x = fam.center;
            for (int v : t.scope) {
                const Interval& s = fam.box.sampling[v];
                double a = rng.uniform(s.lo(), s.hi());
                double b = trial % 10 == 0 ? a : rng.uniform(s.lo(), s.hi());
                if (a > b) std::swap(a, b);
                box[v] = Interval(a, b);
                x[v] = rng.uniform(a, b);
            }
            Interval bounds;
            try {
                bounds = term_bounds(t, box);
            } catch (const IntervalDomainError&) {
                ++skipped;
                continue;
            }
            const double value = t.expr.evaluate(x);
            if (!bounds.contains(value)) ++violations;
        }
        ok = ok && violations == 0 && skipped < 500;
        d << fam.name << " " << violations << " violations (" << skipped << " unbounded); ";
    }
    return {ok, d.str()};
}

Outcome gradient_check() {
    std::ostringstream d;
    bool ok = true;
    RngStream rng(9);
    for (const auto& fam : families()) {
        const ObjectiveFunction& f = fam.f;
        std::vector<int> all(f.num_variables());
        std::iota(all.begin(), all.end(), 0);
        double worst = 0.0;
        for (int p = 0; p < 100; ++p) {
            const std::vector<double> x = fam.box.sample(rng);
            const std::vector<double> g = f.gradient(x, all);
            const std::vector<double> fd = oracle::fd_gradient(f, x, 1e-6);
            for (std::size_t i = 0; i < g.size(); ++i) {
                worst = std::max(worst, std::abs(g[i] - fd[i]) / std::max(1.0, std::abs(g[i])));
            }
        }
        ok = ok && worst <= 1e-5;
        d << fam.name << " max rel err " << worst << "; ";
    }
    return {ok, d.str()};
}

Outcome grid_oracle() {
    SinusoidSpec spec;
    spec.h = 3;
    spec.a = 2;
    const ObjectiveFunction f = make_sinusoid(spec);
    const int s = 21;
    const std::vector<double> x_dp = oracle::sinusoid_tree_dp(spec, s);
    RdisConfig cfg;
    cfg.d_min = 1;
    cfg.optimizer.kind = OptimizerKind::Grid;
    cfg.optimizer.grid_points = s;
    RngStream rng(1);
    std::vector<double> x0(f.num_variables(), 0.0);
    const RdisResult r = rdis::rdis(f, x0, cfg, rng);
    const double v_dp = f.evaluate(x_dp);
    const double v_rdis = f.evaluate(r.best.x);
    const bool ok = f.num_variables() == 15 && v_rdis == v_dp && r.best.value == r.best.true_value;
    return {ok, fmt("tree DP %.17g, RDIS %.17g, same point %d, lattice evals %llu", v_dp, v_rdis,
                    static_cast<int>(x_dp == r.best.x), static_cast<unsigned long long>(r.stats.lattice_evals))};
}

Outcome complexity_scaling() {
    const int s = 5;
    std::uint64_t evals[2];
    for (int i = 0; i < 2; ++i) {
        const int n = 16 << i;
        const ObjectiveFunction f = make_separable_quadratic(n);
        RdisConfig cfg;
        cfg.d_min = 1;
        cfg.optimizer.kind = OptimizerKind::Grid;
        cfg.optimizer.grid_points = s;
        RngStream rng(1);
        std::vector<double> x0(n, 0.0);
        evals[i] = rdis::rdis(f, x0, cfg, rng).stats.lattice_evals;
    }
    const double ratio = static_cast<double>(evals[1]) / static_cast<double>(evals[0]);
    const double naive_log10 = 16 * std::log10(static_cast<double>(s));
    return {ratio <= 4.0, fmt("lattice evals n=16: %llu, n=32: %llu (x%.2f); naive grid grows by %d^16 = 10^%.1f",
                              static_cast<unsigned long long>(evals[0]), static_cast<unsigned long long>(evals[1]),
                              ratio, s, naive_log10)};
}

Outcome degeneracy() {
    std::ostringstream d;
    bool ok = true;
    std::vector<std::pair<std::string, ObjectiveFunction>> fams;
    {
        SinusoidSpec s;
        s.h = 4;
        s.a = 4;
        fams.emplace_back("sinusoid", make_sinusoid(s));
    }
    {
        ChainSpec s;
        s.residues = 6;
        fams.emplace_back("ljchain", make_lj_chain(s));
    }
    int identical = 0, total = 0;
    for (const auto& [name, f] : fams) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            RngStream start_rng(seed * 1000);
            std::vector<double> x0 = Box::make(f.domains(), std::vector<double>(f.num_variables(), 0.0), 1.0)
                                         .sample(start_rng);
            RdisConfig cfg;
            cfg.d_min = static_cast<int>(f.num_variables());
            cfg.restarts = 3;
            RngStream r1(seed);
            const RdisResult a = rdis::rdis(f, x0, cfg, r1);

            std::vector<double> state = x0;
            Subspace sub = Subspace::whole(f, state);
            const Box box = Box::make(sub.domains(), x0, cfg.optimizer.sampling_half_width);
            RngStream r2(seed);
            const OptResult b = multi_start(make_inner(cfg.optimizer), sub, x0, box, cfg.restarts, r2);
            ++total;
            if (a.best.value == b.value && a.best.x == state) ++identical;
        }
    }
    ok = identical == total;
    d << identical << "/" << total << " bitwise identical (value and point)";
    return {ok, d.str()};
}

Outcome restart_probability() {
    const ObjectiveFunction f = make_double_well(0.1, -2.0, 2.0);
    OptimizerConfig ocfg;
    // Basin ratio of the global well under the descent method itself.
    const int grid = 4001;
    int global = 0;
    for (int i = 0; i < grid; ++i) {
        std::vector<double> state{-2.0 + 4.0 * i / (grid - 1)};
        Subspace sub = Subspace::whole(f, state);
        cgd_minimize(sub, sub.current(), ocfg);
        if (state[0] < 0.0) ++global;
    }
    const double ratio = static_cast<double>(global) / grid;
    std::ostringstream d;
    d << "v/V=" << ratio << "; ";
    bool ok = true;
    for (int t : {1, 3, 10}) {
        int success = 0;
        const int runs = 200;
        for (int run = 0; run < runs; ++run) {
            RngStream rng(100000 + 17 * run + t);
            std::vector<double> x0{rng.uniform(-2.0, 2.0)};
            RdisConfig cfg;
            cfg.restarts = t;
            const RdisResult r = rdis::rdis(f, x0, cfg, rng);
            if (r.best.x[0] < 0.0) ++success;
        }
        const double p = 1.0 - std::pow(1.0 - ratio, t);
        const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / runs);
        const double freq = static_cast<double>(success) / runs;
        // A zero standard error would make the band empty; allow one run of slack.
        const double tol = std::max(3.0 * se, 1.0 / runs);
        ok = ok && std::abs(freq - p) <= tol;
        d << fmt("t=%d: %.3f vs %.3f (3se=%.3f); ", t, freq, p, 3.0 * se);
    }
    return {ok, d.str()};
}

// Desk-scale RDIS settings: few level restarts and a coarse improvement
// tolerance keep the per-node loop short enough for small budgets.
void desk_settings(RunConfig& cfg) {
    cfg.rdis.restarts = 2;
    cfg.rdis.patience = 1;
    cfg.rdis.improvement_tolerance = 0.1;
}

Outcome equal_budget_ordering() {
    const std::string problem = "gen:sinusoid:h=7,k=2,a=4";
    const Problem prob = load_problem(problem);
    int wins = 0;
    std::ostringstream d;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        double best[3];
        const Algorithm algs[3] = {Algorithm::Rdis, Algorithm::Cgd, Algorithm::BcdCgd};
        for (int i = 0; i < 3; ++i) {
            RunConfig cfg;
            cfg.problem = problem;
            cfg.algorithm = algs[i];
            cfg.seed = seed;
            cfg.eval_limit = 2'000'000;
            cfg.record_time = false;
            desk_settings(cfg);
            best[i] = run(cfg, prob).best.value;
        }
        const bool win = best[0] <= best[1] && best[0] <= best[2];
        wins += win ? 1 : 0;
        d << fmt("[%llu] %.1f/%.1f/%.1f ", static_cast<unsigned long long>(seed), best[0], best[1], best[2]);
    }
    return {wins >= 8, fmt("RDIS best on %d/10 seeds (rdis/cgd/bcd-cgd): ", wins) + d.str()};
}

Outcome epsilon_sweep_trend() {
    const std::string problem = "gen:ljchain:residues=30";
    const Problem prob = load_problem(problem);
    std::vector<std::uint64_t> simplified, evals;
    std::vector<double> minima;
    const double epsilons[] = {0.0, 0.25, 0.5, 1.0, 2.0};
    for (double eps : epsilons) {
        RunConfig cfg;
        cfg.problem = problem;
        cfg.algorithm = Algorithm::RdisNrr;
        cfg.epsilon = eps;
        cfg.seed = 1;
        cfg.restarts = 20;
        cfg.record_time = false;
        desk_settings(cfg);
        const RunResult r = run(cfg, prob);
        simplified.push_back(r.stats.simplified_terms);
        evals.push_back(r.evals);
        minima.push_back(r.best.value);
    }
    bool ok = true;
    std::ostringstream d;
    for (std::size_t i = 0; i < simplified.size(); ++i) {
        if (i > 0) {
            ok = ok && simplified[i] >= simplified[i - 1];
            ok = ok && static_cast<double>(evals[i]) <= 1.05 * static_cast<double>(evals[i - 1]);
        }
        d << fmt("eps=%g: simplified %llu, evals %llu, min %.3f; ", epsilons[i],
                 static_cast<unsigned long long>(simplified[i]), static_cast<unsigned long long>(evals[i]), minima[i]);
    }
    return {ok, d.str()};
}

Outcome lm_recovery() {
    BundleSpec spec;
    spec.cameras = 8;
    spec.points = 50;
    spec.param_noise = 1e-3;
    spec.noise = 0.0;
    spec.seed = 4;
    BundleProblem p = make_bundle(spec);
    std::vector<double> state = p.initial;
    Subspace sub = Subspace::whole(p.f, state);
    OptimizerConfig cfg;
    cfg.max_iterations = 200;
    const double start = p.f.evaluate(state);
    const OptResult r = lm_minimize(sub, sub.current(), cfg);
    const double residuals = 2.0 * static_cast<double>(p.observations.size());
    const double rms0 = std::sqrt(start / residuals);
    const double rms = std::sqrt(p.f.evaluate(state) / residuals);
    return {rms <= 1e-6, fmt("RMS %.3g -> %.3g after %d iterations (%zu observations, %zu variables)", rms0, rms,
                             r.iterations, p.observations.size(), p.f.num_variables())};
}

Outcome dynamic_graph_oracle() {
    int mismatches = 0, checks = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        RngStream rng(seed);
        const int nv = 30, nt = 40;
        std::vector<std::vector<int>> scopes(nt);
        for (auto& s : scopes) {
            const int size = 1 + static_cast<int>(rng.below(3));
            for (int i = 0; i < size; ++i) {
                const int v = static_cast<int>(rng.below(nv));
                if (std::find(s.begin(), s.end(), v) == s.end()) s.push_back(v);
            }
            std::sort(s.begin(), s.end());
        }
        TermVarGraph g(nv, scopes);
        std::vector<char> va(nv, 1), ta(nt, 1);
        std::vector<TermVarGraph::Entity> stack;
        for (int op = 0; op < 200; ++op) {
            if (!stack.empty() && rng.uniform() < 0.4) {
                const auto e = stack.back();
                stack.pop_back();
                g.restore(e);
                (e.kind == TermVarGraph::Kind::Variable ? va : ta)[e.id] = 1;
            } else {
                const bool var = rng.uniform() < 0.5;
                auto& active = var ? va : ta;
                std::vector<int> cand;
                for (std::size_t i = 0; i < active.size(); ++i) {
                    if (active[i]) cand.push_back(static_cast<int>(i));
                }
                if (cand.empty()) continue;
                const int id = cand[rng.below(cand.size())];
                const TermVarGraph::Entity e{var ? TermVarGraph::Kind::Variable : TermVarGraph::Kind::Term, id};
                g.remove(e);
                stack.push_back(e);
                active[id] = 0;
            }
            ++checks;
            if (!(g.components() == oracle::components_union_find(nv, scopes, va, ta))) ++mismatches;
            // A temporary view on top of the current state.
            std::vector<int> extra;
            std::vector<char> va2 = va;
            for (int v = 0; v < nv; ++v) {
                if (va[v] && rng.uniform() < 0.2) extra.push_back(v), va2[v] = 0;
            }
            ++checks;
            if (!(g.components_after(extra, {}) == oracle::components_union_find(nv, scopes, va2, ta))) ++mismatches;
        }
    }
    return {mismatches == 0, fmt("%d mismatches over %d checks", mismatches, checks)};
}

Outcome partitioner_quality() {
    int within = 0, total = 0, optimal = 0;
    std::ostringstream d;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        RngStream rng(seed);
        const Hypergraph h = oracle::random_hypergraph(8, 10, rng);
        PartitionOptions opts;
        const PartitionResult r = partition_cutset(h, opts);
        const int best = oracle::exhaustive_min_cut(h, opts.balance);
        const int got = static_cast<int>(r.cutset.size());
        ++total;
        const bool ok = best < 0 ? !r.split : (r.split && got <= 2 * best);
        if (ok) ++within;
        if (r.split && got == best) ++optimal;
        if (!ok) d << fmt("seed %llu: cut %d vs optimum %d; ", static_cast<unsigned long long>(seed), got, best);
    }
    return {within == total, fmt("%d/%d within 2x of optimum (%d optimal) ", within, total, optimal) + d.str()};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"sinusoid calibration", sinusoid_calibration},
        {"decomposition exactness", decomposition_exactness},
        {"simplification bound", simplification_bound},
        {"interval soundness", interval_soundness},
        {"gradient check", gradient_check},
        {"grid oracle equivalence", grid_oracle},
        {"complexity scaling", complexity_scaling},
        {"degeneracy equivalence", degeneracy},
        {"restart probability", restart_probability},
        {"sinusoid ordering at equal budget", equal_budget_ordering},
        {"epsilon sweep trend", epsilon_sweep_trend},
        {"LM recovery", lm_recovery},
        {"dynamic graph oracle", dynamic_graph_oracle},
        {"partitioner quality", partitioner_quality},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << " (" << fmt("%.1f", secs)
                  << " s): " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
