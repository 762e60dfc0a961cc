#include "rdis/harness.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <set>
#include <sstream>
#include <utility>

#include "rdis/dsl.hpp"
#include "rdis/problems.hpp"

namespace rdis {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("invalid number for " + key + ": '" + v + "'");
    }
}

long long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long d = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("invalid integer for " + key + ": '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Algorithms and problems

Algorithm parse_algorithm(const std::string& name) {
    static const std::map<std::string, Algorithm> names = {
        {"rdis", Algorithm::Rdis},  {"rdis-rnd", Algorithm::RdisRnd}, {"rdis-nrr", Algorithm::RdisNrr},
        {"cgd", Algorithm::Cgd},    {"bcd-cgd", Algorithm::BcdCgd},   {"lm", Algorithm::Lm},
        {"bcd-lm", Algorithm::BcdLm}, {"grid", Algorithm::Grid}};
    const auto it = names.find(name);
    if (it == names.end()) throw ConfigError("unknown algorithm '" + name + "'");
    return it->second;
}

const char* algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::Rdis: return "rdis";
        case Algorithm::RdisRnd: return "rdis-rnd";
        case Algorithm::RdisNrr: return "rdis-nrr";
        case Algorithm::Cgd: return "cgd";
        case Algorithm::BcdCgd: return "bcd-cgd";
        case Algorithm::Lm: return "lm";
        case Algorithm::BcdLm: return "bcd-lm";
        case Algorithm::Grid: return "grid";
    }
    return "?";
}

std::map<std::string, std::string> parse_params(const std::string& text) {
    std::map<std::string, std::string> out;
    for (const auto& item : split_list(text)) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + item + "'");
        out[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
    }
    return out;
}

std::uint64_t problem_hash(const ObjectiveFunction& f) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : to_dsl(f)) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

Problem generate(const std::string& family, const std::map<std::string, std::string>& params) {
    std::set<std::string> used;
    auto get = [&](const std::string& key, double def) {
        used.insert(key);
        const auto it = params.find(key);
        return it == params.end() ? def : to_double(key, it->second);
    };
    auto get_int = [&](const std::string& key, long long def) {
        used.insert(key);
        const auto it = params.find(key);
        return it == params.end() ? def : to_int(key, it->second);
    };
    Problem p;
    if (family == "sinusoid") {
        SinusoidSpec s;
        s.h = static_cast<int>(get_int("h", s.h));
        s.k = static_cast<int>(get_int("k", s.k));
        s.a = static_cast<int>(get_int("a", s.a));
        s.c0 = get("c0", s.c0);
        s.c1 = get("c1", s.c1);
        s.c2 = get("c2", s.c2);
        s.lo = get("lo", s.lo);
        s.hi = get("hi", s.hi);
        try {
            s.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        p.f = make_sinusoid(s);
        p.blocks = sinusoid_blocks(s, static_cast<int>(get_int("block_levels", 3)));
    } else if (family == "ljchain") {
        ChainSpec s;
        s.residues = static_cast<int>(get_int("residues", s.residues));
        s.angles_per_residue = static_cast<int>(get_int("angles", s.angles_per_residue));
        s.cutoff = get("cutoff", s.cutoff);
        s.min_bond_separation = static_cast<int>(get_int("separation", s.min_bond_separation));
        const double A = get("A", 1.0);
        const double B = get("B", 1.0);
        for (auto& row : s.A) std::fill(std::begin(row), std::end(row), A);
        for (auto& row : s.B) std::fill(std::begin(row), std::end(row), B);
        try {
            s.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        p.f = make_lj_chain(s);
        p.blocks = lj_blocks(s);
    } else if (family == "bundle") {
        BundleSpec s;
        s.cameras = static_cast<int>(get_int("cameras", s.cameras));
        s.points = static_cast<int>(get_int("points", s.points));
        s.density = get("density", s.density);
        s.noise = get("noise", s.noise);
        s.param_noise = get("param_noise", 1e-3);
        s.seed = static_cast<std::uint64_t>(get_int("seed", 1));
        try {
            s.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        BundleProblem b = make_bundle(s);
        p.f = std::move(b.f);
        p.initial = std::move(b.initial);
        p.blocks = bundle_blocks(s.cameras, s.points);
    } else {
        throw ConfigError("unknown problem family '" + family + "'");
    }
    for (const auto& [k, v] : params) {
        if (!used.count(k)) throw ConfigError("unknown parameter '" + k + "' for " + family);
    }
    return p;
}

}  // namespace

Problem load_problem(const std::string& source) {
    Problem p;
    if (source.rfind("gen:", 0) == 0) {
        const std::string rest = source.substr(4);
        const auto colon = rest.find(':');
        const std::string family = rest.substr(0, colon);
        p = generate(family, parse_params(colon == std::string::npos ? "" : rest.substr(colon + 1)));
    } else if (source.size() > 4 && source.substr(source.size() - 4) == ".bal") {
        if (!std::filesystem::exists(source)) throw ConfigError("problem file not found: " + source);
        BundleProblem b = load_bal(source);
        p.f = std::move(b.f);
        p.initial = std::move(b.initial);
        p.blocks = bundle_blocks(b.cameras, b.points);
    } else {
        p.f = parse_problem(read_file(source));
        for (std::size_t v = 0; v < p.f.num_variables(); ++v) p.blocks.push_back({static_cast<int>(v)});
    }
    p.source = source;
    p.hash = problem_hash(p.f);
    return p;
}

// ---------------------------------------------------------------------------
// Run configuration

void RunConfig::validate() const {
    if (problem.empty()) throw ConfigError("no problem given");
    if (time_limit < 0.0) throw ConfigError("time limit must be positive");
    if (restarts < 0) throw ConfigError("restarts must be positive");
    if (restarts == 0 && eval_limit == 0 && time_limit == 0.0) {
        throw ConfigError("budget of zero: set restarts, an evaluation limit or a time limit");
    }
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
    if (bcd_rounds < 1) throw ConfigError("bcd rounds must be positive");
    try {
        rdis.validate();
        optimizer.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto both = [&](auto setter) {
        setter(cfg.optimizer);
        setter(cfg.rdis.optimizer);
    };
    if (key == "problem") cfg.problem = value;
    else if (key == "algorithm") cfg.algorithm = parse_algorithm(value);
    else if (key == "epsilon") cfg.epsilon = to_double(key, value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_int(key, value));
    else if (key == "time_limit") {
        cfg.time_limit = to_double(key, value);
        if (!(cfg.time_limit > 0.0)) throw ConfigError("budget of zero: time limit must be positive");
    } else if (key == "eval_limit") {
        const long long n = to_int(key, value);
        if (n <= 0) throw ConfigError("budget of zero: evaluation limit must be positive");
        cfg.eval_limit = static_cast<std::uint64_t>(n);
    } else if (key == "restarts") {
        cfg.restarts = static_cast<int>(to_int(key, value));
        if (cfg.restarts <= 0) throw ConfigError("budget of zero: restarts must be positive");
    } else if (key == "level_restarts") cfg.rdis.restarts = static_cast<int>(to_int(key, value));
    else if (key == "patience") cfg.rdis.patience = static_cast<int>(to_int(key, value));
    else if (key == "improvement_tolerance") cfg.rdis.improvement_tolerance = to_double(key, value);
    else if (key == "d_min") cfg.rdis.d_min = static_cast<int>(to_int(key, value));
    else if (key == "partition_k") cfg.rdis.partition.k = static_cast<int>(to_int(key, value));
    else if (key == "balance") cfg.rdis.partition.balance = to_double(key, value);
    else if (key == "value_iterations") cfg.rdis.max_value_iterations = static_cast<int>(to_int(key, value));
    else if (key == "subspace") {
        if (value == "cgd") cfg.rdis.optimizer.kind = OptimizerKind::Cgd;
        else if (value == "lm") cfg.rdis.optimizer.kind = OptimizerKind::Lm;
        else if (value == "grid") cfg.rdis.optimizer.kind = OptimizerKind::Grid;
        else throw ConfigError("unknown subspace optimizer '" + value + "'");
    } else if (key == "grid_points") {
        const int s = static_cast<int>(to_int(key, value));
        both([&](OptimizerConfig& o) { o.grid_points = s; });
    } else if (key == "inner_iterations") {
        const int n = static_cast<int>(to_int(key, value));
        both([&](OptimizerConfig& o) { o.early_stop_iterations = n; });
    } else if (key == "max_iterations") {
        const int n = static_cast<int>(to_int(key, value));
        both([&](OptimizerConfig& o) { o.max_iterations = n; });
    } else if (key == "armijo_c") {
        const double c = to_double(key, value);
        both([&](OptimizerConfig& o) { o.armijo_c = c; });
    } else if (key == "eta") {
        const double e = to_double(key, value);
        both([&](OptimizerConfig& o) { o.eta = e; });
    } else if (key == "sampling_half_width") {
        const double w = to_double(key, value);
        both([&](OptimizerConfig& o) { o.sampling_half_width = w; });
    } else if (key == "bcd_rounds") cfg.bcd_rounds = static_cast<int>(to_int(key, value));
    else if (key == "record_time") cfg.record_time = to_bool(key, value);
    else if (key == "trajectory") cfg.trajectory_path = value;
    else if (key == "summary") cfg.summary_path = value;
    else if (key == "name") cfg.name = value;
    else throw ConfigError("unknown setting '" + key + "'");
}

// ---------------------------------------------------------------------------
// Trajectories

std::string Trajectory::format(const TrajectoryPoint& p) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.6f,%llu,%.17g", p.elapsed_s, static_cast<unsigned long long>(p.evals),
                  p.best_value);
    return buf;
}

void Trajectory::open(const std::string& path) {
    out_ = std::make_shared<std::ofstream>(path);
    if (!*out_) throw std::runtime_error("cannot open " + path + " for writing");
    *out_ << header << '\n';
    for (const auto& p : points_) *out_ << format(p) << '\n';
    out_->flush();
}

void Trajectory::add(const TrajectoryPoint& p) {
    points_.push_back(p);
    if (out_) {
        *out_ << format(p) << '\n';
        out_->flush();
    }
}

void Trajectory::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << header << '\n';
    for (const auto& p : points_) out << format(p) << '\n';
}

// ---------------------------------------------------------------------------
// Block-coordinate descent

OptResult bcd_minimize(const ObjectiveFunction& f, const std::vector<std::vector<int>>& blocks,
                       const OptimizerConfig& inner, int rounds, std::span<const double> x0, EvalCounter* counter,
                       const std::function<void(std::span<const double>)>& on_block) {
    if (rounds < 1) throw std::invalid_argument("rounds must be positive");
    if (x0.size() != f.num_variables()) throw std::invalid_argument("start point size mismatch");
    std::vector<char> seen(f.num_variables(), 0);
    for (const auto& b : blocks) {
        for (int v : b) {
            if (v < 0 || v >= static_cast<int>(f.num_variables())) throw std::invalid_argument("block variable out of range");
            if (seen[v]++) throw std::invalid_argument("blocks overlap at variable " + std::to_string(v));
        }
    }
    std::vector<double> state(x0.begin(), x0.end());
    std::vector<Subspace> subs;
    subs.reserve(blocks.size());
    for (const auto& b : blocks) subs.push_back(Subspace::touching(f, b, state, counter));

    auto full_value = [&] {
        if (counter) counter->charge_values(f.num_terms());
        return f.evaluate(state);
    };
    OptResult r;
    double value = full_value();
    r.start_value = value;
    for (int round = 0; round < rounds; ++round) {
        for (auto& sub : subs) {
            if (sub.dim() == 0) continue;
            const auto start = sub.current();
            try {
                if (inner.kind == OptimizerKind::Lm) lm_minimize(sub, start, inner);
                else if (inner.kind == OptimizerKind::Grid) grid_search(sub, inner.grid_points);
                else cgd_minimize(sub, start, inner);
            } catch (const EvaluationError&) {
                sub.assign(start);
            }
            if (on_block) on_block(state);
        }
        ++r.iterations;
        const double next = full_value();
        const bool stalled = value - next <= inner.progress_tolerance * std::abs(value);
        value = std::min(value, next);
        if (stalled) {
            r.converged = true;
            break;
        }
    }
    for (const auto& sub : subs) {
        r.value_evals += sub.value_calls;
        r.gradient_evals += sub.gradient_calls;
    }
    r.value = value;
    r.point = std::move(state);
    r.restarts_used = 1;
    return r;
}

// ---------------------------------------------------------------------------
// Runs

namespace {

class Recorder {
public:
    Recorder(const ObjectiveFunction& f, EvalCounter& counter, Trajectory& traj, bool record_time)
        : f_(f), counter_(counter), traj_(traj), record_time_(record_time), start_(EvalCounter::Clock::now()) {}

    void observe(double v, std::span<const double> x) {
        if (!(v < best_)) return;
        best_ = v;
        best_x_.assign(x.begin(), x.end());
        traj_.add({elapsed(), counter_.total(), v});
    }

    void observe_state(std::span<const double> x) {
        double v;
        try {
            v = f_.evaluate(x);
        } catch (const EvaluationError&) {
            return;
        }
        observe(v, x);
    }

    void close() {
        if (std::isfinite(best_)) traj_.add({elapsed(), counter_.total(), best_});
    }

    double elapsed() const {
        if (!record_time_) return 0.0;
        return std::chrono::duration<double>(EvalCounter::Clock::now() - start_).count();
    }
    double best() const { return best_; }
    const std::vector<double>& best_x() const { return best_x_; }
    std::uint64_t last_full = 0;

private:
    const ObjectiveFunction& f_;
    EvalCounter& counter_;
    Trajectory& traj_;
    bool record_time_;
    EvalCounter::Clock::time_point start_;
    double best_ = std::numeric_limits<double>::infinity();
    std::vector<double> best_x_;
};

void add_stats(RecursionStats& into, const RecursionStats& s) {
    into.node_count += s.node_count;
    into.optimizer_calls += s.optimizer_calls;
    into.term_evals += s.term_evals;
    into.lattice_evals += s.lattice_evals;
    into.simplify_calls += s.simplify_calls;
    into.tested_terms += s.tested_terms;
    into.simplified_terms += s.simplified_terms;
    into.exact_terms += s.exact_terms;
    into.max_depth = std::max(into.max_depth, s.max_depth);
}

}  // namespace

RunResult run(const RunConfig& cfg) { return run(cfg, load_problem(cfg.problem)); }

RunResult run(const RunConfig& cfg, const Problem& problem) {
    cfg.validate();
    const ObjectiveFunction& f = problem.f;
    RunResult out;
    out.problem_hash = problem.hash;
    if (!cfg.trajectory_path.empty()) out.trajectory.open(cfg.trajectory_path);

    EvalCounter counter;
    if (cfg.eval_limit > 0) counter.limit = cfg.eval_limit;
    const auto t0 = EvalCounter::Clock::now();
    if (cfg.time_limit > 0.0) {
        counter.deadline = t0 + std::chrono::duration_cast<EvalCounter::Clock::duration>(
                                    std::chrono::duration<double>(cfg.time_limit));
    }
    Recorder rec(f, counter, out.trajectory, cfg.record_time);

    // Restart states come from their own stream so every algorithm sees the
    // same sequence for a given seed.
    RngStream restart_rng(cfg.seed);
    RngStream algo_rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
    std::vector<double> center = problem.initial;
    if (center.empty()) center.assign(f.num_variables(), 0.0);
    for (std::size_t i = 0; i < center.size(); ++i) {
        const Interval& d = f.variable(static_cast<int>(i)).domain;
        center[i] = std::clamp(center[i], d.lo(), d.hi());
    }
    const Box box = Box::make(f.domains(), center, cfg.optimizer.sampling_half_width);

    RdisConfig rcfg = cfg.rdis;
    rcfg.epsilon = cfg.epsilon;
    if (cfg.algorithm == Algorithm::RdisRnd) rcfg.random_selection = true;
    if (cfg.algorithm == Algorithm::RdisNrr) rcfg.restarts = 1;
    OptimizerConfig ocfg = cfg.optimizer;
    if (cfg.algorithm == Algorithm::Lm || cfg.algorithm == Algorithm::BcdLm) ocfg.kind = OptimizerKind::Lm;
    else if (cfg.algorithm == Algorithm::Grid) ocfg.kind = OptimizerKind::Grid;
    else ocfg.kind = OptimizerKind::Cgd;
    if (cfg.algorithm == Algorithm::Lm || cfg.algorithm == Algorithm::BcdLm) {
        for (const auto& t : f.terms()) {
            const auto& root = t.expr.nodes()[t.expr.root()];
            if (root.op != Op::Pow || root.index != 2) throw ConfigError("LM needs a sum-of-squares problem");
        }
    }

    RdisHooks hooks;
    hooks.on_improve = [&](std::span<const double> state, int depth) {
        // Full evaluations are not charged; throttle them so they cost at
        // most about as much as the counted work.
        if (depth > 1 && counter.total() - rec.last_full < f.num_terms()) return;
        rec.last_full = counter.total();
        rec.observe_state(state);
    };

    const bool single = cfg.algorithm == Algorithm::Grid;
    std::vector<double> state;
    try {
        for (int r = 0; cfg.restarts == 0 || r < cfg.restarts; ++r) {
            if (r == 0 && !problem.initial.empty()) state = center;
            else state = box.sample(restart_rng);
            RngStream rng = algo_rng.split();
            ++out.starts;
            if (r == 0) rec.observe_state(state);
            switch (cfg.algorithm) {
                case Algorithm::Rdis:
                case Algorithm::RdisRnd:
                case Algorithm::RdisNrr: {
                    RdisResult res = rdis(f, state, rcfg, rng, &counter, &hooks);
                    rec.observe_state(res.best.x);
                    add_stats(out.stats, res.stats);
                    break;
                }
                case Algorithm::Cgd:
                case Algorithm::Lm:
                case Algorithm::Grid: {
                    Subspace sub = Subspace::whole(f, state, &counter);
                    sub.observer = [&](double v) { rec.observe(v, sub.state()); };
                    const auto start = sub.current();
                    try {
                        if (ocfg.kind == OptimizerKind::Cgd) cgd_minimize(sub, start, ocfg);
                        else if (ocfg.kind == OptimizerKind::Lm) lm_minimize(sub, start, ocfg);
                        else grid_search(sub, ocfg.grid_points);
                    } catch (const EvaluationError&) {
                    }
                    break;
                }
                case Algorithm::BcdCgd:
                case Algorithm::BcdLm: {
                    bcd_minimize(f, problem.blocks, ocfg, cfg.bcd_rounds, state, &counter,
                                 [&](std::span<const double> s) { rec.observe_state(s); });
                    break;
                }
            }
            if (single) break;
        }
    } catch (const BudgetExhausted&) {
        out.budget_exhausted = true;
    }
    rec.close();
    out.evals = counter.total();
    out.wall_s = std::chrono::duration<double>(EvalCounter::Clock::now() - t0).count();
    out.best.value = rec.best();
    out.best.true_value = rec.best();
    out.best.x = rec.best_x();
    if (!cfg.summary_path.empty()) {
        std::ofstream s(cfg.summary_path);
        if (!s) throw std::runtime_error("cannot open " + cfg.summary_path + " for writing");
        s << summary_header() << '\n' << summary_row(cfg, out) << '\n';
    }
    return out;
}

std::string summary_header() {
    return "name,algorithm,problem_hash,seed,epsilon,best_value,evals,wall_s,starts,simplified_terms,optimizer_calls,"
           "budget_exhausted";
}

std::string summary_row(const RunConfig& cfg, const RunResult& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s,%s,%016llx,%llu,%.17g,%.17g,%llu,%.6f,%d,%llu,%llu,%d",
                  cfg.name.empty() ? algorithm_name(cfg.algorithm) : cfg.name.c_str(), algorithm_name(cfg.algorithm),
                  static_cast<unsigned long long>(r.problem_hash), static_cast<unsigned long long>(cfg.seed),
                  cfg.epsilon, r.best.value, static_cast<unsigned long long>(r.evals),
                  cfg.record_time ? r.wall_s : 0.0, r.starts,
                  static_cast<unsigned long long>(r.stats.simplified_terms),
                  static_cast<unsigned long long>(r.stats.optimizer_calls), r.budget_exhausted ? 1 : 0);
    return buf;
}

// ---------------------------------------------------------------------------
// Comparisons

CompareResult compare(const std::vector<RunConfig>& configs) {
    if (configs.size() < 2) throw ConfigError("compare needs at least two runs");
    std::map<std::string, Problem> problems;
    CompareResult out;
    std::uint64_t hash = 0;
    for (const auto& cfg : configs) {
        cfg.validate();
        auto it = problems.find(cfg.problem);
        if (it == problems.end()) it = problems.emplace(cfg.problem, load_problem(cfg.problem)).first;
        if (out.rows.empty()) hash = it->second.hash;
        else if (it->second.hash != hash) throw ConfigError("runs use different problems (hash mismatch)");
        RunResult r = run(cfg, it->second);
        out.rows.push_back({cfg.name.empty() ? algorithm_name(cfg.algorithm) : cfg.name, cfg.group, cfg.algorithm,
                            cfg.epsilon, cfg.seed, r.best.value, cfg.record_time ? r.wall_s : 0.0, r.evals, r.stats.simplified_terms,
                            r.problem_hash});
        out.runs.push_back(std::move(r));
    }
    return out;
}

std::string CompareResult::table_csv() const {
    std::ostringstream ss;
    ss << "name,algorithm,epsilon,seed,best_value,wall_s,evals,simplified_terms,problem_hash\n";
    for (const auto& r : rows) {
        char buf[512];
        std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%llu,%.17g,%.6f,%llu,%llu,%016llx\n", r.name.c_str(),
                      algorithm_name(r.algorithm), r.epsilon, static_cast<unsigned long long>(r.seed), r.best_value,
                      r.wall_s, static_cast<unsigned long long>(r.evals),
                      static_cast<unsigned long long>(r.simplified_terms), static_cast<unsigned long long>(r.hash));
        ss << buf;
    }
    return ss.str();
}

std::string CompareResult::sweep_csv() const {
    struct Acc {
        double min_value = std::numeric_limits<double>::infinity();
        double time = 0.0;
        std::uint64_t simplified = 0;
        std::uint64_t evals = 0;
    };
    std::map<std::string, std::map<double, Acc>> groups;
    for (const auto& r : rows) {
        Acc& a = groups[r.group][r.epsilon];
        a.min_value = std::min(a.min_value, r.best_value);
        a.time += r.wall_s;
        a.simplified += r.simplified_terms;
        a.evals += r.evals;
    }
    std::ostringstream ss;
    ss << "run,epsilon,min_value,total_time_s,simplified_terms,evals\n";
    for (const auto& [g, eps] : groups) {
        for (const auto& [e, a] : eps) {
            char buf[512];
            std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.6f,%llu,%llu\n", g.c_str(), e, a.min_value, a.time,
                          static_cast<unsigned long long>(a.simplified), static_cast<unsigned long long>(a.evals));
            ss << buf;
        }
    }
    return ss.str();
}

CompareSpec parse_compare_config(const std::string& text) {
    struct Block {
        std::string name;
        std::vector<std::pair<std::string, std::string>> settings;
        int line;
    };
    std::vector<std::pair<std::string, std::string>> global;
    std::vector<Block> blocks;
    CompareSpec spec;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::string header;
        if (line.front() == '[' && line.back() == ']') header = trim(line.substr(1, line.size() - 2));
        else if (line.rfind("run ", 0) == 0 && line.find('=') == std::string::npos) header = line;
        if (!header.empty()) {
            if (header.rfind("run", 0) != 0) {
                throw ConfigError("line " + std::to_string(line_no) + ": expected [run <name>]");
            }
            blocks.push_back({trim(header.substr(3)), {}, line_no});
            if (blocks.back().name.empty()) blocks.back().name = "run" + std::to_string(blocks.size());
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (blocks.empty()) {
            if (key == "out_dir") spec.out_dir = value;
            else if (key == "svg") spec.svg_path = value;
            else global.emplace_back(key, value);
        } else {
            blocks.back().settings.emplace_back(key, value);
        }
    }
    if (blocks.empty()) throw ConfigError("compare config defines no runs");

    for (const auto& b : blocks) {
        std::vector<std::string> seeds{""};
        std::vector<std::string> epsilons{""};
        RunConfig cfg;
        cfg.name = b.name;
        cfg.group = b.name;
        try {
            for (const auto* list : {&std::as_const(global), &b.settings}) {
                for (const auto& [k, v] : *list) {
                    if (k == "seeds") seeds = split_list(v);
                    else if (k == "epsilons") epsilons = split_list(v);
                    else apply_setting(cfg, k, v);
                }
            }
        } catch (const ConfigError& e) {
            throw ConfigError("run '" + b.name + "' (line " + std::to_string(b.line) + "): " + e.what());
        }
        for (const auto& e : epsilons) {
            for (const auto& s : seeds) {
                RunConfig c = cfg;
                if (!e.empty()) {
                    apply_setting(c, "epsilon", e);
                    c.name = b.name + "_eps" + e;
                }
                if (!s.empty()) apply_setting(c, "seed", s);
                if (!spec.out_dir.empty()) {
                    c.trajectory_path = (std::filesystem::path(spec.out_dir) /
                                         (c.name + "_seed" + std::to_string(c.seed) + ".csv"))
                                            .string();
                }
                spec.runs.push_back(std::move(c));
            }
        }
    }
    return spec;
}

std::string trajectories_svg(const std::vector<std::pair<std::string, const Trajectory*>>& series) {
    const double W = 640, H = 400, L = 70, R = 150, T = 20, B = 40;
    double xmax = 1, ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
    for (const auto& [name, t] : series) {
        for (const auto& p : t->points()) {
            xmax = std::max(xmax, static_cast<double>(p.evals));
            ymin = std::min(ymin, p.best_value);
            ymax = std::max(ymax, p.best_value);
        }
    }
    if (!std::isfinite(ymin)) ymin = 0, ymax = 1;
    if (ymax <= ymin) ymax = ymin + 1;
    auto sx = [&](double x) { return L + (W - L - R) * x / xmax; };
    auto sy = [&](double y) { return T + (H - T - B) * (ymax - y) / (ymax - ymin); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};
    std::ostringstream ss;
    ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    ss << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    ss << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
    ss << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    ss << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 8 << "\" font-size=\"12\" text-anchor=\"middle\">"
       << "evaluations (max " << static_cast<unsigned long long>(xmax) << ")</text>\n";
    ss << "<text x=\"4\" y=\"" << T + 10 << "\" font-size=\"11\">" << ymax << "</text>\n";
    ss << "<text x=\"4\" y=\"" << H - B << "\" font-size=\"11\">" << ymin << "</text>\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = colors[i % 7];
        ss << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        double last_y = 0;
        bool first = true;
        for (const auto& p : series[i].second->points()) {
            const double x = sx(static_cast<double>(p.evals));
            if (!first) ss << x << ',' << last_y << ' ';  // step shape
            last_y = sy(p.best_value);
            ss << x << ',' << last_y << ' ';
            first = false;
        }
        ss << "\"/>\n";
        ss << "<text x=\"" << W - R + 8 << "\" y=\"" << T + 16 * (i + 1) << "\" font-size=\"12\" fill=\"" << color
           << "\">" << series[i].first << "</text>\n";
    }
    ss << "</svg>\n";
    return ss.str();
}

}  // namespace rdis
