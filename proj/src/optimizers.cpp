#include "rdis/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

namespace rdis {

void EvalCounter::check(std::uint64_t n) const {
    if (total() + n > limit) throw BudgetExhausted("evaluation budget exhausted");
    if (deadline && Clock::now() > *deadline) throw BudgetExhausted("time limit reached");
}

Box Box::make(std::vector<Interval> domain, std::span<const double> center, double half_width) {
    Box b;
    b.sampling.reserve(domain.size());
    for (std::size_t i = 0; i < domain.size(); ++i) {
        const Interval& d = domain[i];
        if (d.is_finite()) {
            b.sampling.push_back(d);
            continue;
        }
        double lo = std::isfinite(d.lo()) ? d.lo() : center[i] - half_width;
        double hi = std::isfinite(d.hi()) ? d.hi() : center[i] + half_width;
        if (lo > hi) {
            if (std::isfinite(d.lo())) hi = lo + 2.0 * half_width;
            else lo = hi - 2.0 * half_width;
        }
        b.sampling.emplace_back(lo, hi);
    }
    b.domain = std::move(domain);
    return b;
}

std::vector<double> Box::sample(RngStream& rng) const {
    std::vector<double> x(sampling.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(sampling[i].lo(), sampling[i].hi());
    return x;
}

// ---------------------------------------------------------------------------
// Subspace

Subspace::Subspace(const ObjectiveFunction& f, std::vector<int> vars, std::vector<int> terms,
                   std::vector<double>& state, EvalCounter* counter, double offset)
    : f_(&f), vars_(std::move(vars)), terms_(std::move(terms)), state_(&state), counter_(counter), offset_(offset) {
    if (state.size() != f.num_variables()) throw std::invalid_argument("state size mismatch");
    slot_.assign(f.num_variables(), -1);
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        int& s = slot_.at(vars_[i]);
        if (s >= 0) throw std::invalid_argument("duplicate variable in subspace");
        s = static_cast<int>(i);
    }
}

Subspace Subspace::whole(const ObjectiveFunction& f, std::vector<double>& state, EvalCounter* counter) {
    std::vector<int> vars(f.num_variables());
    std::iota(vars.begin(), vars.end(), 0);
    std::vector<int> terms(f.num_terms());
    std::iota(terms.begin(), terms.end(), 0);
    return Subspace(f, std::move(vars), std::move(terms), state, counter, f.offset());
}

Subspace Subspace::touching(const ObjectiveFunction& f, std::vector<int> vars, std::vector<double>& state,
                            EvalCounter* counter) {
    std::vector<char> in(f.num_variables(), 0);
    for (int v : vars) in.at(v) = 1;
    std::vector<int> terms;
    for (const auto& t : f.terms()) {
        if (std::any_of(t.scope.begin(), t.scope.end(), [&](int v) { return in[v] != 0; })) terms.push_back(t.id);
    }
    return Subspace(f, std::move(vars), std::move(terms), state, counter);
}

std::vector<double> Subspace::current() const {
    std::vector<double> y(vars_.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = (*state_)[vars_[i]];
    return y;
}

void Subspace::assign(std::span<const double> y) {
    if (y.size() != vars_.size()) throw std::invalid_argument("subspace point size mismatch");
    for (std::size_t i = 0; i < y.size(); ++i) (*state_)[vars_[i]] = y[i];
}

std::vector<Interval> Subspace::domains() const {
    std::vector<Interval> d;
    d.reserve(vars_.size());
    for (int v : vars_) d.push_back(f_->variable(v).domain);
    return d;
}

double Subspace::value(std::span<const double> y) {
    if (counter_) counter_->charge_values(terms_.size());
    ++value_calls;
    assign(y);
    double s = offset_;
    for (int t : terms_) s += f_->term(t).expr.evaluate(*state_);
    if (observer) observer(s);
    return s;
}

double Subspace::value_and_gradient(std::span<const double> y, std::span<double> grad) {
    if (counter_) counter_->charge_gradients(terms_.size());
    ++gradient_calls;
    assign(y);
    std::fill(grad.begin(), grad.end(), 0.0);
    double s = offset_;
    for (int t : terms_) s += f_->term(t).expr.accumulate_gradient(*state_, slot_, grad);
    if (observer) observer(s);
    return s;
}

void OptimizerConfig::validate() const {
    if (grid_points < 2) throw std::invalid_argument("grid needs at least 2 points per dimension");
    if (!(gradient_tolerance >= 0.0)) throw std::invalid_argument("gradient tolerance must be non-negative");
    if (max_iterations < 0 || early_stop_iterations < 1) throw std::invalid_argument("iteration caps must be positive");
    if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw std::invalid_argument("Armijo constant must lie in (0, 1)");
    if (!(backtrack > 0.0 && backtrack < 1.0)) throw std::invalid_argument("backtrack factor must lie in (0, 1)");
    if (!(eta >= 0.0 && eta < 1.0)) throw std::invalid_argument("forcing parameter must lie in [0, 1)");
    if (restarts < 1) throw std::invalid_argument("restarts must be at least 1");
    if (!(sampling_half_width > 0.0)) throw std::invalid_argument("sampling half-width must be positive");
}

// ---------------------------------------------------------------------------
// Grid search

OptResult grid_search(Subspace& sub, int s) {
    if (s < 2) throw std::invalid_argument("grid needs at least 2 points per dimension");
    const auto dom = sub.domains();
    for (const auto& d : dom) {
        if (!d.is_finite()) throw std::invalid_argument("grid search requires finite domains");
    }
    const std::size_t d = sub.dim();
    const auto v0 = sub.value_calls;
    std::vector<int> idx(d, 0);
    std::vector<double> y(d);
    auto coord = [&](std::size_t i, int k) {
        if (k == s - 1) return dom[i].hi();
        return dom[i].lo() + (dom[i].hi() - dom[i].lo()) * k / (s - 1);
    };
    OptResult r;
    bool any = false;
    while (true) {
        for (std::size_t i = 0; i < d; ++i) y[i] = coord(i, idx[i]);
        try {
            const double v = sub.value(y);
            if (!any || v < r.value) {
                r.value = v;
                r.point = y;
                any = true;
            }
        } catch (const EvaluationError&) {
        }
        ++r.iterations;
        std::size_t i = 0;
        while (i < d && ++idx[i] == s) idx[i++] = 0;
        if (i == d) break;
    }
    if (!any) throw EvaluationError("no lattice point could be evaluated");
    sub.assign(r.point);
    r.value_evals = sub.value_calls - v0;
    r.converged = true;
    r.restarts_used = 1;
    return r;
}

// ---------------------------------------------------------------------------
// Conjugate gradient

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

OptResult cgd_minimize(Subspace& sub, std::span<const double> x0, const OptimizerConfig& cfg,
                       std::vector<StepRecord>* log, double forcing_reference) {
    const std::size_t d = sub.dim();
    if (x0.size() != d) throw std::invalid_argument("start point size mismatch");
    const auto dom = sub.domains();
    const auto v0 = sub.value_calls;
    const auto g0 = sub.gradient_calls;

    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> g(d), pg(d), dir(d), xn(d), gn(d), pgn(d);
    for (std::size_t i = 0; i < d; ++i) {
        if (!dom[i].contains(x[i])) throw std::invalid_argument("start point outside domain");
    }
    double fx = sub.value_and_gradient(x, g);
    const double f_start = fx;

    // Gradient with components pointing out of an active bound removed.
    auto project = [&](const std::vector<double>& p, const std::vector<double>& grad, std::vector<double>& out) {
        for (std::size_t i = 0; i < d; ++i) {
            out[i] = grad[i];
            if ((p[i] <= dom[i].lo() && grad[i] > 0.0) || (p[i] >= dom[i].hi() && grad[i] < 0.0)) out[i] = 0.0;
        }
    };
    project(x, g, pg);
    for (std::size_t i = 0; i < d; ++i) dir[i] = -pg[i];
    bool steepest = true;
    double prev_decrease = 0.0;

    OptResult r;
    while (r.iterations < cfg.max_iterations) {
        const double gnorm = std::sqrt(dot(pg, pg));
        if (gnorm <= cfg.gradient_tolerance ||
            (cfg.eta > 0.0 && forcing_reference > 0.0 && gnorm <= cfg.eta * forcing_reference)) {
            r.converged = true;
            break;
        }
        for (std::size_t i = 0; i < d; ++i) {
            if ((x[i] <= dom[i].lo() && dir[i] < 0.0) || (x[i] >= dom[i].hi() && dir[i] > 0.0)) dir[i] = 0.0;
        }
        double slope = dot(g, dir);
        if (!(slope < 0.0)) {
            for (std::size_t i = 0; i < d; ++i) dir[i] = -pg[i];
            steepest = true;
            slope = dot(g, dir);
            if (!(slope < 0.0)) {
                r.converged = true;
                break;
            }
        }

        double dmax = 0.0;
        for (double v : dir) dmax = std::max(dmax, std::abs(v));
        double lambda = prev_decrease > 0.0 ? std::min(2.0 * prev_decrease / -slope, 1e3 / dmax)
                                            : std::min(1.0, 1.0 / dmax);
        bool accepted = false;
        double fn = fx;
        double step_slope = 0.0;
        for (int bt = 0; bt < cfg.max_backtracks; ++bt) {
            bool moved = false;
            for (std::size_t i = 0; i < d; ++i) {
                xn[i] = std::clamp(x[i] + lambda * dir[i], dom[i].lo(), dom[i].hi());
                moved = moved || xn[i] != x[i];
            }
            if (!moved) break;
            try {
                fn = sub.value(xn);
            } catch (const EvaluationError&) {
                lambda *= cfg.backtrack;
                continue;
            }
            step_slope = 0.0;
            for (std::size_t i = 0; i < d; ++i) step_slope += g[i] * (xn[i] - x[i]);
            if (step_slope < 0.0 && fn <= fx + cfg.armijo_c * step_slope) {
                accepted = true;
                break;
            }
            const double denom = 2.0 * (fn - fx - slope * lambda);
            const double trial = denom > 0.0 ? -slope * lambda * lambda / denom : cfg.backtrack * lambda;
            lambda = std::clamp(trial, 0.1 * lambda, cfg.backtrack * lambda);
        }
        if (!accepted) {
            if (!steepest) {
                for (std::size_t i = 0; i < d; ++i) dir[i] = -pg[i];
                steepest = true;
                continue;
            }
            r.converged = true;
            break;
        }

        double fg;
        try {
            fg = sub.value_and_gradient(xn, gn);
        } catch (const EvaluationError&) {
            break;
        }
        if (log) log->push_back({fx, fg, step_slope, lambda, cfg.armijo_c});
        ++r.iterations;
        prev_decrease = fx - fg;
        project(xn, gn, pgn);
        const double gg = dot(pg, pg);
        double beta = 0.0;
        if (gg > 0.0) {
            double num = 0.0;
            for (std::size_t i = 0; i < d; ++i) num += pgn[i] * (pgn[i] - pg[i]);
            beta = std::max(0.0, num / gg);
        }
        const bool stalled = fx - fg <= cfg.progress_tolerance * std::abs(fx);
        x.swap(xn);
        g.swap(gn);
        pg.swap(pgn);
        fx = fg;
        for (std::size_t i = 0; i < d; ++i) dir[i] = -pg[i] + beta * dir[i];
        steepest = beta == 0.0;
        if (stalled) {
            r.converged = true;
            break;
        }
    }
    sub.assign(x);
    r.value = fx;
    r.start_value = f_start;
    r.point = std::move(x);
    r.value_evals = sub.value_calls - v0;
    r.gradient_evals = sub.gradient_calls - g0;
    r.restarts_used = 1;
    return r;
}

// ---------------------------------------------------------------------------
// Levenberg-Marquardt

OptResult lm_minimize(Subspace& sub, std::span<const double> x0, const OptimizerConfig& cfg) {
    const auto& f = sub.function();
    std::vector<Expr> residuals;
    residuals.reserve(sub.terms().size());
    for (int t : sub.terms()) {
        const Expr& e = f.term(t).expr;
        const ExprNode& root = e.nodes()[e.root()];
        if (root.op != Op::Pow || root.index != 2) {
            throw std::invalid_argument("Levenberg-Marquardt needs every term to be a squared residual");
        }
        residuals.push_back(e.subexpression(root.lhs));
    }
    const std::size_t d = sub.dim();
    const std::size_t m = residuals.size();
    if (x0.size() != d) throw std::invalid_argument("start point size mismatch");
    const auto v0 = sub.value_calls;
    const auto g0 = sub.gradient_calls;
    EvalCounter* counter = sub.counter();
    auto& state = sub.state();

    Eigen::VectorXd r(m);
    Eigen::MatrixXd J(m, d);
    auto eval_residuals = [&](std::span<const double> y, Eigen::VectorXd& out) {
        if (counter) counter->charge_values(m);
        ++sub.value_calls;
        sub.assign(y);
        double s = sub.offset();
        for (std::size_t j = 0; j < m; ++j) {
            out[j] = residuals[j].evaluate(state);
            s += out[j] * out[j];
        }
        if (sub.observer) sub.observer(s);
        return s;
    };
    std::vector<double> row(d);
    auto eval_jacobian = [&](std::span<const double> y) {
        if (counter) counter->charge_gradients(m);
        ++sub.gradient_calls;
        sub.assign(y);
        for (std::size_t j = 0; j < m; ++j) {
            std::fill(row.begin(), row.end(), 0.0);
            r[j] = residuals[j].accumulate_gradient(state, sub.slots(), row);
            for (std::size_t i = 0; i < d; ++i) J(j, i) = row[i];
        }
    };

    std::vector<double> x(x0.begin(), x0.end());
    OptResult res;
    double fx = eval_residuals(x, r);
    res.start_value = fx;
    if (fx - sub.offset() == 0.0) {
        res.converged = true;
    } else {
        eval_jacobian(x);
        Eigen::MatrixXd A = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * r;
        double mu = 1e-3 * (d > 0 ? A.diagonal().mean() : 0.0);
        if (!(mu > 0.0)) mu = 1e-3;
        constexpr double mu_min = 1e-15;
        Eigen::VectorXd rn(m);
        std::vector<double> xn(d);
        const auto dom = sub.domains();
        while (res.iterations < cfg.max_iterations) {
            if (g.lpNorm<Eigen::Infinity>() <= cfg.gradient_tolerance) {
                res.converged = true;
                break;
            }
            Eigen::MatrixXd M = A;
            M.diagonal().array() += mu;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
            Eigen::VectorXd delta = ldlt.solve(-g);
            if (ldlt.info() != Eigen::Success || !delta.allFinite() ||
                ((M * delta + g).norm() > 1e-6 * (g.norm() + 1e-300))) {
                mu *= 2.0;
                ++res.iterations;
                continue;
            }
            bool moved = false;
            for (std::size_t i = 0; i < d; ++i) {
                xn[i] = std::clamp(x[i] + delta[i], dom[i].lo(), dom[i].hi());
                moved = moved || xn[i] != x[i];
            }
            ++res.iterations;
            if (!moved) {
                res.converged = true;
                break;
            }
            double fn;
            bool ok = true;
            try {
                fn = eval_residuals(xn, rn);
            } catch (const EvaluationError&) {
                ok = false;
                fn = fx;
            }
            if (ok && fn < fx) {
                const bool stalled = fx - fn <= cfg.progress_tolerance * std::abs(fx - sub.offset());
                x = xn;
                fx = fn;
                eval_jacobian(x);
                A = J.transpose() * J;
                g = J.transpose() * r;
                mu = std::max(mu / 3.0, mu_min);
                if (stalled || fx - sub.offset() == 0.0) {
                    res.converged = true;
                    break;
                }
            } else {
                mu *= 2.0;
                if (mu > 1e30) {
                    res.converged = true;
                    break;
                }
            }
        }
    }
    sub.assign(x);
    res.value = fx;
    res.point = std::move(x);
    res.value_evals = sub.value_calls - v0;
    res.gradient_evals = sub.gradient_calls - g0;
    res.restarts_used = 1;
    return res;
}

// ---------------------------------------------------------------------------
// Multi-start

OptResult multi_start(const InnerOptimizer& inner, Subspace& sub, std::span<const double> x0, const Box& box,
                      int restarts, RngStream& rng) {
    if (restarts < 1) throw std::invalid_argument("restarts must be at least 1");
    OptResult best;
    bool any = false;
    double first_start = std::numeric_limits<double>::infinity();
    int iterations = 0;
    std::uint64_t values = 0;
    std::uint64_t grads = 0;
    for (int s = 0; s < restarts; ++s) {
        std::vector<double> start = s == 0 ? std::vector<double>(x0.begin(), x0.end()) : box.sample(rng);
        const auto vc = sub.value_calls;
        const auto gc = sub.gradient_calls;
        try {
            OptResult r = inner(sub, start);
            iterations += r.iterations;
            if (s == 0) first_start = r.start_value;
            if (!any || r.value < best.value) {
                best = std::move(r);
                any = true;
            }
        } catch (const EvaluationError&) {
        }
        values += sub.value_calls - vc;
        grads += sub.gradient_calls - gc;
    }
    if (!any) throw EvaluationError("every start failed to evaluate");
    sub.assign(best.point);
    best.iterations = iterations;
    best.start_value = first_start;
    best.value_evals = values;
    best.gradient_evals = grads;
    best.restarts_used = restarts;
    return best;
}

InnerOptimizer make_inner(const OptimizerConfig& cfg) {
    switch (cfg.kind) {
        case OptimizerKind::Grid:
            return [s = cfg.grid_points](Subspace& sub, std::span<const double>) { return grid_search(sub, s); };
        case OptimizerKind::Lm:
            return [cfg](Subspace& sub, std::span<const double> x0) { return lm_minimize(sub, x0, cfg); };
        case OptimizerKind::Cgd:
        default:
            return [cfg](Subspace& sub, std::span<const double> x0) { return cgd_minimize(sub, x0, cfg); };
    }
}

}  // namespace rdis
