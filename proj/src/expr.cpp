#include "rdis/expr.hpp"

#include <algorithm>
#include <cmath>

namespace rdis {

namespace {

thread_local std::vector<double> t_values;
thread_local std::vector<double> t_adjoints;
thread_local std::vector<Interval> t_intervals;

[[noreturn]] void domain_fail(const char* what) { throw EvaluationError(what); }

}  // namespace

const char* op_name(Op op) {
    switch (op) {
        case Op::Const: return "const";
        case Op::Var: return "var";
        case Op::Neg: return "neg";
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Sqrt: return "sqrt";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Div: return "div";
        case Op::Pow: return "pow";
    }
    return "?";
}

bool is_unary(Op op) {
    return op == Op::Neg || op == Op::Sin || op == Op::Cos || op == Op::Exp || op == Op::Log ||
           op == Op::Sqrt || op == Op::Pow;
}

bool is_binary(Op op) { return op == Op::Add || op == Op::Sub || op == Op::Mul || op == Op::Div; }

// ---------------------------------------------------------------------------
// Expr construction

Expr::Ref Expr::push(const ExprNode& n) {
    nodes_.push_back(n);
    root_ = static_cast<Ref>(nodes_.size()) - 1;
    return root_;
}

Expr::Ref Expr::constant(double v) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite constant in expression");
    ExprNode n;
    n.op = Op::Const;
    n.value = v;
    return push(n);
}

Expr::Ref Expr::var(int index) {
    if (index < 0) throw std::invalid_argument("negative variable index");
    ExprNode n;
    n.op = Op::Var;
    n.index = index;
    return push(n);
}

Expr::Ref Expr::unary(Op op, Ref child) {
    if (!is_unary(op) || op == Op::Pow) throw std::invalid_argument("not a unary op");
    if (child < 0 || child >= static_cast<Ref>(nodes_.size())) throw std::out_of_range("bad child ref");
    ExprNode n;
    n.op = op;
    n.lhs = child;
    return push(n);
}

Expr::Ref Expr::binary(Op op, Ref lhs, Ref rhs) {
    if (!is_binary(op)) throw std::invalid_argument("not a binary op");
    const auto sz = static_cast<Ref>(nodes_.size());
    if (lhs < 0 || lhs >= sz || rhs < 0 || rhs >= sz) throw std::out_of_range("bad child ref");
    ExprNode n;
    n.op = op;
    n.lhs = lhs;
    n.rhs = rhs;
    return push(n);
}

Expr::Ref Expr::pow(Ref base, int exponent) {
    if (base < 0 || base >= static_cast<Ref>(nodes_.size())) throw std::out_of_range("bad child ref");
    ExprNode n;
    n.op = Op::Pow;
    n.lhs = base;
    n.index = exponent;
    return push(n);
}

void Expr::set_root(Ref r) {
    if (r < 0 || r >= static_cast<Ref>(nodes_.size())) throw std::out_of_range("bad root ref");
    *this = subexpression(r);
}

Expr Expr::subexpression(Ref r) const {
    std::vector<char> keep(nodes_.size(), 0);
    keep[r] = 1;
    for (Ref i = r; i >= 0; --i) {
        if (!keep[i]) continue;
        if (nodes_[i].lhs >= 0) keep[nodes_[i].lhs] = 1;
        if (nodes_[i].rhs >= 0) keep[nodes_[i].rhs] = 1;
    }
    Expr out;
    std::vector<Ref> remap(nodes_.size(), -1);
    for (Ref i = 0; i <= r; ++i) {
        if (!keep[i]) continue;
        ExprNode n = nodes_[i];
        if (n.lhs >= 0) n.lhs = remap[n.lhs];
        if (n.rhs >= 0) n.rhs = remap[n.rhs];
        remap[i] = static_cast<Ref>(out.nodes_.size());
        out.nodes_.push_back(n);
    }
    out.root_ = remap[r];
    return out;
}

std::vector<int> Expr::variables() const {
    std::vector<int> vs;
    for (const auto& n : nodes_) {
        if (n.op == Op::Var) vs.push_back(n.index);
    }
    std::sort(vs.begin(), vs.end());
    vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    return vs;
}

bool Expr::structurally_equal(const Expr& other) const {
    if ((root_ < 0) != (other.root_ < 0)) return false;
    if (root_ < 0) return true;
    // Compare the trees below the roots; tape order and sharing may differ.
    std::vector<std::pair<Ref, Ref>> stack{{root_, other.root_}};
    while (!stack.empty()) {
        const auto [i, j] = stack.back();
        stack.pop_back();
        const auto& a = nodes_[i];
        const auto& b = other.nodes_[j];
        if (a.op != b.op) return false;
        if ((a.op == Op::Var || a.op == Op::Pow) && a.index != b.index) return false;
        if (a.op == Op::Const && a.value != b.value) return false;
        if (a.lhs >= 0) stack.emplace_back(a.lhs, b.lhs);
        if (a.rhs >= 0) stack.emplace_back(a.rhs, b.rhs);
    }
    return true;
}

// ---------------------------------------------------------------------------
// Evaluation

double Expr::evaluate(std::span<const double> x) const {
    if (root_ < 0) throw std::logic_error("evaluating empty expression");
    auto& v = t_values;
    v.resize(static_cast<std::size_t>(root_) + 1);
    for (Ref i = 0; i <= root_; ++i) {
        const ExprNode& n = nodes_[i];
        switch (n.op) {
            case Op::Const: v[i] = n.value; break;
            case Op::Var: v[i] = x[n.index]; break;
            case Op::Neg: v[i] = -v[n.lhs]; break;
            case Op::Sin: v[i] = std::sin(v[n.lhs]); break;
            case Op::Cos: v[i] = std::cos(v[n.lhs]); break;
            case Op::Exp: v[i] = std::exp(v[n.lhs]); break;
            case Op::Log:
                if (!(v[n.lhs] > 0.0)) domain_fail("log of non-positive value");
                v[i] = std::log(v[n.lhs]);
                break;
            case Op::Sqrt:
                if (!(v[n.lhs] >= 0.0)) domain_fail("sqrt of negative value");
                v[i] = std::sqrt(v[n.lhs]);
                break;
            case Op::Add: v[i] = v[n.lhs] + v[n.rhs]; break;
            case Op::Sub: v[i] = v[n.lhs] - v[n.rhs]; break;
            case Op::Mul: v[i] = v[n.lhs] * v[n.rhs]; break;
            case Op::Div:
                if (v[n.rhs] == 0.0) domain_fail("division by zero");
                v[i] = v[n.lhs] / v[n.rhs];
                break;
            case Op::Pow:
                if (n.index < 0 && v[n.lhs] == 0.0) domain_fail("negative power of zero");
                v[i] = std::pow(v[n.lhs], n.index);
                break;
        }
    }
    const double out = v[root_];
    if (!std::isfinite(out)) domain_fail("non-finite expression value");
    return out;
}

double Expr::accumulate_gradient(std::span<const double> x, std::span<const int> slot,
                                 std::span<double> out) const {
    const double value = evaluate(x);
    const auto& v = t_values;
    auto& adj = t_adjoints;
    adj.assign(static_cast<std::size_t>(root_) + 1, 0.0);
    adj[root_] = 1.0;
    for (Ref i = root_; i >= 0; --i) {
        const double a = adj[i];
        if (a == 0.0) continue;
        const ExprNode& n = nodes_[i];
        switch (n.op) {
            case Op::Const: break;
            case Op::Var: {
                const int s = slot[n.index];
                if (s >= 0) out[s] += a;
                break;
            }
            case Op::Neg: adj[n.lhs] -= a; break;
            case Op::Sin: adj[n.lhs] += a * std::cos(v[n.lhs]); break;
            case Op::Cos: adj[n.lhs] -= a * std::sin(v[n.lhs]); break;
            case Op::Exp: adj[n.lhs] += a * v[i]; break;
            case Op::Log: adj[n.lhs] += a / v[n.lhs]; break;
            case Op::Sqrt:
                if (v[i] == 0.0) domain_fail("sqrt not differentiable at 0");
                adj[n.lhs] += a * 0.5 / v[i];
                break;
            case Op::Add:
                adj[n.lhs] += a;
                adj[n.rhs] += a;
                break;
            case Op::Sub:
                adj[n.lhs] += a;
                adj[n.rhs] -= a;
                break;
            case Op::Mul:
                adj[n.lhs] += a * v[n.rhs];
                adj[n.rhs] += a * v[n.lhs];
                break;
            case Op::Div:
                adj[n.lhs] += a / v[n.rhs];
                adj[n.rhs] -= a * v[i] / v[n.rhs];
                break;
            case Op::Pow:
                if (n.index != 0) adj[n.lhs] += a * n.index * std::pow(v[n.lhs], n.index - 1);
                break;
        }
    }
    for (const auto& n : nodes_) {
        if (n.op == Op::Var && slot[n.index] >= 0 && !std::isfinite(out[slot[n.index]])) {
            domain_fail("non-finite gradient");
        }
    }
    return value;
}

Interval Expr::bounds(std::span<const Interval> box) const {
    if (root_ < 0) throw std::logic_error("bounding empty expression");
    auto& v = t_intervals;
    v.resize(static_cast<std::size_t>(root_) + 1);
    for (Ref i = 0; i <= root_; ++i) {
        const ExprNode& n = nodes_[i];
        switch (n.op) {
            case Op::Const: v[i] = Interval::point(n.value); break;
            case Op::Var: v[i] = box[n.index]; break;
            case Op::Neg: v[i] = -v[n.lhs]; break;
            case Op::Sin: v[i] = rdis::sin(v[n.lhs]); break;
            case Op::Cos: v[i] = rdis::cos(v[n.lhs]); break;
            case Op::Exp: v[i] = rdis::exp(v[n.lhs]); break;
            case Op::Log: v[i] = rdis::log(v[n.lhs]); break;
            case Op::Sqrt: v[i] = rdis::sqrt(v[n.lhs]); break;
            case Op::Add: v[i] = v[n.lhs] + v[n.rhs]; break;
            case Op::Sub: v[i] = v[n.lhs] - v[n.rhs]; break;
            case Op::Mul: v[i] = v[n.lhs] * v[n.rhs]; break;
            case Op::Div: v[i] = v[n.lhs] / v[n.rhs]; break;
            case Op::Pow: v[i] = rdis::pow(v[n.lhs], n.index); break;
        }
    }
    return v[root_];
}

// ---------------------------------------------------------------------------
// Sym

namespace {

Expr* same_expr(Sym a, Sym b) {
    if (a.expr() != b.expr()) throw std::invalid_argument("mixing symbols from different expressions");
    return a.expr();
}

}  // namespace

Sym operator+(Sym a, Sym b) { return {same_expr(a, b), same_expr(a, b)->binary(Op::Add, a.ref(), b.ref())}; }
Sym operator-(Sym a, Sym b) { return {same_expr(a, b), same_expr(a, b)->binary(Op::Sub, a.ref(), b.ref())}; }
Sym operator*(Sym a, Sym b) { return {same_expr(a, b), same_expr(a, b)->binary(Op::Mul, a.ref(), b.ref())}; }
Sym operator/(Sym a, Sym b) { return {same_expr(a, b), same_expr(a, b)->binary(Op::Div, a.ref(), b.ref())}; }
Sym operator-(Sym a) { return {a.expr(), a.expr()->unary(Op::Neg, a.ref())}; }
Sym operator+(Sym a, double b) { return a + Sym::constant(*a.expr(), b); }
Sym operator*(double a, Sym b) { return Sym::constant(*b.expr(), a) * b; }
Sym operator/(double a, Sym b) { return Sym::constant(*b.expr(), a) / b; }
Sym sin(Sym a) { return {a.expr(), a.expr()->unary(Op::Sin, a.ref())}; }
Sym cos(Sym a) { return {a.expr(), a.expr()->unary(Op::Cos, a.ref())}; }
Sym exp(Sym a) { return {a.expr(), a.expr()->unary(Op::Exp, a.ref())}; }
Sym log(Sym a) { return {a.expr(), a.expr()->unary(Op::Log, a.ref())}; }
Sym sqrt(Sym a) { return {a.expr(), a.expr()->unary(Op::Sqrt, a.ref())}; }
Sym pow(Sym a, int n) { return {a.expr(), a.expr()->pow(a.ref(), n)}; }

// ---------------------------------------------------------------------------
// ObjectiveFunction

ObjectiveFunction::ObjectiveFunction(std::vector<Variable> variables, std::vector<Term> terms, double offset)
    : variables_(std::move(variables)), offset_(offset) {
    for (std::size_t i = 0; i < variables_.size(); ++i) {
        if (variables_[i].index != static_cast<int>(i)) {
            throw std::invalid_argument("variable indices must be dense and ordered");
        }
    }
    terms_.reserve(terms.size());
    for (auto& t : terms) add_term(std::move(t.expr));
}

int ObjectiveFunction::add_variable(std::string name, Interval domain) {
    Variable v;
    v.index = static_cast<int>(variables_.size());
    v.name = std::move(name);
    v.domain = domain;
    variables_.push_back(std::move(v));
    return variables_.back().index;
}

int ObjectiveFunction::add_term(Expr expr) {
    if (expr.empty()) throw std::invalid_argument("empty term expression");
    expr.set_root(expr.root());
    Term t;
    t.id = static_cast<int>(terms_.size());
    t.scope = expr.variables();
    if (!t.scope.empty() && t.scope.back() >= static_cast<int>(variables_.size())) {
        throw std::invalid_argument("term references undeclared variable index " + std::to_string(t.scope.back()));
    }
    t.expr = std::move(expr);
    terms_.push_back(std::move(t));
    return terms_.back().id;
}

std::optional<int> ObjectiveFunction::find_variable(const std::string& name) const {
    for (const auto& v : variables_) {
        if (v.name == name) return v.index;
    }
    return std::nullopt;
}

std::vector<Interval> ObjectiveFunction::domains() const {
    std::vector<Interval> out;
    out.reserve(variables_.size());
    for (const auto& v : variables_) out.push_back(v.domain);
    return out;
}

double ObjectiveFunction::evaluate(std::span<const double> x) const {
    if (x.size() != variables_.size()) throw std::invalid_argument("assignment size mismatch");
    double s = offset_;
    for (const auto& t : terms_) s += t.expr.evaluate(x);
    return s;
}

double ObjectiveFunction::evaluate_term(int t, std::span<const double> x) const { return terms_.at(t).expr.evaluate(x); }

std::vector<double> ObjectiveFunction::gradient(std::span<const double> x, std::span<const int> subset) const {
    if (x.size() != variables_.size()) throw std::invalid_argument("assignment size mismatch");
    std::vector<int> slot(variables_.size(), -1);
    for (std::size_t i = 0; i < subset.size(); ++i) slot.at(subset[i]) = static_cast<int>(i);
    std::vector<double> g(subset.size(), 0.0);
    for (const auto& t : terms_) {
        const bool touches =
            std::any_of(t.scope.begin(), t.scope.end(), [&](int v) { return slot[v] >= 0; });
        if (touches) t.expr.accumulate_gradient(x, slot, g);
    }
    return g;
}

std::vector<std::vector<int>> ObjectiveFunction::variable_terms() const {
    std::vector<std::vector<int>> out(variables_.size());
    for (const auto& t : terms_) {
        for (int v : t.scope) out[v].push_back(t.id);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Restriction

PartialAssignment PartialAssignment::compose(const PartialAssignment& other) const {
    PartialAssignment out = *this;
    for (const auto& [k, v] : other.values_) {
        if (out.contains(k)) throw std::invalid_argument("composing overlapping assignments");
        out.values_[k] = v;
    }
    return out;
}

std::vector<int> restricted_index_map(const ObjectiveFunction& f, const PartialAssignment& rho) {
    std::vector<int> map(f.num_variables(), -1);
    int next = 0;
    for (std::size_t i = 0; i < f.num_variables(); ++i) {
        if (!rho.contains(static_cast<int>(i))) map[i] = next++;
    }
    return map;
}

ObjectiveFunction restrict(const ObjectiveFunction& f, const PartialAssignment& rho) {
    for (const auto& [idx, val] : rho.values()) {
        if (idx < 0 || idx >= static_cast<int>(f.num_variables())) {
            throw std::invalid_argument("assignment to unknown variable index " + std::to_string(idx));
        }
        if (!f.variable(idx).domain.contains(val)) {
            throw std::invalid_argument("assigned value outside domain of " + f.variable(idx).name);
        }
    }
    const auto map = restricted_index_map(f, rho);
    ObjectiveFunction out;
    for (const auto& v : f.variables()) {
        if (map[v.index] >= 0) out.add_variable(v.name, v.domain);
    }
    out.add_offset(f.offset());

    std::vector<double> point(f.num_variables(), 0.0);
    for (const auto& [idx, val] : rho.values()) point[idx] = val;

    for (const auto& t : f.terms()) {
        const bool all_assigned =
            std::all_of(t.scope.begin(), t.scope.end(), [&](int v) { return map[v] < 0; });
        if (all_assigned) {
            out.add_offset(t.expr.evaluate(point));
            continue;
        }
        Expr e;
        for (const auto& n : t.expr.nodes()) {
            if (n.op == Op::Var) {
                if (map[n.index] < 0) {
                    e.constant(rho.at(n.index));
                } else {
                    e.var(map[n.index]);
                }
            } else if (n.op == Op::Const) {
                e.constant(n.value);
            } else if (n.op == Op::Pow) {
                e.pow(n.lhs, n.index);
            } else if (is_unary(n.op)) {
                e.unary(n.op, n.lhs);
            } else {
                e.binary(n.op, n.lhs, n.rhs);
            }
        }
        e.set_root(t.expr.root());
        out.add_term(std::move(e));
    }
    return out;
}

Interval term_bounds(const Term& t, std::span<const Interval> box) {
    if (!t.scope.empty() && t.scope.back() >= static_cast<int>(box.size())) {
        throw std::invalid_argument("box does not cover term scope");
    }
    return t.expr.bounds(box);
}

}  // namespace rdis
