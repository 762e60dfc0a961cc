#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdis/interval.hpp"

namespace rdis {

/// Point evaluation left the domain of an operation (log/sqrt of a negative,
/// division by zero) or produced a non-finite value. NaN is never returned.
class EvaluationError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct Variable {
    int index = 0;
    std::string name;
    Interval domain = Interval::entire();
};

enum class Op : std::uint8_t { Const, Var, Neg, Sin, Cos, Exp, Log, Sqrt, Add, Sub, Mul, Div, Pow };

const char* op_name(Op op);
bool is_unary(Op op);
bool is_binary(Op op);

struct ExprNode {
    Op op = Op::Const;
    int lhs = -1;
    int rhs = -1;
    int index = 0;  // variable index for Var, exponent for Pow
    double value = 0.0;
};

/// Expression stored as a node tape in topological order: every node's
/// children precede it. Builders may reuse a node reference, so the tape is a
/// DAG; evaluation and the reverse sweep handle shared nodes.
class Expr {
public:
    using Ref = int;

    Ref constant(double v);
    Ref var(int index);
    Ref unary(Op op, Ref child);
    Ref binary(Op op, Ref lhs, Ref rhs);
    Ref pow(Ref base, int exponent);

    void set_root(Ref r);
    Ref root() const { return root_; }
    bool empty() const { return nodes_.empty(); }
    std::span<const ExprNode> nodes() const { return nodes_; }

    /// Sorted, duplicate-free variable indices reachable from the root.
    std::vector<int> variables() const;

    double evaluate(std::span<const double> x) const;

    /// Adds d(expr)/d(x_v) into out[slot[v]] for every variable with
    /// slot[v] >= 0, and returns the expression value.
    double accumulate_gradient(std::span<const double> x, std::span<const int> slot,
                               std::span<double> out) const;

    Interval bounds(std::span<const Interval> box) const;

    /// Copy of the subtree rooted at r, compacted to reachable nodes.
    Expr subexpression(Ref r) const;

    bool structurally_equal(const Expr& other) const;

private:
    Ref push(const ExprNode& n);

    std::vector<ExprNode> nodes_;
    Ref root_ = -1;
};

/// Value handle for building expressions with ordinary operator syntax.
class Sym {
public:
    Sym(Expr* e, Expr::Ref r) : e_(e), r_(r) {}
    Expr::Ref ref() const { return r_; }
    Expr* expr() const { return e_; }

    static Sym var(Expr& e, int index) { return {&e, e.var(index)}; }
    static Sym constant(Expr& e, double v) { return {&e, e.constant(v)}; }

private:
    Expr* e_;
    Expr::Ref r_;
};

Sym operator+(Sym a, Sym b);
Sym operator-(Sym a, Sym b);
Sym operator*(Sym a, Sym b);
Sym operator/(Sym a, Sym b);
Sym operator-(Sym a);
Sym operator+(Sym a, double b);
Sym operator*(double a, Sym b);
Sym operator/(double a, Sym b);
Sym sin(Sym a);
Sym cos(Sym a);
Sym exp(Sym a);
Sym log(Sym a);
Sym sqrt(Sym a);
Sym pow(Sym a, int n);

struct Term {
    int id = 0;
    Expr expr;
    std::vector<int> scope;  // exactly the variables reachable in expr
};

/// Sum-of-terms objective: value(x) = offset + sum_i term_i(x).
class ObjectiveFunction {
public:
    ObjectiveFunction() = default;
    ObjectiveFunction(std::vector<Variable> variables, std::vector<Term> terms, double offset = 0.0);

    int add_variable(std::string name, Interval domain);
    int add_term(Expr expr);
    void add_offset(double v) { offset_ += v; }

    std::size_t num_variables() const { return variables_.size(); }
    std::size_t num_terms() const { return terms_.size(); }
    const std::vector<Variable>& variables() const { return variables_; }
    const Variable& variable(int i) const { return variables_.at(i); }
    const std::vector<Term>& terms() const { return terms_; }
    const Term& term(int i) const { return terms_.at(i); }
    double offset() const { return offset_; }
    std::optional<int> find_variable(const std::string& name) const;

    std::vector<Interval> domains() const;

    double evaluate(std::span<const double> x) const;
    double evaluate_term(int t, std::span<const double> x) const;

    /// Partial derivatives over `subset`, in subset order; only terms whose
    /// scope meets the subset are evaluated.
    std::vector<double> gradient(std::span<const double> x, std::span<const int> subset) const;

    /// Terms containing each variable.
    std::vector<std::vector<int>> variable_terms() const;

private:
    std::vector<Variable> variables_;
    std::vector<Term> terms_;
    double offset_ = 0.0;
};

/// Values for a subset of variable indices.
class PartialAssignment {
public:
    PartialAssignment() = default;
    explicit PartialAssignment(std::map<int, double> values) : values_(std::move(values)) {}

    void set(int index, double value) { values_[index] = value; }
    bool contains(int index) const { return values_.count(index) != 0; }
    double at(int index) const { return values_.at(index); }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }
    const std::map<int, double>& values() const { return values_; }

    /// Union of two assignments over disjoint index sets.
    PartialAssignment compose(const PartialAssignment& other) const;

private:
    std::map<int, double> values_;
};

/// f with the variables of rho fixed. Remaining variables keep their names
/// and relative order and are renumbered densely; terms whose scope becomes
/// empty fold into the offset.
ObjectiveFunction restrict(const ObjectiveFunction& f, const PartialAssignment& rho);

/// New index of each variable of f after restrict(f, rho), or -1 if assigned.
std::vector<int> restricted_index_map(const ObjectiveFunction& f, const PartialAssignment& rho);

/// Sound enclosure of the term over a per-variable box (indexed by variable).
/// Throws IntervalDomainError when an operand leaves an operation's domain.
Interval term_bounds(const Term& t, std::span<const Interval> box);

}  // namespace rdis
