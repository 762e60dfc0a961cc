#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "rdis/expr.hpp"

namespace rdis {

/// A connected group of the term-variable incidence graph.
struct Component {
    std::vector<int> variables;  // sorted
    std::vector<int> terms;      // sorted
};

struct ComponentView {
    std::vector<Component> components;  // ordered by smallest variable index
    std::vector<int> scope_empty_terms;  // active terms with no active variable

    friend bool operator==(const ComponentView&, const ComponentView&) = default;
};

bool operator==(const Component& a, const Component& b);

/// Bipartite term/variable incidence with LIFO deletions.
///
/// remove() pushes an entity onto a deletion stack and restore() must pop the
/// top of that stack. Component labels for the whole active graph are rebuilt
/// lazily by breadth-first search when a mutation marked them dirty.
class TermVarGraph {
public:
    enum class Kind : std::uint8_t { Variable, Term };
    struct Entity {
        Kind kind;
        int id;
        friend bool operator==(const Entity&, const Entity&) = default;
    };

    TermVarGraph() = default;
    explicit TermVarGraph(const ObjectiveFunction& f);
    TermVarGraph(std::size_t num_variables, const std::vector<std::vector<int>>& term_scopes);

    std::size_t num_variables() const { return var_terms_.size(); }
    std::size_t num_terms() const { return term_vars_.size(); }
    const std::vector<int>& terms_of(int v) const { return var_terms_.at(v); }
    const std::vector<int>& variables_of(int t) const { return term_vars_.at(t); }

    bool variable_active(int v) const { return var_removed_at_[v] < 0; }
    bool term_active(int t) const { return term_removed_at_[t] < 0; }

    void remove_variable(int v) { remove({Kind::Variable, v}); }
    void remove_term(int t) { remove({Kind::Term, t}); }
    void remove(Entity e);

    /// Undo the most recent removal, which must be `e`.
    void restore(Entity e);
    /// Undo removals until the stack has `depth` entries.
    void restore_to(std::size_t depth);
    std::size_t epoch() const { return stack_.size(); }

    /// Components of the whole active graph (cached between mutations).
    const ComponentView& components();

    /// Components reachable from the given active variables; terms with no
    /// active variable are not visited. Cost is proportional to the region.
    std::vector<Component> components_from(std::span<const int> seed_variables) const;

    /// View after temporarily removing the given entities; the graph is left
    /// unchanged.
    ComponentView components_after(std::span<const int> assigned_vars, std::span<const int> removed_terms);

    /// From-scratch breadth-first recomputation, independent of the cache.
    ComponentView recompute() const;

private:
    std::vector<std::vector<int>> var_terms_;
    std::vector<std::vector<int>> term_vars_;
    std::vector<int> var_removed_at_;
    std::vector<int> term_removed_at_;
    std::vector<Entity> stack_;
    ComponentView cache_;
    bool dirty_ = true;
    mutable std::vector<int> mark_;
    mutable int mark_epoch_ = 0;
};

/// Vertices are terms, hyperedges are variables; hyperedge e's pins are the
/// terms containing variable e. Weights default to 1.
struct Hypergraph {
    std::vector<int> vertex_ids;    // term id per vertex
    std::vector<int> hyperedge_ids;  // variable index per hyperedge
    std::vector<std::vector<int>> pins;       // per hyperedge, vertex positions
    std::vector<std::vector<int>> incidence;  // per vertex, hyperedge positions
    std::vector<int> vertex_weight;
    std::vector<int> hyperedge_weight;

    std::size_t num_vertices() const { return vertex_ids.size(); }
    std::size_t num_hyperedges() const { return hyperedge_ids.size(); }
    std::size_t num_pins() const;

    static Hypergraph from_pins(std::size_t num_vertices, std::vector<std::vector<int>> pins);
};

Hypergraph build_hypergraph(const ObjectiveFunction& f, std::span<const int> active_vars,
                            std::span<const int> active_terms);

struct PartitionResult {
    std::vector<int> cutset;             // variable indices (hyperedge ids), sorted
    std::vector<std::vector<int>> parts;  // term ids per part
    double imbalance = 0.0;               // max part weight / (total / k) - 1
    bool split = false;                   // false when no proper cut exists
};

struct PartitionOptions {
    int k = 2;
    double balance = 0.2;
    int coarsen_to = 48;
    int fm_passes = 8;
};

/// Multilevel recursive bisection minimizing the weighted hyperedge cut.
/// When the hypergraph cannot be split, every hyperedge is in the cutset.
PartitionResult partition_cutset(const Hypergraph& h, const PartitionOptions& opts = {});

/// Sum of weights of hyperedges with pins in more than one part.
int cut_weight(const Hypergraph& h, std::span<const int> part_of_vertex);

/// Heaviest part allowed for a part targeting `fraction` of `total` weight.
int max_part_weight(int total, double fraction, double balance);

}  // namespace rdis
