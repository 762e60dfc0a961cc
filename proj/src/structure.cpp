#include "rdis/structure.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>

namespace rdis {

bool operator==(const Component& a, const Component& b) {
    return a.variables == b.variables && a.terms == b.terms;
}

// ---------------------------------------------------------------------------
// TermVarGraph

TermVarGraph::TermVarGraph(const ObjectiveFunction& f)
    : TermVarGraph(f.num_variables(), [&] {
          std::vector<std::vector<int>> scopes;
          scopes.reserve(f.num_terms());
          for (const auto& t : f.terms()) scopes.push_back(t.scope);
          return scopes;
      }()) {}

TermVarGraph::TermVarGraph(std::size_t num_variables, const std::vector<std::vector<int>>& term_scopes)
    : var_terms_(num_variables),
      term_vars_(term_scopes),
      var_removed_at_(num_variables, -1),
      term_removed_at_(term_scopes.size(), -1),
      mark_(num_variables + term_scopes.size(), 0) {
    for (std::size_t t = 0; t < term_vars_.size(); ++t) {
        auto& s = term_vars_[t];
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
        for (int v : s) {
            if (v < 0 || static_cast<std::size_t>(v) >= num_variables) {
                throw std::invalid_argument("term scope references unknown variable");
            }
            var_terms_[v].push_back(static_cast<int>(t));
        }
    }
}

void TermVarGraph::remove(Entity e) {
    auto& slot = e.kind == Kind::Variable ? var_removed_at_.at(e.id) : term_removed_at_.at(e.id);
    if (slot >= 0) {
        throw std::logic_error(std::string(e.kind == Kind::Variable ? "variable " : "term ") + std::to_string(e.id) +
                               " already removed");
    }
    slot = static_cast<int>(stack_.size());
    stack_.push_back(e);
    dirty_ = true;
}

void TermVarGraph::restore(Entity e) {
    if (stack_.empty() || !(stack_.back() == e)) {
        throw std::logic_error("restore out of LIFO order");
    }
    stack_.pop_back();
    (e.kind == Kind::Variable ? var_removed_at_[e.id] : term_removed_at_[e.id]) = -1;
    dirty_ = true;
}

void TermVarGraph::restore_to(std::size_t depth) {
    while (stack_.size() > depth) restore(stack_.back());
}

std::vector<Component> TermVarGraph::components_from(std::span<const int> seed_variables) const {
    const int nv = static_cast<int>(var_terms_.size());
    if (++mark_epoch_ == 0) {
        std::fill(mark_.begin(), mark_.end(), 0);
        mark_epoch_ = 1;
    }
    std::vector<Component> out;
    std::vector<int> queue;
    for (int seed : seed_variables) {
        if (!variable_active(seed) || mark_[seed] == mark_epoch_) continue;
        Component c;
        queue.clear();
        queue.push_back(seed);
        mark_[seed] = mark_epoch_;
        for (std::size_t qi = 0; qi < queue.size(); ++qi) {
            const int v = queue[qi];
            c.variables.push_back(v);
            for (int t : var_terms_[v]) {
                if (!term_active(t) || mark_[nv + t] == mark_epoch_) continue;
                mark_[nv + t] = mark_epoch_;
                c.terms.push_back(t);
                for (int w : term_vars_[t]) {
                    if (variable_active(w) && mark_[w] != mark_epoch_) {
                        mark_[w] = mark_epoch_;
                        queue.push_back(w);
                    }
                }
            }
        }
        std::sort(c.variables.begin(), c.variables.end());
        std::sort(c.terms.begin(), c.terms.end());
        out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(),
              [](const Component& a, const Component& b) { return a.variables.front() < b.variables.front(); });
    return out;
}

ComponentView TermVarGraph::recompute() const {
    ComponentView view;
    std::vector<int> all;
    for (int v = 0; v < static_cast<int>(var_terms_.size()); ++v) {
        if (variable_active(v)) all.push_back(v);
    }
    view.components = components_from(all);
    for (int t = 0; t < static_cast<int>(term_vars_.size()); ++t) {
        if (!term_active(t)) continue;
        const auto& s = term_vars_[t];
        if (std::none_of(s.begin(), s.end(), [&](int v) { return variable_active(v); })) {
            view.scope_empty_terms.push_back(t);
        }
    }
    return view;
}

const ComponentView& TermVarGraph::components() {
    if (dirty_) {
        cache_ = recompute();
        dirty_ = false;
    }
    return cache_;
}

ComponentView TermVarGraph::components_after(std::span<const int> assigned_vars, std::span<const int> removed_terms) {
    const std::size_t depth = epoch();
    try {
        for (int v : assigned_vars) remove_variable(v);
        for (int t : removed_terms) remove_term(t);
    } catch (...) {
        restore_to(depth);
        throw;
    }
    ComponentView view = components();
    restore_to(depth);
    return view;
}

// ---------------------------------------------------------------------------
// Hypergraph

std::size_t Hypergraph::num_pins() const {
    std::size_t n = 0;
    for (const auto& p : pins) n += p.size();
    return n;
}

Hypergraph Hypergraph::from_pins(std::size_t num_vertices, std::vector<std::vector<int>> pins) {
    Hypergraph h;
    h.vertex_ids.resize(num_vertices);
    std::iota(h.vertex_ids.begin(), h.vertex_ids.end(), 0);
    h.hyperedge_ids.resize(pins.size());
    std::iota(h.hyperedge_ids.begin(), h.hyperedge_ids.end(), 0);
    h.incidence.resize(num_vertices);
    for (std::size_t e = 0; e < pins.size(); ++e) {
        auto& p = pins[e];
        std::sort(p.begin(), p.end());
        p.erase(std::unique(p.begin(), p.end()), p.end());
        for (int v : p) h.incidence.at(v).push_back(static_cast<int>(e));
    }
    h.pins = std::move(pins);
    h.vertex_weight.assign(num_vertices, 1);
    h.hyperedge_weight.assign(h.pins.size(), 1);
    return h;
}

Hypergraph build_hypergraph(const ObjectiveFunction& f, std::span<const int> active_vars,
                            std::span<const int> active_terms) {
    Hypergraph h;
    std::vector<int> edge_of(f.num_variables(), -1);
    for (int v : active_vars) {
        edge_of.at(v) = static_cast<int>(h.hyperedge_ids.size());
        h.hyperedge_ids.push_back(v);
    }
    h.pins.resize(h.hyperedge_ids.size());
    for (int t : active_terms) {
        const int vtx = static_cast<int>(h.vertex_ids.size());
        h.vertex_ids.push_back(t);
        std::vector<int> inc;
        for (int v : f.term(t).scope) {
            const int e = edge_of[v];
            if (e < 0) continue;
            h.pins[e].push_back(vtx);
            inc.push_back(e);
        }
        h.incidence.push_back(std::move(inc));
    }
    h.vertex_weight.assign(h.vertex_ids.size(), 1);
    h.hyperedge_weight.assign(h.hyperedge_ids.size(), 1);
    return h;
}

int cut_weight(const Hypergraph& h, std::span<const int> part_of_vertex) {
    int cut = 0;
    for (std::size_t e = 0; e < h.pins.size(); ++e) {
        const auto& p = h.pins[e];
        for (std::size_t i = 1; i < p.size(); ++i) {
            if (part_of_vertex[p[i]] != part_of_vertex[p[0]]) {
                cut += h.hyperedge_weight[e];
                break;
            }
        }
    }
    return cut;
}

int max_part_weight(int total, double fraction, double balance) {
    const double target = fraction * total;
    const int relaxed = static_cast<int>(std::floor((1.0 + balance) * target + 1e-9));
    return std::max(relaxed, static_cast<int>(std::ceil(target - 1e-9)));
}

// ---------------------------------------------------------------------------
// Bisection

namespace {

struct Bisector {
    const PartitionOptions& opts;

    struct Limits {
        int max0;
        int max1;
        int target0;
    };

    static int total_weight(const Hypergraph& h) {
        return std::accumulate(h.vertex_weight.begin(), h.vertex_weight.end(), 0);
    }

    static int violation(const int w[2], const Limits& lim) {
        return std::max(0, w[0] - lim.max0) + std::max(0, w[1] - lim.max1);
    }

    // Fiduccia-Mattheyses passes on a two-way partition, in place.
    void refine(const Hypergraph& h, std::vector<int>& side, const Limits& lim) const {
        const int nv = static_cast<int>(h.num_vertices());
        const int ne = static_cast<int>(h.num_hyperedges());
        if (nv < 2) return;
        std::vector<std::array<int, 2>> cnt(ne);
        std::vector<int> gain(nv);
        std::vector<char> locked(nv);
        std::set<std::pair<int, int>> bucket[2];

        for (int pass = 0; pass < opts.fm_passes; ++pass) {
            int w[2] = {0, 0};
            for (int v = 0; v < nv; ++v) w[side[v]] += h.vertex_weight[v];
            for (int e = 0; e < ne; ++e) {
                cnt[e] = {0, 0};
                for (int v : h.pins[e]) ++cnt[e][side[v]];
            }
            int cut = 0;
            for (int e = 0; e < ne; ++e) {
                if (cnt[e][0] > 0 && cnt[e][1] > 0) cut += h.hyperedge_weight[e];
            }
            bucket[0].clear();
            bucket[1].clear();
            for (int v = 0; v < nv; ++v) {
                const int from = side[v];
                int g = 0;
                for (int e : h.incidence[v]) {
                    if (cnt[e][from] == 1) g += h.hyperedge_weight[e];
                    if (cnt[e][1 - from] == 0) g -= h.hyperedge_weight[e];
                }
                gain[v] = g;
                locked[v] = 0;
                bucket[from].insert({-g, v});
            }

            auto set_gain = [&](int u, int g) {
                bucket[side[u]].erase({-gain[u], u});
                gain[u] = g;
                bucket[side[u]].insert({-g, u});
            };

            const int start_cut = cut;
            const int start_violation = violation(w, lim);
            int best_cut = cut;
            int best_violation = start_violation;
            std::size_t best_prefix = 0;
            std::vector<int> moves;
            const std::size_t stall_limit = std::max<std::size_t>(50, nv / 4);

            while (true) {
                int pick = -1;
                for (int from = 0; from < 2; ++from) {
                    const int to = 1 - from;
                    const int max_to = to == 0 ? lim.max0 : lim.max1;
                    const int max_from = from == 0 ? lim.max0 : lim.max1;
                    for (const auto& [ng, v] : bucket[from]) {
                        const int vw = h.vertex_weight[v];
                        const bool fits = w[to] + vw <= max_to;
                        const bool relieves = w[from] > max_from && w[to] + vw <= std::max(max_to, w[from] - vw);
                        if (fits || relieves) {
                            if (pick < 0 || -ng > gain[pick] ||
                                (-ng == gain[pick] && (w[from] > w[side[pick]] || (w[from] == w[side[pick]] && v < pick)))) {
                                pick = v;
                            }
                            break;
                        }
                    }
                }
                if (pick < 0) break;

                const int from = side[pick];
                const int to = 1 - from;
                bucket[from].erase({-gain[pick], pick});
                locked[pick] = 1;
                cut -= gain[pick];
                for (int e : h.incidence[pick]) {
                    const int we = h.hyperedge_weight[e];
                    if (cnt[e][to] == 0) {
                        for (int u : h.pins[e]) {
                            if (!locked[u]) set_gain(u, gain[u] + we);
                        }
                    } else if (cnt[e][to] == 1) {
                        for (int u : h.pins[e]) {
                            if (side[u] == to && !locked[u]) set_gain(u, gain[u] - we);
                        }
                    }
                    --cnt[e][from];
                    ++cnt[e][to];
                    if (cnt[e][from] == 0) {
                        for (int u : h.pins[e]) {
                            if (!locked[u]) set_gain(u, gain[u] - we);
                        }
                    } else if (cnt[e][from] == 1) {
                        for (int u : h.pins[e]) {
                            if (side[u] == from && !locked[u]) set_gain(u, gain[u] + we);
                        }
                    }
                }
                side[pick] = to;
                w[from] -= h.vertex_weight[pick];
                w[to] += h.vertex_weight[pick];
                moves.push_back(pick);

                const int viol = violation(w, lim);
                if (viol < best_violation || (viol == best_violation && cut < best_cut)) {
                    best_violation = viol;
                    best_cut = cut;
                    best_prefix = moves.size();
                }
                if (moves.size() - best_prefix > stall_limit) break;
            }
            for (std::size_t i = moves.size(); i > best_prefix; --i) {
                const int v = moves[i - 1];
                side[v] = 1 - side[v];
            }
            if (best_violation == start_violation && best_cut >= start_cut) break;
        }
    }

    // Greedy growth of part 0 from a seed vertex until it reaches its target.
    std::vector<int> grow(const Hypergraph& h, int seed, const Limits& lim) const {
        const int nv = static_cast<int>(h.num_vertices());
        std::vector<int> side(nv, 1);
        std::vector<int> in0(h.num_hyperedges(), 0);
        std::vector<int> score(nv, 0);
        std::set<std::pair<int, int>> frontier;  // (-score, v)
        std::vector<char> seen(nv, 0);
        int w0 = 0;
        auto add = [&](int v) {
            side[v] = 0;
            w0 += h.vertex_weight[v];
            frontier.erase({-score[v], v});
            for (int e : h.incidence[v]) {
                ++in0[e];
                for (int u : h.pins[e]) {
                    if (side[u] == 0) continue;
                    if (seen[u]) frontier.erase({-score[u], u});
                    seen[u] = 1;
                    score[u] += h.hyperedge_weight[e];
                    frontier.insert({-score[u], u});
                }
            }
        };
        add(seed);
        while (w0 < lim.target0) {
            int next = -1;
            for (const auto& [ns, v] : frontier) {
                if (w0 + h.vertex_weight[v] <= lim.max0) {
                    next = v;
                    break;
                }
            }
            if (next < 0) {
                // Disconnected remainder: continue from the lowest unassigned vertex.
                for (int v = 0; v < nv; ++v) {
                    if (side[v] == 1 && !seen[v] && w0 + h.vertex_weight[v] <= lim.max0) {
                        next = v;
                        break;
                    }
                }
            }
            if (next < 0) break;
            add(next);
        }
        return side;
    }

    std::vector<int> initial(const Hypergraph& h, const Limits& lim) const {
        const int nv = static_cast<int>(h.num_vertices());
        std::vector<int> seeds;
        const int nseeds = std::min(nv, 8);
        for (int i = 0; i < nseeds; ++i) seeds.push_back(static_cast<int>((static_cast<long>(i) * nv) / nseeds));
        std::vector<int> best;
        int best_key[2] = {0, 0};
        for (int s : seeds) {
            auto side = grow(h, s, lim);
            refine(h, side, lim);
            int w[2] = {0, 0};
            for (int v = 0; v < nv; ++v) w[side[v]] += h.vertex_weight[v];
            const int key[2] = {violation(w, lim), cut_weight(h, side)};
            if (best.empty() || key[0] < best_key[0] || (key[0] == best_key[0] && key[1] < best_key[1])) {
                best = std::move(side);
                best_key[0] = key[0];
                best_key[1] = key[1];
            }
        }
        return best;
    }

    // Heavy-connectivity matching; returns the coarse hypergraph and the
    // coarse vertex of every fine vertex.
    std::pair<Hypergraph, std::vector<int>> coarsen(const Hypergraph& h) const {
        const int nv = static_cast<int>(h.num_vertices());
        const int total = total_weight(h);
        const int cap = std::max(2, static_cast<int>(std::ceil(1.5 * total / opts.coarsen_to)));
        std::vector<int> match(nv, -1);
        std::vector<double> score(nv, 0.0);
        std::vector<int> touched;
        int nc = 0;
        std::vector<int> coarse_of(nv, -1);
        for (int u = 0; u < nv; ++u) {
            if (coarse_of[u] >= 0) continue;
            touched.clear();
            for (int e : h.incidence[u]) {
                const auto& p = h.pins[e];
                if (p.size() < 2 || p.size() > 256) continue;
                const double s = static_cast<double>(h.hyperedge_weight[e]) / static_cast<double>(p.size() - 1);
                for (int v : p) {
                    if (v == u || coarse_of[v] >= 0) continue;
                    if (h.vertex_weight[u] + h.vertex_weight[v] > cap) continue;
                    if (score[v] == 0.0) touched.push_back(v);
                    score[v] += s;
                }
            }
            int best = -1;
            for (int v : touched) {
                if (best < 0 || score[v] > score[best] || (score[v] == score[best] && v < best)) best = v;
            }
            for (int v : touched) score[v] = 0.0;
            coarse_of[u] = nc;
            if (best >= 0) coarse_of[best] = nc;
            ++nc;
        }
        Hypergraph c;
        c.vertex_ids.resize(nc);
        std::iota(c.vertex_ids.begin(), c.vertex_ids.end(), 0);
        c.vertex_weight.assign(nc, 0);
        for (int v = 0; v < nv; ++v) c.vertex_weight[coarse_of[v]] += h.vertex_weight[v];
        c.incidence.resize(nc);
        for (std::size_t e = 0; e < h.pins.size(); ++e) {
            std::vector<int> p;
            p.reserve(h.pins[e].size());
            for (int v : h.pins[e]) p.push_back(coarse_of[v]);
            std::sort(p.begin(), p.end());
            p.erase(std::unique(p.begin(), p.end()), p.end());
            if (p.size() < 2) continue;
            const int ce = static_cast<int>(c.pins.size());
            for (int v : p) c.incidence[v].push_back(ce);
            c.pins.push_back(std::move(p));
            c.hyperedge_ids.push_back(h.hyperedge_ids[e]);
            c.hyperedge_weight.push_back(h.hyperedge_weight[e]);
        }
        return {std::move(c), std::move(coarse_of)};
    }

    std::vector<int> bisect(const Hypergraph& h, double fraction0) const {
        const int total = total_weight(h);
        Limits lim{max_part_weight(total, fraction0, opts.balance), max_part_weight(total, 1.0 - fraction0, opts.balance),
                   static_cast<int>(std::lround(fraction0 * total))};
        const int nv = static_cast<int>(h.num_vertices());
        if (nv <= opts.coarsen_to) return initial(h, lim);
        auto [coarse, coarse_of] = coarsen(h);
        if (coarse.num_vertices() > static_cast<std::size_t>(0.9 * nv)) return initial(h, lim);
        const auto coarse_side = bisect(coarse, fraction0);
        std::vector<int> side(nv);
        for (int v = 0; v < nv; ++v) side[v] = coarse_side[coarse_of[v]];
        refine(h, side, lim);
        return side;
    }
};

Hypergraph induced(const Hypergraph& h, std::span<const int> vertices) {
    Hypergraph s;
    std::vector<int> local(h.num_vertices(), -1);
    for (int v : vertices) {
        local[v] = static_cast<int>(s.vertex_ids.size());
        s.vertex_ids.push_back(v);
        s.vertex_weight.push_back(h.vertex_weight[v]);
    }
    s.incidence.resize(vertices.size());
    for (std::size_t e = 0; e < h.pins.size(); ++e) {
        std::vector<int> p;
        for (int v : h.pins[e]) {
            if (local[v] >= 0) p.push_back(local[v]);
        }
        if (p.size() < 2) continue;
        const int se = static_cast<int>(s.pins.size());
        for (int v : p) s.incidence[v].push_back(se);
        s.pins.push_back(std::move(p));
        s.hyperedge_ids.push_back(static_cast<int>(e));
        s.hyperedge_weight.push_back(h.hyperedge_weight[e]);
    }
    return s;
}

void kway(const Bisector& b, const Hypergraph& h, std::span<const int> vertices, int k, int first_part,
          std::vector<int>& part_of) {
    if (k == 1 || vertices.size() <= 1) {
        for (int v : vertices) part_of[v] = first_part;
        return;
    }
    const int k0 = k / 2;
    const Hypergraph sub = induced(h, vertices);
    const auto side = b.bisect(sub, static_cast<double>(k0) / k);
    std::vector<int> a;
    std::vector<int> c;
    for (std::size_t i = 0; i < vertices.size(); ++i) (side[i] == 0 ? a : c).push_back(vertices[i]);
    kway(b, h, a, k0, first_part, part_of);
    kway(b, h, c, k - k0, first_part + k0, part_of);
}

}  // namespace

PartitionResult partition_cutset(const Hypergraph& h, const PartitionOptions& opts) {
    if (opts.k < 2) throw std::invalid_argument("partition requires k >= 2");
    PartitionResult r;
    const int nv = static_cast<int>(h.num_vertices());
    auto all_cut = [&] {
        r.cutset = h.hyperedge_ids;
        std::sort(r.cutset.begin(), r.cutset.end());
        r.parts.assign(1, {});
        for (int v = 0; v < nv; ++v) r.parts[0].push_back(h.vertex_ids[v]);
        r.imbalance = 0.0;
        r.split = false;
        return r;
    };
    if (nv < opts.k) return all_cut();

    Bisector b{opts};
    std::vector<int> part_of(nv, 0);
    std::vector<int> all(nv);
    std::iota(all.begin(), all.end(), 0);
    kway(b, h, all, opts.k, 0, part_of);

    std::vector<int> weight(opts.k, 0);
    r.parts.assign(opts.k, {});
    for (int v = 0; v < nv; ++v) {
        r.parts[part_of[v]].push_back(h.vertex_ids[v]);
        weight[part_of[v]] += h.vertex_weight[v];
    }
    if (std::any_of(r.parts.begin(), r.parts.end(), [](const auto& p) { return p.empty(); })) return all_cut();

    for (std::size_t e = 0; e < h.pins.size(); ++e) {
        const auto& p = h.pins[e];
        for (std::size_t i = 1; i < p.size(); ++i) {
            if (part_of[p[i]] != part_of[p[0]]) {
                r.cutset.push_back(h.hyperedge_ids[e]);
                break;
            }
        }
    }
    std::sort(r.cutset.begin(), r.cutset.end());
    if (r.cutset.size() == h.num_hyperedges()) return all_cut();
    for (auto& p : r.parts) std::sort(p.begin(), p.end());
    const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
    r.imbalance = *std::max_element(weight.begin(), weight.end()) / (total / opts.k) - 1.0;
    r.split = true;
    return r;
}

}  // namespace rdis
