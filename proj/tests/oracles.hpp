#pragma once

// Brute-force reference implementations. Everything here works on plain
// probabilities and explicit enumeration and shares no code with the library
// beyond reading table entries.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lcf/graph.hpp"
#include "lcf/tabular.hpp"

namespace oracle {

using lcf::Graph;
using lcf::TabularDistribution;

/// All states of the given cardinalities, first axis slowest.
inline std::vector<std::vector<int>> all_states(const std::vector<int>& cards) {
    std::vector<std::vector<int>> out{{}};
    for (int k : cards) {
        std::vector<std::vector<int>> next;
        for (const auto& prefix : out)
            for (int l = 0; l < k; ++l) {
                auto s = prefix;
                s.push_back(l);
                next.push_back(std::move(s));
            }
        out = std::move(next);
    }
    return out;
}

inline std::vector<int> cards_of(const std::vector<lcf::Variable>& vars) {
    std::vector<int> c;
    for (const auto& v : vars) c.push_back(v.cardinality);
    return c;
}

/// p(v | w) as a plain probability.
inline double prob(const TabularDistribution& p, const std::vector<int>& v, const std::vector<int>& w = {}) {
    return std::exp(p.evaluate(v, w));
}

/// Full state with `names` at `values` and everything else at `base`.
inline std::vector<int> with(const TabularDistribution& p, std::vector<int> base,
                             const std::vector<std::string>& names, const std::vector<int>& values) {
    for (std::size_t i = 0; i < names.size(); ++i) base[p.variable_position(names[i])] = values[i];
    return base;
}

/// φ_C as the signed product of pinned probabilities over all subsets of C.
inline double phi(const TabularDistribution& p, const std::vector<std::string>& c, const std::vector<int>& c_state,
                  const std::vector<int>& w, const std::vector<int>& ref) {
    double num = 1, den = 1;
    for (unsigned mask = 0; mask < (1U << c.size()); ++mask) {
        std::vector<std::string> names;
        std::vector<int> vals;
        for (std::size_t i = 0; i < c.size(); ++i)
            if (mask >> i & 1U) {
                names.push_back(c[i]);
                vals.push_back(c_state[i]);
            }
        const double h = prob(p, with(p, ref, names, vals), w);
        const bool even = (c.size() - names.size()) % 2 == 0;
        (even ? num : den) *= h;
    }
    return num / den;
}

/// OR between v_k and its predecessors (order[0..k-1]), successors at reference.
inline double eta(const TabularDistribution& p, const std::vector<std::string>& order, std::size_t k, int vk,
                  const std::vector<int>& pred, const std::vector<int>& w, const std::vector<int>& ref) {
    const std::vector<std::string> prefix(order.begin(), order.begin() + static_cast<long>(k));
    std::vector<int> ref_pred;
    for (const auto& n : prefix) ref_pred.push_back(ref[p.variable_position(n)]);
    const int rk = ref[p.variable_position(order[k])];
    auto at = [&](int x, const std::vector<int>& pr) {
        auto s = with(p, ref, prefix, pr);
        s[p.variable_position(order[k])] = x;
        return prob(p, s, w);
    };
    return at(vk, pred) * at(rk, ref_pred) / (at(rk, pred) * at(vk, ref_pred));
}

/// Max over cells of |p(a | b, c) - p(a | c)|, summing the joint. Variables only.
inline double ci_gap(const TabularDistribution& p, const std::vector<std::string>& a,
                     const std::vector<std::string>& b, const std::vector<std::string>& c) {
    const auto vars = p.variables();
    std::map<std::vector<int>, double> abc, bc, ac, cc;
    auto project = [&](const std::vector<int>& s, const std::vector<std::string>& names) {
        std::vector<int> out;
        for (const auto& n : names) out.push_back(s[p.variable_position(n)]);
        return out;
    };
    auto cat = [](std::vector<std::string> x, const std::vector<std::string>& y) {
        x.insert(x.end(), y.begin(), y.end());
        return x;
    };
    const auto abc_n = cat(cat(a, b), c), bc_n = cat(b, c), ac_n = cat(a, c);
    for (const auto& s : all_states(cards_of(vars))) {
        const double q = prob(p, s);
        abc[project(s, abc_n)] += q;
        bc[project(s, bc_n)] += q;
        ac[project(s, ac_n)] += q;
        cc[project(s, c)] += q;
    }
    double worst = 0;
    for (const auto& [key, q] : abc) {
        const std::vector<int> ka(key.begin(), key.begin() + static_cast<long>(a.size()));
        const std::vector<int> kb(key.begin() + static_cast<long>(a.size()),
                                  key.begin() + static_cast<long>(a.size() + b.size()));
        const std::vector<int> kc(key.begin() + static_cast<long>(a.size() + b.size()), key.end());
        std::vector<int> kbc = kb, kac = ka;
        kbc.insert(kbc.end(), kc.begin(), kc.end());
        kac.insert(kac.end(), kc.begin(), kc.end());
        worst = std::max(worst, std::abs(q / bc[kbc] - ac[kac] / cc[kc]));
    }
    return worst;
}

/// Every pairwise-adjacent subset of vertices under the undirected edges.
inline std::set<std::vector<std::size_t>> cliques(const Graph& g) {
    std::set<std::vector<std::size_t>> out;
    const std::size_t n = g.size();
    for (unsigned long mask = 0; mask < (1UL << n); ++mask) {
        std::vector<std::size_t> s;
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1UL) s.push_back(i);
        bool ok = true;
        for (std::size_t i = 0; i < s.size() && ok; ++i)
            for (std::size_t j = i + 1; j < s.size() && ok; ++j) ok = g.undirected(s[i], s[j]);
        if (ok) out.insert(s);
    }
    return out;
}

/// d-separation by enumerating every simple path of the skeleton.
inline bool d_separated(const Graph& g, const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                        const std::vector<std::size_t>& c) {
    const std::size_t n = g.size();
    const std::set<std::size_t> cs(c.begin(), c.end());
    std::vector<std::set<std::size_t>> desc(n);
    for (std::size_t v = 0; v < n; ++v) {
        std::vector<std::size_t> stack{v};
        while (!stack.empty()) {
            auto u = stack.back();
            stack.pop_back();
            if (!desc[v].insert(u).second) continue;
            for (std::size_t x = 0; x < n; ++x)
                if (g.directed(u, x)) stack.push_back(x);
        }
    }
    auto collider_open = [&](std::size_t v) {
        return std::any_of(desc[v].begin(), desc[v].end(), [&](std::size_t d) { return cs.count(d) > 0; });
    };
    bool active_found = false;
    std::vector<std::size_t> path;
    std::vector<char> on(n, 0);
    const std::set<std::size_t> targets(b.begin(), b.end());
    std::function<void(std::size_t)> walk = [&](std::size_t u) {
        if (active_found) return;
        if (targets.count(u) && path.size() > 1) {
            bool active = true;
            for (std::size_t i = 1; i + 1 < path.size() && active; ++i) {
                const auto prev = path[i - 1], mid = path[i], next = path[i + 1];
                const bool collider = g.directed(prev, mid) && g.directed(next, mid);
                active = collider ? collider_open(mid) : cs.count(mid) == 0;
            }
            if (active) active_found = true;
            return;
        }
        for (std::size_t x = 0; x < n; ++x)
            if (!on[x] && g.adjacent(u, x)) {
                on[x] = 1;
                path.push_back(x);
                walk(x);
                path.pop_back();
                on[x] = 0;
            }
    };
    for (auto s : a) {
        on.assign(n, 0);
        on[s] = 1;
        path = {s};
        walk(s);
        if (active_found) return false;
    }
    return true;
}

/// Skeleton plus unshielded colliders (a, c, b) with a < b.
inline std::pair<std::set<std::pair<std::size_t, std::size_t>>, std::set<std::vector<std::size_t>>> pattern(
    const Graph& g) {
    std::set<std::pair<std::size_t, std::size_t>> skel;
    std::set<std::vector<std::size_t>> coll;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = i + 1; j < g.size(); ++j)
            if (g.adjacent(i, j)) skel.insert({i, j});
    for (std::size_t c = 0; c < g.size(); ++c)
        for (std::size_t a = 0; a < g.size(); ++a)
            for (std::size_t b = a + 1; b < g.size(); ++b)
                if (g.directed(a, c) && g.directed(b, c) && !g.adjacent(a, b)) coll.insert({a, c, b});
    return {skel, coll};
}

/// Every acyclic orientation of the skeleton of g that keeps its pattern.
inline std::vector<Graph> class_members(const Graph& dag) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < dag.size(); ++i)
        for (std::size_t j = i + 1; j < dag.size(); ++j)
            if (dag.adjacent(i, j)) edges.push_back({i, j});
    const auto target = pattern(dag);
    std::vector<Graph> out;
    for (unsigned long mask = 0; mask < (1UL << edges.size()); ++mask) {
        Graph g;
        for (const auto& v : dag.vertices()) g.add_vertex(v.name, v.kind, v.cardinality);
        for (std::size_t e = 0; e < edges.size(); ++e) {
            auto [i, j] = edges[e];
            if (mask >> e & 1UL)
                g.add_directed(j, i);
            else
                g.add_directed(i, j);
        }
        if (!g.has_directed_cycle() && pattern(g) == target) out.push_back(std::move(g));
    }
    return out;
}

/// Edges directed alike in every member stay directed; the rest become lines.
inline Graph essential(const Graph& dag) {
    const auto members = class_members(dag);
    Graph e;
    for (const auto& v : dag.vertices()) e.add_vertex(v.name, v.kind, v.cardinality);
    for (std::size_t i = 0; i < dag.size(); ++i)
        for (std::size_t j = i + 1; j < dag.size(); ++j) {
            if (!dag.adjacent(i, j)) continue;
            const bool all_ij = std::all_of(members.begin(), members.end(), [&](const Graph& m) { return m.directed(i, j); });
            const bool all_ji = std::all_of(members.begin(), members.end(), [&](const Graph& m) { return m.directed(j, i); });
            if (all_ij)
                e.add_directed(i, j);
            else if (all_ji)
                e.add_directed(j, i);
            else
                e.add_undirected(i, j);
        }
    return e;
}

/// Every labeled DAG on n binary vertices named V0.., each pair absent, i->j or j->i.
inline std::vector<Graph> all_dags(std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) pairs.push_back({i, j});
    std::size_t total = 1;
    for (std::size_t i = 0; i < pairs.size(); ++i) total *= 3;
    std::vector<Graph> out;
    for (std::size_t code = 0; code < total; ++code) {
        Graph g;
        for (std::size_t v = 0; v < n; ++v) g.add_random("V" + std::to_string(v));
        std::size_t x = code;
        for (auto [i, j] : pairs) {
            const auto d = x % 3;
            x /= 3;
            if (d == 1) g.add_directed(i, j);
            if (d == 2) g.add_directed(j, i);
        }
        if (!g.has_directed_cycle()) out.push_back(std::move(g));
    }
    return out;
}

/// Σ_rows log p(row), p a joint over the data columns in its own variable order.
inline double loglik(const TabularDistribution& p, const lcf::SampleSet& data) {
    double total = 0;
    for (std::size_t r = 0; r < data.size(); ++r) {
        std::vector<int> s, w;
        for (const auto& v : p.variables()) s.push_back(data.rows[r][data.column(v.name)]);
        for (const auto& v : p.context()) w.push_back(data.rows[r][data.column(v.name)]);
        total += data.weight(r) * std::log(prob(p, s, w));
    }
    return total;
}

} // namespace oracle
