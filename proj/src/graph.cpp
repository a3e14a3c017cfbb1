#include "lcf/graph.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <deque>
#include <functional>
#include <queue>
#include <stdexcept>

namespace lcf {

namespace {

using Mask = std::uint64_t;

Mask bit(std::size_t i) { return Mask{1} << i; }

Mask to_mask(const VertexSet& s) {
    Mask m = 0;
    for (auto v : s) m |= bit(v);
    return m;
}

VertexSet from_mask(Mask m) {
    VertexSet s;
    while (m) {
        s.push_back(static_cast<std::size_t>(std::countr_zero(m)));
        m &= m - 1;
    }
    return s;
}

void check_disjoint(const VertexSet& a, const VertexSet& b, const VertexSet& c) {
    const Mask ma = to_mask(a), mb = to_mask(b), mc = to_mask(c);
    if ((ma & mb) || (ma & mc) || (mb & mc))
        throw std::invalid_argument("separation query: sets must be disjoint");
}

Mask undirected_mask(const Graph& g, std::size_t v) {
    Mask m = 0;
    for (std::size_t u = 0; u < g.size(); ++u)
        if (g.undirected(v, u)) m |= bit(u);
    return m;
}

// Undirected components over all vertices, labelled by smallest index.
std::vector<std::size_t> undirected_components(const Graph& g) {
    std::vector<std::size_t> comp(g.size(), g.size());
    for (std::size_t s = 0; s < g.size(); ++s) {
        if (comp[s] != g.size()) continue;
        std::deque<std::size_t> todo{s};
        comp[s] = s;
        while (!todo.empty()) {
            auto v = todo.front();
            todo.pop_front();
            for (auto u : g.neighbors(v))
                if (comp[u] == g.size()) {
                    comp[u] = s;
                    todo.push_back(u);
                }
        }
    }
    return comp;
}

// Shortest path from `from` to `to` along undirected edges (inclusive).
std::vector<std::size_t> undirected_path(const Graph& g, std::size_t from, std::size_t to) {
    std::vector<std::size_t> prev(g.size(), g.size());
    std::deque<std::size_t> todo{from};
    prev[from] = from;
    while (!todo.empty()) {
        auto v = todo.front();
        todo.pop_front();
        if (v == to) break;
        for (auto u : g.neighbors(v))
            if (prev[u] == g.size()) {
                prev[u] = v;
                todo.push_back(u);
            }
    }
    std::vector<std::size_t> path;
    for (auto v = to; v != from; v = prev[v]) path.push_back(v);
    path.push_back(from);
    std::reverse(path.begin(), path.end());
    return path;
}

} // namespace

std::size_t Graph::add_vertex(std::string name, VertexKind kind, int cardinality) {
    if (name.empty()) throw std::invalid_argument("vertex name must be non-empty");
    if (index_.count(name)) throw std::invalid_argument("duplicate vertex name '" + name + "'");
    if (cardinality < 1 || (kind == VertexKind::random && cardinality < 2))
        throw std::invalid_argument("vertex '" + name + "': cardinality must be >= 2 for random "
                                    "vertices and >= 1 for fixed ones");
    if (vertices_.size() == max_vertices)
        throw std::invalid_argument("graphs are limited to 64 vertices");
    index_.emplace(name, vertices_.size());
    vertices_.push_back(Vertex{std::move(name), kind, cardinality});
    return vertices_.size() - 1;
}

void Graph::check_new_edge(std::size_t a, std::size_t b) const {
    if (a >= size() || b >= size()) throw std::invalid_argument("edge endpoint out of range");
    if (a == b) throw std::invalid_argument("self-loop on '" + name(a) + "'");
    if (adjacent(a, b))
        throw std::invalid_argument("duplicate edge between '" + name(a) + "' and '" + name(b) + "'");
}

void Graph::set_edge(std::size_t a, std::size_t b, std::uint8_t ab, std::uint8_t ba) {
    adj_[a * max_vertices + b] = ab;
    adj_[b * max_vertices + a] = ba;
}

void Graph::add_undirected(std::size_t a, std::size_t b) {
    check_new_edge(a, b);
    if (!is_random(a) || !is_random(b))
        throw std::invalid_argument("undirected edge on fixed vertex ('" + name(a) + "' -- '" + name(b) + "')");
    set_edge(a, b, line, line);
}

void Graph::add_directed(std::size_t from, std::size_t to) {
    check_new_edge(from, to);
    if (!is_random(to))
        throw std::invalid_argument("directed edge into fixed vertex '" + name(to) + "'");
    set_edge(from, to, arrow, back);
}

void Graph::remove_edge(std::size_t a, std::size_t b) { set_edge(a, b, none, none); }

std::size_t Graph::index_of(const std::string& n) const {
    auto it = index_.find(n);
    if (it == index_.end()) throw std::invalid_argument("unknown vertex '" + n + "'");
    return it->second;
}

VertexSet Graph::indices_of(const std::vector<std::string>& names) const {
    VertexSet s;
    for (const auto& n : names) s.push_back(index_of(n));
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end())
        throw std::invalid_argument("vertex listed twice");
    return s;
}

std::vector<std::string> Graph::names_of(const VertexSet& s) const {
    std::vector<std::string> out;
    for (auto v : s) out.push_back(name(v));
    return out;
}

VertexSet Graph::neighbors(std::size_t v) const {
    VertexSet s;
    for (std::size_t u = 0; u < size(); ++u)
        if (undirected(v, u)) s.push_back(u);
    return s;
}

VertexSet Graph::parents(std::size_t v) const {
    VertexSet s;
    for (std::size_t u = 0; u < size(); ++u)
        if (directed(u, v)) s.push_back(u);
    return s;
}

VertexSet Graph::children(std::size_t v) const {
    VertexSet s;
    for (std::size_t u = 0; u < size(); ++u)
        if (directed(v, u)) s.push_back(u);
    return s;
}

VertexSet Graph::adjacents(std::size_t v) const {
    VertexSet s;
    for (std::size_t u = 0; u < size(); ++u)
        if (adjacent(v, u)) s.push_back(u);
    return s;
}

VertexSet Graph::parents_of_set(const VertexSet& s) const {
    const Mask inside = to_mask(s);
    Mask pa = 0;
    for (auto v : s)
        for (auto u : parents(v)) pa |= bit(u);
    return from_mask(pa & ~inside);
}

VertexSet Graph::random_vertices() const {
    VertexSet s;
    for (std::size_t v = 0; v < size(); ++v)
        if (is_random(v)) s.push_back(v);
    return s;
}

VertexSet Graph::fixed_vertices() const {
    VertexSet s;
    for (std::size_t v = 0; v < size(); ++v)
        if (!is_random(v)) s.push_back(v);
    return s;
}

std::size_t Graph::undirected_edge_count() const { return undirected_edges().size(); }
std::size_t Graph::directed_edge_count() const { return directed_edges().size(); }

std::vector<std::pair<std::size_t, std::size_t>> Graph::undirected_edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t a = 0; a < size(); ++a)
        for (std::size_t b = a + 1; b < size(); ++b)
            if (undirected(a, b)) out.emplace_back(a, b);
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> Graph::directed_edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t a = 0; a < size(); ++a)
        for (std::size_t b = 0; b < size(); ++b)
            if (directed(a, b)) out.emplace_back(a, b);
    return out;
}

bool Graph::has_directed_cycle() const {
    std::vector<std::size_t> indeg(size(), 0);
    for (auto [a, b] : directed_edges()) ++indeg[b];
    std::deque<std::size_t> todo;
    for (std::size_t v = 0; v < size(); ++v)
        if (indeg[v] == 0) todo.push_back(v);
    std::size_t seen = 0;
    while (!todo.empty()) {
        auto v = todo.front();
        todo.pop_front();
        ++seen;
        for (auto c : children(v))
            if (--indeg[c] == 0) todo.push_back(c);
    }
    return seen != size();
}

bool Graph::is_dag() const { return undirected_edge_count() == 0 && !has_directed_cycle(); }

bool Graph::is_cug() const {
    for (auto [a, b] : undirected_edges())
        if (!is_random(a) || !is_random(b)) return false;
    for (auto [a, b] : directed_edges())
        if (is_random(a) || !is_random(b)) return false;
    return true;
}

bool operator==(const Graph& x, const Graph& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto &u = x.vertex(i), &v = y.vertex(i);
        if (u.name != v.name || u.kind != v.kind || u.cardinality != v.cardinality) return false;
    }
    return x.adj_ == y.adj_;
}

bool canonical_less(const Graph& g, const VertexSet& a, const VertexSet& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return std::lexicographical_compare(
        a.begin(), a.end(), b.begin(), b.end(),
        [&](std::size_t x, std::size_t y) { return g.name(x) < g.name(y); });
}

void sort_canonical(const Graph& g, std::vector<VertexSet>& sets) {
    std::sort(sets.begin(), sets.end(),
              [&](const VertexSet& a, const VertexSet& b) { return canonical_less(g, a, b); });
}

Graph induced_subgraph(const Graph& g, const VertexSet& s) {
    VertexSet keep = s;
    std::sort(keep.begin(), keep.end());
    Graph out;
    for (auto v : keep) {
        if (v >= g.size()) throw std::invalid_argument("induced_subgraph: vertex out of range");
        const auto& vx = g.vertex(v);
        out.add_vertex(vx.name, vx.kind, vx.cardinality);
    }
    for (std::size_t i = 0; i < keep.size(); ++i)
        for (std::size_t j = 0; j < keep.size(); ++j) {
            if (i < j && g.undirected(keep[i], keep[j])) out.add_undirected(i, j);
            if (g.directed(keep[i], keep[j])) out.add_directed(i, j);
        }
    return out;
}

Graph induced_subgraph(const Graph& g, const std::vector<std::string>& names) {
    return induced_subgraph(g, g.indices_of(names));
}

namespace {

// Extends `current` by higher-indexed vertices adjacent to all members.
template <class Visit>
bool extend_cliques(const std::vector<Mask>& nb, Mask current, Mask candidates, Visit& visit) {
    if (!visit(current)) return false;
    while (candidates) {
        auto v = static_cast<std::size_t>(std::countr_zero(candidates));
        candidates &= candidates - 1;
        if (!extend_cliques(nb, current | bit(v), candidates & nb[v], visit)) return false;
    }
    return true;
}

void bron_kerbosch(const std::vector<Mask>& nb, Mask r, Mask p, Mask x, std::vector<Mask>& out) {
    if (!p && !x) {
        out.push_back(r);
        return;
    }
    // Pivot on the vertex of P ∪ X with the most neighbours in P.
    Mask px = p | x;
    std::size_t pivot = static_cast<std::size_t>(std::countr_zero(px));
    int best = -1;
    for (Mask m = px; m; m &= m - 1) {
        auto u = static_cast<std::size_t>(std::countr_zero(m));
        int c = std::popcount(p & nb[u]);
        if (c > best) {
            best = c;
            pivot = u;
        }
    }
    for (Mask m = p & ~nb[pivot]; m; m &= m - 1) {
        auto v = static_cast<std::size_t>(std::countr_zero(m));
        bron_kerbosch(nb, r | bit(v), p & nb[v], x & nb[v], out);
        p &= ~bit(v);
        x |= bit(v);
    }
}

} // namespace

CliqueSet enumerate_cliques(const Graph& g, bool maximal_only) {
    std::vector<Mask> nb(g.size());
    for (std::size_t v = 0; v < g.size(); ++v) nb[v] = undirected_mask(g, v);
    const Mask all = g.size() == 64 ? ~Mask{0} : bit(g.size()) - 1;

    std::vector<Mask> found;
    if (maximal_only) {
        if (g.size() > 0) bron_kerbosch(nb, 0, all, 0, found);
    } else {
        // Candidates restricted to higher indices so each clique is visited once.
        auto visit = [&](Mask c) {
            found.push_back(c);
            return true;
        };
        found.push_back(0);
        for (std::size_t v = 0; v < g.size(); ++v) {
            Mask higher = all & ~(bit(v + 1) - 1);
            extend_cliques(nb, bit(v), nb[v] & higher, visit);
        }
    }
    CliqueSet out;
    out.maximal_only = maximal_only;
    for (auto m : found) out.cliques.push_back(from_mask(m));
    sort_canonical(g, out.cliques);
    return out;
}

std::size_t count_cliques(const Graph& g, std::size_t stop_after) {
    std::vector<Mask> nb(g.size());
    for (std::size_t v = 0; v < g.size(); ++v) nb[v] = undirected_mask(g, v);
    const Mask all = g.size() == 64 ? ~Mask{0} : bit(g.size()) - 1;
    std::size_t count = 1;
    auto visit = [&](Mask) { return ++count <= stop_after; };
    for (std::size_t v = 0; v < g.size() && count <= stop_after; ++v) {
        Mask higher = all & ~(bit(v + 1) - 1);
        extend_cliques(nb, bit(v), nb[v] & higher, visit);
    }
    return count;
}

ChainGraphCheck validate_chain_graph(const Graph& g) {
    const auto comp = undirected_components(g);
    auto describe = [&](const std::vector<std::pair<std::size_t, bool>>& steps) {
        // steps: (vertex, edge-to-next-is-directed)
        std::string s = "partially directed cycle: ";
        for (std::size_t i = 0; i < steps.size(); ++i) {
            s += g.name(steps[i].first);
            if (i + 1 < steps.size()) s += steps[i].second ? " -> " : " -- ";
        }
        return s;
    };

    for (auto [a, b] : g.directed_edges()) {
        if (comp[a] != comp[b]) continue;
        std::vector<std::pair<std::size_t, bool>> steps{{a, true}};
        for (auto v : undirected_path(g, b, a)) steps.emplace_back(v, false);
        return {false, describe(steps)};
    }

    // DFS over the component quotient graph looking for a back edge.
    const std::size_t n = g.size();
    std::vector<int> state(n, 0);  // indexed by component label
    std::vector<std::pair<std::size_t, std::size_t>> via(n, {n, n});  // edge used to enter
    std::vector<std::size_t> stack;
    std::vector<std::pair<std::size_t, std::size_t>> cycle_edges;

    std::function<bool(std::size_t)> dfs = [&](std::size_t c) {
        state[c] = 1;
        stack.push_back(c);
        for (auto [a, b] : g.directed_edges()) {
            if (comp[a] != c) continue;
            const auto d = comp[b];
            if (state[d] == 1) {
                // Cycle: d ... c -> d
                auto it = std::find(stack.begin(), stack.end(), d);
                for (auto jt = it + 1; jt != stack.end(); ++jt) cycle_edges.push_back(via[*jt]);
                cycle_edges.emplace_back(a, b);
                return true;
            }
            if (state[d] == 0) {
                via[d] = {a, b};
                if (dfs(d)) return true;
            }
        }
        stack.pop_back();
        state[c] = 2;
        return false;
    };
    for (std::size_t v = 0; v < n; ++v) {
        if (comp[v] != v || state[v] != 0) continue;
        if (dfs(v)) {
            std::vector<std::pair<std::size_t, bool>> steps;
            for (std::size_t i = 0; i < cycle_edges.size(); ++i) {
                auto [x, y] = cycle_edges[i];
                auto next_tail = cycle_edges[(i + 1) % cycle_edges.size()].first;
                steps.emplace_back(x, true);
                auto path = undirected_path(g, y, next_tail);
                for (std::size_t k = 0; k + 1 < path.size(); ++k) steps.emplace_back(path[k], false);
            }
            steps.emplace_back(cycle_edges.front().first, false);
            return {false, describe(steps)};
        }
    }
    return {};
}

std::vector<VertexSet> blocks(const Graph& g) {
    auto check = validate_chain_graph(g);
    if (!check.valid) throw std::invalid_argument("not a chain graph: " + check.diagnostic);

    const auto comp = undirected_components(g);
    std::vector<VertexSet> found;
    std::vector<std::size_t> block_of(g.size(), g.size());
    for (auto v : g.random_vertices()) {
        auto label = comp[v];
        auto it = std::find_if(found.begin(), found.end(),
                               [&](const VertexSet& b) { return comp[b.front()] == label; });
        if (it == found.end()) {
            found.push_back({v});
            block_of[v] = found.size() - 1;
        } else {
            it->push_back(v);
            block_of[v] = static_cast<std::size_t>(it - found.begin());
        }
    }

    auto smallest_name = [&](std::size_t b) {
        std::string best = g.name(found[b].front());
        for (auto v : found[b]) best = std::min(best, g.name(v));
        return best;
    };
    std::vector<std::size_t> indeg(found.size(), 0);
    std::vector<std::vector<std::size_t>> succ(found.size());
    for (auto [a, b] : g.directed_edges()) {
        if (block_of[a] == g.size()) continue;  // from a fixed vertex
        auto x = block_of[a], y = block_of[b];
        if (std::find(succ[x].begin(), succ[x].end(), y) == succ[x].end()) {
            succ[x].push_back(y);
            ++indeg[y];
        }
    }
    using Item = std::pair<std::string, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> ready;
    for (std::size_t b = 0; b < found.size(); ++b)
        if (indeg[b] == 0) ready.emplace(smallest_name(b), b);
    std::vector<VertexSet> ordered;
    while (!ready.empty()) {
        auto b = ready.top().second;
        ready.pop();
        ordered.push_back(found[b]);
        for (auto s : succ[b])
            if (--indeg[s] == 0) ready.emplace(smallest_name(s), s);
    }
    return ordered;
}

bool d_separated(const Graph& g, const VertexSet& a, const VertexSet& b, const VertexSet& c) {
    check_disjoint(a, b, c);
    if (!g.is_dag()) throw std::invalid_argument("d_separated: graph is not a DAG");

    const Mask given = to_mask(c);
    // Ancestors of the conditioning set, including itself.
    Mask anc = given;
    for (bool grew = true; grew;) {
        grew = false;
        for (Mask m = anc; m; m &= m - 1) {
            auto v = static_cast<std::size_t>(std::countr_zero(m));
            for (auto p : g.parents(v))
                if (!(anc & bit(p))) {
                    anc |= bit(p);
                    grew = true;
                }
        }
    }

    // Reachability over (vertex, direction). up: entered from a child; down: from a parent.
    enum Dir { up = 0, down = 1 };
    std::vector<std::array<bool, 2>> seen(g.size(), {false, false});
    std::deque<std::pair<std::size_t, Dir>> todo;
    for (auto v : a) todo.emplace_back(v, up);
    Mask reached = 0;
    while (!todo.empty()) {
        auto [v, d] = todo.front();
        todo.pop_front();
        if (seen[v][d]) continue;
        seen[v][d] = true;
        const bool observed = given & bit(v);
        if (!observed) reached |= bit(v);
        if (d == up && !observed) {
            for (auto p : g.parents(v)) todo.emplace_back(p, up);
            for (auto ch : g.children(v)) todo.emplace_back(ch, down);
        } else if (d == down) {
            if (!observed)
                for (auto ch : g.children(v)) todo.emplace_back(ch, down);
            if (anc & bit(v))
                for (auto p : g.parents(v)) todo.emplace_back(p, up);
        }
    }
    return (reached & to_mask(b)) == 0;
}

bool ug_separated(const Graph& g, const VertexSet& a, const VertexSet& b, const VertexSet& c) {
    check_disjoint(a, b, c);
    const Mask blocked = to_mask(c), target = to_mask(b);
    Mask seen = to_mask(a);
    std::deque<std::size_t> todo(a.begin(), a.end());
    while (!todo.empty()) {
        auto v = todo.front();
        todo.pop_front();
        if (target & bit(v)) return false;
        for (auto u : g.adjacents(v)) {
            if ((seen | blocked) & bit(u)) continue;
            seen |= bit(u);
            todo.push_back(u);
        }
    }
    return true;
}

Graph conditional_graph(const Graph& g, const VertexSet& block) {
    VertexSet sorted_block = block;
    std::sort(sorted_block.begin(), sorted_block.end());
    const auto all = blocks(g);
    if (std::find(all.begin(), all.end(), sorted_block) == all.end())
        throw std::invalid_argument("conditional_graph: not a block of the graph");

    const Mask in_block = to_mask(sorted_block);
    const Mask pa = to_mask(g.parents_of_set(sorted_block));
    Graph out;
    std::vector<std::size_t> position(g.size(), g.size());
    for (std::size_t v = 0; v < g.size(); ++v) {
        if (!((in_block | pa) & bit(v))) continue;
        const auto& vx = g.vertex(v);
        position[v] = out.add_vertex(vx.name, (in_block & bit(v)) ? VertexKind::random : VertexKind::fixed,
                                     vx.cardinality);
    }
    for (auto [a, b] : g.undirected_edges())
        if ((in_block & bit(a)) && (in_block & bit(b))) out.add_undirected(position[a], position[b]);
    for (auto [a, b] : g.directed_edges())
        if ((pa & bit(a)) && (in_block & bit(b))) out.add_directed(position[a], position[b]);
    return out;
}

} // namespace lcf
