#include "lcf/chaingraph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "lcf/error.hpp"

namespace lcf {

namespace {

std::vector<Variable> vertex_variables(const Graph& g, const VertexSet& s) {
    std::vector<Variable> out;
    for (auto v : s) out.push_back({g.name(v), g.vertex(v).cardinality});
    return out;
}

void require_plain_dag(const Graph& g, const char* what) {
    if (!g.is_dag()) throw std::invalid_argument(std::string(what) + ": input is not a DAG");
    if (!g.fixed_vertices().empty())
        throw std::invalid_argument(std::string(what) + ": graphs with fixed vertices are not supported");
}

void require_joint_over(const TabularDistribution& p, const Graph& g) {
    if (!p.context().empty()) throw std::invalid_argument("expected a joint distribution without context");
    if (vertex_variables(g, g.random_vertices()) != p.variables())
        throw std::invalid_argument(
            "graph/distribution variable mismatch: the distribution must range over the graph's vertices "
            "in declaration order");
}

// Oriented / unoriented adjacency of a partially directed graph.
struct Pdag {
    std::size_t n = 0;
    std::vector<char> arrow;  // arrow[a*n+b]: a -> b
    std::vector<char> line;   // line[a*n+b] == line[b*n+a]: a - b

    explicit Pdag(std::size_t size) : n(size), arrow(size * size, 0), line(size * size, 0) {}
    bool adj(std::size_t a, std::size_t b) const { return arrow[a * n + b] || arrow[b * n + a] || line[a * n + b]; }
    bool dir(std::size_t a, std::size_t b) const { return arrow[a * n + b]; }
    bool und(std::size_t a, std::size_t b) const { return line[a * n + b]; }
    void orient(std::size_t a, std::size_t b) {
        line[a * n + b] = line[b * n + a] = 0;
        arrow[a * n + b] = 1;
    }
};

// One pass of the four orientation rules; true if anything changed.
bool meek_pass(Pdag& g) {
    const std::size_t n = g.n;
    bool changed = false;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            if (!g.und(a, b)) continue;
            bool orient = false;
            // R1: c -> a - b, c and b non-adjacent.
            for (std::size_t c = 0; c < n && !orient; ++c)
                if (g.dir(c, a) && !g.adj(c, b) && c != b) orient = true;
            // R2: a -> c -> b.
            for (std::size_t c = 0; c < n && !orient; ++c)
                if (g.dir(a, c) && g.dir(c, b)) orient = true;
            // R3: a - c -> b, a - d -> b, c and d non-adjacent.
            for (std::size_t c = 0; c < n && !orient; ++c) {
                if (!g.und(a, c) || !g.dir(c, b)) continue;
                for (std::size_t d = c + 1; d < n && !orient; ++d)
                    if (g.und(a, d) && g.dir(d, b) && !g.adj(c, d)) orient = true;
            }
            // R4: a - c -> d -> b, a adjacent to d, c and b non-adjacent.
            for (std::size_t c = 0; c < n && !orient; ++c) {
                if (!g.und(a, c) || g.adj(c, b) || c == b) continue;
                for (std::size_t d = 0; d < n && !orient; ++d)
                    if (g.dir(c, d) && g.dir(d, b) && g.adj(a, d)) orient = true;
            }
            if (orient) {
                g.orient(a, b);
                changed = true;
            }
        }
    return changed;
}

Graph to_graph(const Graph& like, const Pdag& p) {
    Graph out;
    for (const auto& v : like.vertices()) out.add_vertex(v.name, v.kind, v.cardinality);
    for (std::size_t a = 0; a < p.n; ++a)
        for (std::size_t b = 0; b < p.n; ++b) {
            if (p.dir(a, b)) out.add_directed(a, b);
            if (a < b && p.und(a, b)) out.add_undirected(a, b);
        }
    return out;
}

Graph vertices_only(const Graph& g) {
    Graph out;
    for (const auto& v : g.vertices()) out.add_vertex(v.name, v.kind, v.cardinality);
    return out;
}

// Depth-first orientation of the undirected edges of a PDAG that keeps it
// acyclic and adds no unshielded collider. `visit` returns false to stop.
void orientations(const Graph& e, const std::function<bool(const Graph&)>& visit) {
    const auto edges = e.undirected_edges();
    if (edges.size() > max_class_undirected_edges)
        throw CapExceeded("max_class_undirected_edges", max_class_undirected_edges, edges.size());
    const std::size_t n = e.size();
    std::vector<std::vector<char>> arrow(n, std::vector<char>(n, 0));
    for (auto [a, b] : e.directed_edges()) arrow[a][b] = 1;

    auto reaches = [&](std::size_t from, std::size_t to) {
        std::vector<char> seen(n, 0);
        std::vector<std::size_t> stack{from};
        seen[from] = 1;
        while (!stack.empty()) {
            auto v = stack.back();
            stack.pop_back();
            if (v == to) return true;
            for (std::size_t u = 0; u < n; ++u)
                if (arrow[v][u] && !seen[u]) {
                    seen[u] = 1;
                    stack.push_back(u);
                }
        }
        return false;
    };
    // Orienting u -> v is allowed if v gets no parent non-adjacent to u, and
    // no later parent can be added either (checked when those edges orient).
    auto admissible = [&](std::size_t u, std::size_t v) {
        if (reaches(v, u)) return false;
        for (std::size_t x = 0; x < n; ++x)
            if (x != u && arrow[x][v] && !e.adjacent(x, u)) return false;
        return true;
    };

    bool stop = false;
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (stop) return;
        if (i == edges.size()) {
            Graph dag = vertices_only(e);
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = 0; b < n; ++b)
                    if (arrow[a][b]) dag.add_directed(a, b);
            if (!visit(dag)) stop = true;
            return;
        }
        const auto [a, b] = edges[i];
        for (int flip = 0; flip < 2 && !stop; ++flip) {
            const std::size_t u = flip ? b : a, v = flip ? a : b;
            if (!admissible(u, v)) continue;
            arrow[u][v] = 1;
            rec(i + 1);
            arrow[u][v] = 0;
        }
    };
    rec(0);
}

void require_cpdag_shape(const Graph& e) {
    if (!e.fixed_vertices().empty())
        throw std::invalid_argument("essential graphs with fixed vertices are not supported");
    const auto check = validate_chain_graph(e);
    if (!check.valid) throw std::invalid_argument("input is not a chain graph: " + check.diagnostic);
}

std::vector<std::pair<std::size_t, std::size_t>> unshielded_colliders(const Graph& g) {
    std::vector<std::pair<std::size_t, std::size_t>> out;  // (pair code, head)
    for (std::size_t c = 0; c < g.size(); ++c) {
        const auto pa = g.parents(c);
        for (std::size_t i = 0; i < pa.size(); ++i)
            for (std::size_t j = i + 1; j < pa.size(); ++j)
                if (!g.adjacent(pa[i], pa[j])) out.push_back({pa[i] * g.size() + pa[j], c});
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

ChainFactorization cg_lc_factorize(const TabularDistribution& p, const Graph& g, const ReferenceAssignment& ref,
                                   const LCOptions& options) {
    const auto check = validate_chain_graph(g);
    if (!check.valid) throw std::invalid_argument("invalid chain graph: " + check.diagnostic);
    if (!g.fixed_vertices().empty())
        throw std::invalid_argument("chain-graph factorization expects a graph without fixed vertices");
    require_joint_over(p, g);

    ChainFactorization out;
    out.blocks = blocks(g);
    std::vector<std::vector<double>> fitted;
    for (const auto& b : out.blocks) {
        const auto pa = g.parents_of_set(b);
        out.block_parents.push_back(pa);
        auto cond = to_conditional(p, g.names_of(b), g.names_of(pa));
        const Graph cg = conditional_graph(g, b);
        out.per_block.push_back(lc_factorize(cond, cg, ref, options));
        const auto& f = out.per_block.back();
        auto table = term_product_table(f.variables, f.context, f.univariate_terms, f.phi_terms);
        const std::size_t ns = cond.state_count();
        for (std::size_t i = 0; i < table.size(); ++i) table[i] -= f.log_Z[i / ns];
        fitted.push_back(std::move(table));
        out.outer.push_back(std::move(cond));
    }

    std::vector<int> state(p.variables().size()), bs, ps;
    for (std::size_t s = 0; s < p.state_count(); ++s) {
        p.states().decode(s, state);
        double total = 0;
        for (std::size_t k = 0; k < out.blocks.size(); ++k) {
            bs.clear();
            ps.clear();
            for (auto v : out.blocks[k]) bs.push_back(state[v]);
            for (auto v : out.block_parents[k]) ps.push_back(state[v]);
            const auto& cond = out.outer[k];
            total += fitted[k][cond.contexts().encode(ps) * cond.state_count() + cond.states().encode(bs)];
        }
        out.reconstruction_error = std::max(out.reconstruction_error, std::abs(total - p.log_prob(0, s)));
    }
    return out;
}

double dag_loglik(const TabularDistribution& p, const Graph& g) {
    require_plain_dag(g, "dag_loglik");
    require_joint_over(p, g);
    std::vector<TabularDistribution> families;
    std::vector<VertexSet> parents;
    for (std::size_t k = 0; k < g.size(); ++k) {
        parents.push_back(g.parents(k));
        families.push_back(to_conditional(p, {g.name(k)}, g.names_of(parents.back())));
    }
    std::vector<int> state(g.size()), ps;
    double total = 0;
    for (std::size_t s = 0; s < p.state_count(); ++s) {
        p.states().decode(s, state);
        double lc = 0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            ps.clear();
            for (auto v : parents[k]) ps.push_back(state[v]);
            lc += families[k].log_prob(families[k].contexts().encode(ps), static_cast<std::size_t>(state[k]));
        }
        total += std::exp(p.log_prob(0, s)) * lc;
    }
    return total;
}

double dag_loglik(const SampleSet& data, const Graph& g) {
    require_plain_dag(g, "dag_loglik");
    const auto vars = vertex_variables(g, g.random_vertices());
    data.validate(vars);
    if (data.size() == 0) throw std::invalid_argument("empty sample set");
    std::vector<std::size_t> col;
    for (const auto& v : vars) col.push_back(data.column(v.name));
    double total = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto pa = g.parents(k);
        const StateIndexer ctx(vertex_variables(g, pa));
        const auto card = static_cast<std::size_t>(g.vertex(k).cardinality);
        std::vector<double> counts(ctx.size() * card, 0.0), totals(ctx.size(), 0.0);
        std::vector<int> ps(pa.size());
        for (std::size_t r = 0; r < data.size(); ++r) {
            for (std::size_t j = 0; j < pa.size(); ++j) ps[j] = data.rows[r][col[pa[j]]];
            const auto c = ctx.encode(ps);
            counts[c * card + static_cast<std::size_t>(data.rows[r][col[k]])] += data.weight(r);
            totals[c] += data.weight(r);
        }
        for (std::size_t c = 0; c < ctx.size(); ++c)
            for (std::size_t l = 0; l < card; ++l) {
                const double n = counts[c * card + l];
                if (n > 0) total += n * std::log(n / totals[c]);
            }
    }
    return total;
}

Graph essential_graph(const Graph& dag) {
    require_plain_dag(dag, "essential_graph");
    const std::size_t n = dag.size();
    Pdag p(n);
    for (auto [a, b] : dag.directed_edges()) p.line[a * n + b] = p.line[b * n + a] = 1;
    for (std::size_t c = 0; c < n; ++c) {
        const auto pa = dag.parents(c);
        for (std::size_t i = 0; i < pa.size(); ++i)
            for (std::size_t j = i + 1; j < pa.size(); ++j)
                if (!dag.adjacent(pa[i], pa[j])) {
                    p.orient(pa[i], c);
                    p.orient(pa[j], c);
                }
    }
    while (meek_pass(p)) {
    }
    return to_graph(dag, p);
}

EquivalenceClass enumerate_equivalence_class(const Graph& essential) {
    require_cpdag_shape(essential);
    EquivalenceClass out;
    out.essential = essential;
    orientations(essential, [&](const Graph& dag) {
        if (!(essential_graph(dag) == essential))
            throw Error("input is not a CPDAG: the essential graph of one of its orientations differs from it");
        out.members.push_back(dag);
        return true;
    });
    if (out.members.empty()) throw Error("input is not a CPDAG: no acyclic orientation without new colliders");
    std::sort(out.members.begin(), out.members.end(),
              [](const Graph& a, const Graph& b) { return a.directed_edges() < b.directed_edges(); });
    return out;
}

Graph consistent_extension(const Graph& essential) {
    require_cpdag_shape(essential);
    Graph found;
    bool any = false;
    orientations(essential, [&](const Graph& dag) {
        found = dag;
        any = true;
        return false;
    });
    if (!any) throw Error("no acyclic orientation without new colliders exists");
    return found;
}

bool markov_equivalent(const Graph& a, const Graph& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.name(i) != b.name(i)) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j)
            if (a.adjacent(i, j) != b.adjacent(i, j)) return false;
    return unshielded_colliders(a) == unshielded_colliders(b);
}

ClassScore class_coherent_score(const SampleSet& data, const Graph& g, const ScoreOptions& options) {
    if (data.size() == 0) throw std::invalid_argument("empty sample set");
    Graph e;
    if (g.is_dag()) {
        e = essential_graph(g);
    } else {
        require_cpdag_shape(g);
        if (!(essential_graph(consistent_extension(g)) == g))
            throw std::invalid_argument("class_coherent_score needs a DAG or a CPDAG");
        e = g;
    }
    data.validate(vertex_variables(e, e.random_vertices()));

    ClassScore out;
    FitOptions fo;
    fo.tol = options.tol;
    fo.max_iter = options.max_iter;
    fo.pseudo_count = options.pseudo_count;
    for (const auto& b : blocks(e)) {
        const auto fit = fit_mle(conditional_graph(e, b), data, fo);
        out.loglik += fit.loglik;
        out.dimension += param_count(fit.params);
        out.converged = out.converged && fit.converged;
    }
    out.n = data.total_weight();
    out.score = out.loglik;
    if (options.penalty == Penalty::bic)
        out.score -= 0.5 * static_cast<double>(out.dimension) * std::log(out.n);
    return out;
}

} // namespace lcf
