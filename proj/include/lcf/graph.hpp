#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace lcf {

enum class VertexKind { random, fixed };

struct Vertex {
    std::string name;
    VertexKind kind = VertexKind::random;
    int cardinality = 2;
};

/// Vertex indices, kept sorted in declaration order.
using VertexSet = std::vector<std::size_t>;

/// Mixed graph over random and fixed vertices. Covers UGs, DAGs, chain graphs,
/// CUGs and CDAGs; which of those a given instance is gets checked by the
/// operations that care.
///
/// At most one edge joins any vertex pair. Vertices are indexed in declaration
/// order, which is also the canonical variable order.
class Graph {
public:
    static constexpr std::size_t max_vertices = 64;

    Graph() = default;

    std::size_t add_vertex(std::string name, VertexKind kind, int cardinality);
    std::size_t add_random(std::string name, int cardinality = 2) {
        return add_vertex(std::move(name), VertexKind::random, cardinality);
    }
    std::size_t add_fixed(std::string name, int cardinality = 2) {
        return add_vertex(std::move(name), VertexKind::fixed, cardinality);
    }

    void add_undirected(std::size_t a, std::size_t b);
    void add_directed(std::size_t from, std::size_t to);
    void add_undirected(const std::string& a, const std::string& b) {
        add_undirected(index_of(a), index_of(b));
    }
    void add_directed(const std::string& from, const std::string& to) {
        add_directed(index_of(from), index_of(to));
    }
    void remove_edge(std::size_t a, std::size_t b);

    std::size_t size() const noexcept { return vertices_.size(); }
    const Vertex& vertex(std::size_t i) const { return vertices_.at(i); }
    const std::vector<Vertex>& vertices() const noexcept { return vertices_; }
    const std::string& name(std::size_t i) const { return vertices_.at(i).name; }
    bool is_random(std::size_t i) const { return vertices_.at(i).kind == VertexKind::random; }

    /// Throws std::invalid_argument for unknown names.
    std::size_t index_of(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    VertexSet indices_of(const std::vector<std::string>& names) const;
    std::vector<std::string> names_of(const VertexSet& s) const;

    bool adjacent(std::size_t a, std::size_t b) const { return edge(a, b) != none; }
    bool undirected(std::size_t a, std::size_t b) const { return edge(a, b) == line; }
    /// True for the edge a -> b.
    bool directed(std::size_t a, std::size_t b) const { return edge(a, b) == arrow; }

    VertexSet neighbors(std::size_t v) const;  ///< undirected neighbours
    VertexSet parents(std::size_t v) const;
    VertexSet children(std::size_t v) const;
    VertexSet adjacents(std::size_t v) const;
    VertexSet parents_of_set(const VertexSet& s) const;  ///< pa(S) \ S

    VertexSet random_vertices() const;
    VertexSet fixed_vertices() const;

    std::size_t undirected_edge_count() const;
    std::size_t directed_edge_count() const;
    /// Pairs (a, b) with a < b.
    std::vector<std::pair<std::size_t, std::size_t>> undirected_edges() const;
    /// Pairs (from, to), sorted.
    std::vector<std::pair<std::size_t, std::size_t>> directed_edges() const;

    bool has_directed_cycle() const;
    /// No undirected edges and no directed cycles.
    bool is_dag() const;
    /// Undirected edges only among random vertices, directed edges only fixed -> random.
    bool is_cug() const;

    /// Same vertices (names, kinds, cardinalities, order) and the same edges.
    friend bool operator==(const Graph& x, const Graph& y);

private:
    enum : std::uint8_t { none = 0, line = 1, arrow = 2, back = 3 };

    std::uint8_t edge(std::size_t a, std::size_t b) const { return adj_[a * max_vertices + b]; }
    void set_edge(std::size_t a, std::size_t b, std::uint8_t ab, std::uint8_t ba);
    void check_new_edge(std::size_t a, std::size_t b) const;

    std::vector<Vertex> vertices_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::uint8_t> adj_ = std::vector<std::uint8_t>(max_vertices * max_vertices, none);
};

/// Set-valued output of the clique enumeration.
struct CliqueSet {
    std::vector<VertexSet> cliques;
    bool maximal_only = false;
};

/// Orders sets by size, then lexicographically by member names.
bool canonical_less(const Graph& g, const VertexSet& a, const VertexSet& b);
void sort_canonical(const Graph& g, std::vector<VertexSet>& sets);

Graph induced_subgraph(const Graph& g, const VertexSet& s);
Graph induced_subgraph(const Graph& g, const std::vector<std::string>& names);

/// Cliques of the undirected part (directed edges ignored). With
/// maximal_only=false the result holds every clique, including the empty set
/// and singletons; otherwise only the maximal ones (Bron–Kerbosch with pivot).
CliqueSet enumerate_cliques(const Graph& g, bool maximal_only);

/// Number of cliques of the undirected part, stopping once `stop_after` is passed.
std::size_t count_cliques(const Graph& g, std::size_t stop_after);

struct ChainGraphCheck {
    bool valid = true;
    std::string diagnostic;
};

/// A chain graph has no partially directed cycle: the quotient of undirected
/// components under directed edges is acyclic and no directed edge stays
/// inside a component.
ChainGraphCheck validate_chain_graph(const Graph& g);

/// Undirected components of the random vertices, in topological block order
/// (ties broken by smallest member name). Throws for non-chain graphs.
std::vector<VertexSet> blocks(const Graph& g);

/// d-separation of a and b given c in a DAG or CDAG.
bool d_separated(const Graph& g, const VertexSet& a, const VertexSet& b, const VertexSet& c);

/// Separation in the undirected graph: every a-b path meets c.
bool ug_separated(const Graph& g, const VertexSet& a, const VertexSet& b, const VertexSet& c);

/// The CUG G(B, pa(B)): random vertices B, fixed vertices pa(B), undirected
/// edges inside B and directed edges from parents into B. Edges among the
/// parents are dropped.
Graph conditional_graph(const Graph& g, const VertexSet& block);

} // namespace lcf
