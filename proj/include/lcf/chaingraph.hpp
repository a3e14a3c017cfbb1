#pragma once

#include <cstddef>
#include <vector>

#include "lcf/decomp.hpp"
#include "lcf/fitscore.hpp"
#include "lcf/graph.hpp"
#include "lcf/tabular.hpp"

namespace lcf {

struct ChainFactorization {
    std::vector<VertexSet> blocks;              ///< topological block order
    std::vector<VertexSet> block_parents;       ///< pa(B) per block
    std::vector<LCFactorization> per_block;     ///< against G(B, pa(B))
    std::vector<TabularDistribution> outer;     ///< p(v_B | v_pa(B)) per block
    double reconstruction_error = 0;            ///< max |log p - Σ_B log p̂_B|
};

/// Factorizes a joint p (no context) over the random vertices of a chain
/// graph: block conditionals in topological order, each factorized against
/// its conditional graph.
ChainFactorization cg_lc_factorize(const TabularDistribution& p, const Graph& g, const ReferenceAssignment& ref,
                                   const LCOptions& options = {});

/// Population form: Σ_v p(v) Σ_k log p(v_k | pa_k). p ranges over the DAG's
/// vertices in declaration order.
double dag_loglik(const TabularDistribution& p, const Graph& g);

/// Samples: log-likelihood under the per-family maximum-likelihood conditional
/// tables. Cardinalities come from the graph.
double dag_loglik(const SampleSet& data, const Graph& g);

/// CPDAG of a DAG: skeleton and unshielded colliders, closed under the four
/// Meek rules.
Graph essential_graph(const Graph& dag);

struct EquivalenceClass {
    Graph essential;
    std::vector<Graph> members;  ///< canonical order (by directed edge list)
};

inline constexpr std::size_t max_class_undirected_edges = 20;

/// Every DAG represented by a CPDAG. Throws if the input is not a CPDAG or has
/// more than 20 undirected edges.
EquivalenceClass enumerate_equivalence_class(const Graph& essential);

/// Some DAG in the class of a CPDAG (the first one the enumeration finds).
Graph consistent_extension(const Graph& essential);

/// Same skeleton and the same unshielded colliders.
bool markov_equivalent(const Graph& a, const Graph& b);

enum class Penalty { none, bic };

struct ClassScore {
    double score = 0;
    double loglik = 0;
    std::size_t dimension = 0;
    double n = 0;
    bool converged = true;
};

struct ScoreOptions {
    Penalty penalty = Penalty::bic;
    double tol = 1e-8;
    std::size_t max_iter = 20000;
    double pseudo_count = 0;
};

/// Fits the chain-graph likelihood of the essential graph of g (a DAG, or a
/// CPDAG taken as is) block by block and returns log-likelihood minus the
/// optional BIC penalty. Depends on g only through its essential graph.
ClassScore class_coherent_score(const SampleSet& data, const Graph& g, const ScoreOptions& options = {});

} // namespace lcf
