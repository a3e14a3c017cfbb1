#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lcf/graph.hpp"
#include "lcf/tabular.hpp"

namespace lcf {

enum class MarkovProperty { pairwise, global, factorization };

struct MarkovViolation {
    std::string statement;
    double deviation = 0;
};

struct MarkovReport {
    MarkovProperty property = MarkovProperty::pairwise;
    std::vector<MarkovViolation> violations;
    std::size_t statements_checked = 0;
    bool passed = true;
};

/// Every non-adjacent pair (V, Z) with V random: p(v | rest, w) must not move
/// with z. Fixed Z are compared against their level-0 slice.
MarkovReport pairwise_markov_holds(const TabularDistribution& p, const Graph& g, double tol);

struct GlobalMarkovLimits {
    std::size_t max_conditioning = 5;
    std::size_t max_statements = 100000;
};

/// UG / CUG: for each conditioning set C (|C| <= cap) and each component K of
/// the random vertices minus C, K ⟂ (everything else, plus the fixed vertices
/// outside pa(K)) | C. DAG: for each C and each vertex a outside C, a against
/// the set of vertices d-separated from it by C. Other graph classes throw.
MarkovReport global_markov_holds(const TabularDistribution& p, const Graph& g, double tol,
                                 const GlobalMarkovLimits& limits = {});

/// Checks the conditional Hammersley–Clifford conclusion on a table: log φ_C
/// vanishes for every non-clique C, and each clique φ_C (singletons
/// included) ignores fixed coordinates outside C*. A failing pairwise
/// precondition is reported as a violation rather than raised.
MarkovReport hammersley_clifford_check(const TabularDistribution& p, const Graph& g,
                                       const ReferenceAssignment& ref, double tol);

std::string to_string(MarkovProperty property);

} // namespace lcf
