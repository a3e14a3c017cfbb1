#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lcf/graph.hpp"
#include "lcf/tabular.hpp"

namespace lcf {

enum class TermKind { phi, univariate_conditional, odds_ratio };

/// A table over the states of `subset` and `context`, log domain, context
/// axes varying slowest.
///
/// phi: equals 0 whenever any subset coordinate is at its reference level.
/// univariate_conditional: one subset variable, normalized per context.
/// odds_ratio: an η table over (v_k, predecessors); zero when v_k or the
/// whole predecessor block is at reference.
struct FactorTerm {
    TermKind kind = TermKind::phi;
    std::vector<Variable> subset;
    std::vector<int> reference;  ///< reference level of each subset variable
    std::vector<Variable> context;
    std::vector<double> log_values;

    StateIndexer subset_states() const { return StateIndexer(subset); }
    StateIndexer context_states() const { return StateIndexer(context); }
    std::size_t cells() const { return subset_states().size(); }
    double at(std::size_t context_index, std::size_t state_index) const {
        return log_values[context_index * cells() + state_index];
    }
    double log_value(std::span<const int> subset_state, std::span<const int> context_state = {}) const;
    std::vector<std::string> names() const;
    /// "cond A", "phi {A,B}" or "or D|{A,B}".
    std::string label() const;
};

/// Names of `vars` formatted as {A,B,C}.
std::string brace_names(const std::vector<std::string>& names);

using PartialState = std::vector<std::pair<std::string, int>>;

/// log p(v_C, v*_{V \ C} | w). `c_state` is aligned with `c`; `w_state` is a
/// full context state.
double h_term(const TabularDistribution& p, const std::vector<std::string>& c,
              std::span<const int> c_state, std::span<const int> w_state,
              const ReferenceAssignment& ref);

/// log φ_C = Σ_{B ⊆ C} (-1)^{|C \ B|} H_B, by explicit subset enumeration.
double phi_term(const TabularDistribution& p, const std::vector<std::string>& c,
                std::span<const int> c_state, std::span<const int> w_state,
                const ReferenceAssignment& ref);

/// φ_C for every C ⊆ V, indexed by bitmask over variable positions.
struct LauritzenDecomposition {
    std::vector<Variable> variables;
    std::vector<Variable> context;
    std::vector<FactorTerm> terms;

    const FactorTerm& term(const std::vector<std::string>& names) const;
    /// Σ_C log φ_C at one (context, state) cell, subsets in bitmask order.
    double log_product(std::size_t context_index, std::span<const int> state) const;
};

LauritzenDecomposition lauritzen_decompose(const TabularDistribution& p, const ReferenceAssignment& ref);

/// log OR between two blocks, everything not named in block1, block2 or
/// `given` pinned at reference.
double generalized_odds_ratio(const TabularDistribution& p, const PartialState& block1,
                              const PartialState& block2, const PartialState& given,
                              std::span<const int> w_state, const ReferenceAssignment& ref);

/// log φ_{C ∪ {extra}} as the difference of two Möbius sums over C, one with
/// `extra` at its value and one at reference. `c_state` is aligned with `c`.
double phi_extension_ratio(const TabularDistribution& p, const std::vector<std::string>& c,
                           const std::string& extra, std::span<const int> c_state, int extra_value,
                           std::span<const int> w_state, const ReferenceAssignment& ref);

struct ChenDecomposition {
    std::vector<Variable> variables;
    std::vector<Variable> context;
    std::vector<std::size_t> order;            ///< positions into `variables`
    std::vector<FactorTerm> univariate_terms;  ///< p(v_k | v*_{-k}, w), in `order`
    std::vector<FactorTerm> or_terms;          ///< η_2 .. η_K
    std::vector<double> log_Z;                 ///< explicit normalization sum, per context
    std::vector<double> log_Z_closed;          ///< Σ_k log p(v*_k | v*_{-k}, w) - log p(v* | w)

    /// Σ terms - log_Z at one cell.
    double log_density(std::size_t context_index, std::span<const int> state) const;
};

ChenDecomposition chen_decompose(const TabularDistribution& p, const std::vector<std::string>& order,
                                 const ReferenceAssignment& ref);

/// A non-clique subset whose φ is not identically 1.
struct SubsetDeviation {
    std::vector<std::string> subset;
    double max_abs_log_phi = 0;
};

struct LCDiagnostics {
    std::size_t nonclique_checked = 0;
    std::size_t nonclique_size_cap = 0;
    std::vector<SubsetDeviation> nonclique;  ///< only those beyond tolerance
    double reconstruction_error = 0;         ///< max |log p - log p̂| over all cells
    double z_gap = 0;                        ///< max |closed-form log Z - explicit log Z|
};

struct LCOptions {
    /// Largest non-clique subset whose φ is computed for the diagnostic.
    std::size_t diagnostic_max_size = 4;
    double tol = -1;  ///< negative: use settings().tolerance
};

/// Univariate terms, clique φ terms and normalizers of a distribution
/// against a CUG.
struct LCFactorization {
    Graph graph;
    ReferenceAssignment reference;
    std::vector<Variable> variables;  ///< random vertices of graph
    std::vector<Variable> context;    ///< fixed vertices of graph
    std::vector<FactorTerm> univariate_terms;
    std::vector<FactorTerm> phi_terms;  ///< cliques with |C| >= 2, canonical order
    std::vector<double> log_phi_empty;  ///< per full context
    std::vector<double> log_Z;          ///< closed form, per full context
    std::vector<double> log_Z_direct;   ///< explicit sum of the term product
    LCDiagnostics diagnostics;

    const FactorTerm* find_phi(const std::vector<std::string>& names) const;
    /// Log of the term product minus log_Z at one cell.
    double log_density(std::size_t context_index, std::span<const int> state) const;
};

/// p must range over the random vertices of g (in order) with the fixed
/// vertices as context (in order). Never throws for non-Markov input; see
/// the diagnostics instead.
LCFactorization lc_factorize(const TabularDistribution& p, const Graph& g, const ReferenceAssignment& ref,
                             const LCOptions& options = {});

struct TermCheck {
    std::string term;
    std::string check;  ///< "normalized", "reference" or "finite"
    bool passed = true;
    double deviation = 0;
};

struct RestrictionReport {
    std::vector<TermCheck> checks;
    bool passed() const;
    std::vector<TermCheck> failures() const;
};

RestrictionReport verify_terms(std::span<const FactorTerm> terms, double tol);
RestrictionReport verify_restrictions(const LCFactorization& f, double tol);

/// Forms the product of the terms over g with Z by explicit summation. The
/// terms must fit g (one univariate term per random vertex with context inside
/// its fixed parents; φ terms on cliques of size >= 2 with context inside C*)
/// and pass verify_terms; otherwise throws lcf::Error naming the violations.
TabularDistribution compose_from_terms(const Graph& g, const std::vector<FactorTerm>& univariate_terms,
                                       const std::vector<FactorTerm>& phi_terms,
                                       const ReferenceAssignment& ref);

/// Unnormalized log table Σ terms over (context, state) of `variables`.
std::vector<double> term_product_table(const std::vector<Variable>& variables,
                                       const std::vector<Variable>& context,
                                       const std::vector<FactorTerm>& univariate_terms,
                                       const std::vector<FactorTerm>& phi_terms);

/// Pieces of a bivariate p(v1, v2 | w), all log domain, context slowest.
struct BivariateTerms {
    Variable v1, v2;
    std::vector<Variable> context;
    int ref1 = 0, ref2 = 0;
    std::vector<double> log_univ1;  ///< p(v1 | v2*, w), [w][v1]
    std::vector<double> log_univ2;  ///< p(v2 | v1*, w), [w][v2]
    std::vector<double> log_or;     ///< OR(v1, v2 | w), [w][v1][v2]
};

/// Splits a two-variable table into its univariate conditionals and OR.
BivariateTerms bivariate_terms(const TabularDistribution& p, const ReferenceAssignment& ref);

/// log p(v1 | v2, w) over v1, from univ1 and the OR.
std::vector<double> reconstruct_conditional(const BivariateTerms& t, int v2, std::size_t context_index);

/// log p(v2 | w) over v2, from univ1, univ2 and the OR.
std::vector<double> reconstruct_marginal(const BivariateTerms& t, std::size_t context_index);

/// log p(v2 | v1*, w) over v2, from log p(v2 | w), univ1 and the OR.
std::vector<double> reference_conditional_from_marginal(const BivariateTerms& t,
                                                        std::span<const double> log_marginal2,
                                                        std::size_t context_index);

/// Refuses subset lattices larger than settings().max_subsets.
void check_subset_cap(std::size_t members);

} // namespace lcf
