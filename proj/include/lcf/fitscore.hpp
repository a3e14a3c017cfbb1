#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lcf/decomp.hpp"
#include "lcf/graph.hpp"
#include "lcf/tabular.hpp"

namespace lcf {

enum class Family { free, transformed_linear };

/// One parameter block.
///
/// Univariate blocks hold log-ratios against the reference level, laid out
/// [context][non-reference level]. Free interaction blocks hold log φ at
/// the non-reference level combinations, [context][combination], each axis
/// skipping its reference level. Transformed-linear interaction blocks hold
/// a single γ and no context.
struct ParamBlock {
    std::vector<Variable> subset;
    std::vector<Variable> context;
    std::vector<double> values;
};

struct ModelParams {
    Graph graph;
    ReferenceAssignment reference;
    Family family = Family::free;
    std::vector<ParamBlock> univariate;    ///< one per random vertex, declaration order
    std::vector<ParamBlock> interactions;  ///< one per clique with |C| >= 2, canonical order
    /// Transformed-linear score functions g, per random vertex and level.
    std::vector<std::vector<double>> scores;
};

/// All-zero parameters for g (a CUG). Scores default to the level index.
ModelParams make_params(const Graph& g, Family family = Family::free, const ReferenceAssignment& ref = {});

std::size_t param_count(const ModelParams& m);

/// Parameters in block order: univariate blocks, then interactions.
std::vector<double> flatten(const ModelParams& m);
void assign(ModelParams& m, std::span<const double> theta);

/// The univariate and φ terms the parameters stand for.
std::vector<FactorTerm> univariate_terms(const ModelParams& m);
std::vector<FactorTerm> phi_terms(const ModelParams& m);

/// Always a valid positive distribution in the model of m.graph.
TabularDistribution params_to_distribution(const ModelParams& m);

/// Free-family parameters read off a factorization.
ModelParams params_from_factorization(const LCFactorization& f);

/// γ · ∏_i (g_i(v_i) - g_i(v*_i)).
double transformed_linear_phi(double gamma, std::span<const double> state_scores, std::span<const double> ref_scores);

struct LogLikelihood {
    double loglik = 0;             ///< total (weighted) log-likelihood
    std::vector<double> gradient;  ///< gradient of the mean log-likelihood
    double n = 0;                  ///< total weight
};

/// Exact conditional log-likelihood of the data columns for the random
/// vertices given the fixed ones, Z by full enumeration per context.
/// `pseudo_count` is added to every (context, state) cell.
LogLikelihood loglik_and_gradient(const ModelParams& m, const SampleSet& data, double pseudo_count = 0);

struct FitOptions {
    Family family = Family::free;
    ReferenceAssignment reference;
    std::vector<double> init;  ///< empty: zeros
    std::vector<std::vector<double>> scores;  ///< transformed-linear g; empty: level index
    double tol = 1e-8;         ///< on the max-norm of the mean-log-likelihood gradient
    std::size_t max_iter = 20000;
    double pseudo_count = 0;
};

struct FitResult {
    ModelParams params;
    std::vector<double> trace;  ///< total log-likelihood of every accepted iterate, initial point first
    bool converged = false;
    std::size_t iterations = 0;
    double grad_norm = 0;
    double loglik = 0;
};

/// Gradient ascent with Armijo backtracking (c = 1e-4, shrink 0.5). The first
/// trial step of each iteration is the Barzilai–Borwein step.
FitResult fit_mle(const Graph& g, const SampleSet& data, const FitOptions& options = {});

} // namespace lcf
