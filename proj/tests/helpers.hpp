#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lcf/decomp.hpp"
#include "lcf/fitscore.hpp"
#include "lcf/graph.hpp"
#include "lcf/tabular.hpp"

namespace testing {

/// Binary A, B with p(00, 01, 10, 11) = (.4, .1, .2, .3).
inline lcf::TabularDistribution fix_ab() {
    return lcf::TabularDistribution::from_probabilities({{"A", 2}, {"B", 2}}, {}, {0.4, 0.1, 0.2, 0.3});
}

inline std::vector<lcf::Variable> vars(const std::vector<int>& cards, const std::string& prefix = "V") {
    std::vector<lcf::Variable> out;
    for (std::size_t i = 0; i < cards.size(); ++i) out.push_back({prefix + std::to_string(i + 1), cards[i]});
    return out;
}

inline std::vector<std::string> names(const std::vector<lcf::Variable>& vs) {
    std::vector<std::string> out;
    for (const auto& v : vs) out.push_back(v.name);
    return out;
}

/// Random cardinalities in [lo, hi].
inline std::vector<int> random_cards(std::mt19937_64& rng, std::size_t k, int lo = 2, int hi = 3) {
    std::uniform_int_distribution<int> d(lo, hi);
    std::vector<int> out(k);
    for (auto& c : out) c = d(rng);
    return out;
}

/// Random reference assignment within the cardinalities.
inline lcf::ReferenceAssignment random_ref(std::mt19937_64& rng, const std::vector<lcf::Variable>& vs) {
    lcf::ReferenceAssignment ref;
    for (const auto& v : vs) ref.set(v.name, std::uniform_int_distribution<int>(0, v.cardinality - 1)(rng));
    return ref;
}

/// Undirected graph over the variables with each edge present with probability q.
inline lcf::Graph random_ug(std::mt19937_64& rng, const std::vector<lcf::Variable>& vs, double q) {
    lcf::Graph g;
    for (const auto& v : vs) g.add_random(v.name, v.cardinality);
    std::bernoulli_distribution coin(q);
    for (std::size_t i = 0; i < vs.size(); ++i)
        for (std::size_t j = i + 1; j < vs.size(); ++j)
            if (coin(rng)) g.add_undirected(i, j);
    return g;
}

/// Random DAG: edges only from lower to higher position, each with probability q.
inline lcf::Graph random_dag(std::mt19937_64& rng, std::size_t n, double q) {
    lcf::Graph g;
    for (std::size_t i = 0; i < n; ++i) g.add_random("V" + std::to_string(i));
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::bernoulli_distribution coin(q);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (coin(rng)) g.add_directed(perm[i], perm[j]);
    return g;
}

/// Model parameters for g with entries uniform in [-scale, scale].
inline lcf::ModelParams random_params(std::mt19937_64& rng, const lcf::Graph& g, const lcf::ReferenceAssignment& ref,
                                      double scale = 1.0, lcf::Family family = lcf::Family::free) {
    auto m = lcf::make_params(g, family, ref);
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<double> theta(lcf::param_count(m));
    for (auto& x : theta) x = u(rng);
    lcf::assign(m, theta);
    return m;
}

/// Admissible univariate and φ terms for a CUG, drawn at random: univariate
/// terms normalized per context, φ terms zero (log) at reference.
struct Terms {
    std::vector<lcf::FactorTerm> univariate, phi;
};

inline Terms random_terms(std::mt19937_64& rng, const lcf::Graph& g, const lcf::ReferenceAssignment& ref,
                          double scale = 1.5) {
    std::uniform_real_distribution<double> u(-scale, scale);
    auto vars_of = [&](const lcf::VertexSet& s) {
        std::vector<lcf::Variable> out;
        for (auto v : s) out.push_back({g.name(v), g.vertex(v).cardinality});
        return out;
    };
    Terms t;
    for (auto v : g.random_vertices()) {
        lcf::FactorTerm f;
        f.kind = lcf::TermKind::univariate_conditional;
        f.subset = vars_of({v});
        f.reference = {ref.level(g.name(v))};
        f.context = vars_of(g.parents(v));
        const auto nc = f.context_states().size();
        const int k = g.vertex(v).cardinality;
        for (std::size_t c = 0; c < nc; ++c) {
            std::vector<double> row(static_cast<std::size_t>(k));
            for (auto& x : row) x = u(rng);
            const double z = lcf::log_sum_exp(row);
            for (auto x : row) f.log_values.push_back(x - z);
        }
        t.univariate.push_back(std::move(f));
    }
    for (const auto& c : lcf::enumerate_cliques(g, false).cliques) {
        if (c.size() < 2) continue;
        lcf::FactorTerm f;
        f.kind = lcf::TermKind::phi;
        f.subset = vars_of(c);
        for (auto v : c) f.reference.push_back(ref.level(g.name(v)));
        lcf::VertexSet star;
        for (auto w : g.fixed_vertices())
            if (std::all_of(c.begin(), c.end(), [&](std::size_t v) { return g.directed(w, v); })) star.push_back(w);
        f.context = vars_of(star);
        const auto ss = f.subset_states();
        const auto nc = f.context_states().size();
        for (std::size_t ctx = 0; ctx < nc; ++ctx)
            for (std::size_t s = 0; s < ss.size(); ++s) {
                const auto st = ss.decode(s);
                bool at_ref = false;
                for (std::size_t i = 0; i < st.size(); ++i) at_ref = at_ref || st[i] == f.reference[i];
                f.log_values.push_back(at_ref ? 0.0 : u(rng));
            }
        t.phi.push_back(std::move(f));
    }
    return t;
}

inline lcf::TabularDistribution random_model(std::mt19937_64& rng, const lcf::Graph& g,
                                             const lcf::ReferenceAssignment& ref, double scale = 1.5) {
    const auto t = random_terms(rng, g, ref, scale);
    return lcf::compose_from_terms(g, t.univariate, t.phi, ref);
}

/// Joint over the vertices of a DAG (declaration order) as a product of
/// random conditional tables.
inline lcf::TabularDistribution random_dag_model(const lcf::Graph& dag, std::uint64_t seed,
                                                 double concentration = 1.0) {
    std::vector<lcf::Variable> all;
    for (const auto& v : dag.vertices()) all.push_back({v.name, v.cardinality});
    std::vector<lcf::TabularDistribution> cpts;
    for (std::size_t v = 0; v < dag.size(); ++v) {
        std::vector<lcf::Variable> pa;
        for (auto u : dag.parents(v)) pa.push_back(all[u]);
        cpts.push_back(lcf::random_positive({all[v]}, seed * 1000 + v, concentration, pa));
    }
    const lcf::StateIndexer ix(all);
    std::vector<double> log_table(ix.size(), 0.0);
    for (std::size_t s = 0; s < ix.size(); ++s) {
        const auto st = ix.decode(s);
        for (std::size_t v = 0; v < dag.size(); ++v) {
            std::vector<int> ps;
            for (auto u : dag.parents(v)) ps.push_back(st[u]);
            log_table[s] += cpts[v].evaluate(std::vector<int>{st[v]}, ps);
        }
    }
    return lcf::TabularDistribution(all, {}, std::move(log_table));
}

/// p tilted by exp(noise) per cell and renormalized.
inline lcf::TabularDistribution perturb(std::mt19937_64& rng, const lcf::TabularDistribution& p, double noise) {
    std::normal_distribution<double> d(0, noise);
    std::vector<double> lt(p.log_table().begin(), p.log_table().end());
    for (auto& x : lt) x += d(rng);
    const std::size_t ns = p.state_count();
    for (std::size_t c = 0; c < p.context_count(); ++c) {
        const double z = lcf::log_sum_exp(std::span<const double>(lt).subspan(c * ns, ns));
        for (std::size_t s = 0; s < ns; ++s) lt[c * ns + s] -= z;
    }
    return lcf::TabularDistribution(p.variables(), p.context(), std::move(lt));
}

/// Max |a - b| over two term lists with matching layouts.
inline double max_term_gap(const std::vector<lcf::FactorTerm>& a, const std::vector<lcf::FactorTerm>& b) {
    if (a.size() != b.size()) return INFINITY;
    double worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].subset != b[i].subset || a[i].context != b[i].context ||
            a[i].log_values.size() != b[i].log_values.size())
            return INFINITY;
        for (std::size_t j = 0; j < a[i].log_values.size(); ++j)
            worst = std::max(worst, std::abs(a[i].log_values[j] - b[i].log_values[j]));
    }
    return worst;
}

} // namespace testing
