#include "lcf/markov.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <stdexcept>

#include "lcf/decomp.hpp"

namespace lcf {

namespace {

void check_layout(const TabularDistribution& p, const Graph& g) {
    std::vector<Variable> rv, fv;
    for (auto v : g.random_vertices()) rv.push_back({g.name(v), g.vertex(v).cardinality});
    for (auto v : g.fixed_vertices()) fv.push_back({g.name(v), g.vertex(v).cardinality});
    if (rv != p.variables() || fv != p.context())
        throw std::invalid_argument(
            "graph/distribution variable mismatch: the distribution must range over the graph's random "
            "vertices with its fixed vertices as context, in declaration order");
}

std::string statement(const std::vector<std::string>& a, const std::vector<std::string>& b,
                      const std::vector<std::string>& c) {
    auto side = [](const std::vector<std::string>& s) { return s.size() == 1 ? s[0] : brace_names(s); };
    return side(a) + " _||_ " + side(b) + " | " + brace_names(c);
}

void record(MarkovReport& r, std::string what, double dev, double tol) {
    ++r.statements_checked;
    if (dev > tol) r.violations.push_back({std::move(what), dev});
}

void for_each_subset_upto(const VertexSet& pool, std::size_t max_size,
                          const std::function<bool(const VertexSet&)>& f) {
    // Sizes ascending, lexicographic index order within a size; f returns false to stop.
    for (std::size_t k = 0; k <= std::min(max_size, pool.size()); ++k) {
        std::vector<std::size_t> idx(k);
        for (std::size_t i = 0; i < k; ++i) idx[i] = i;
        VertexSet cur(k);
        while (true) {
            for (std::size_t i = 0; i < k; ++i) cur[i] = pool[idx[i]];
            if (!f(cur)) return;
            std::size_t i = k;
            while (i > 0 && idx[i - 1] == pool.size() - k + i - 1) --i;
            if (i == 0) break;
            ++idx[i - 1];
            for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
        }
    }
}

// Components of `keep` under undirected edges, each sorted, ordered by first member.
std::vector<VertexSet> components_within(const Graph& g, const VertexSet& keep) {
    std::vector<int> in(g.size(), 0), seen(g.size(), 0);
    for (auto v : keep) in[v] = 1;
    std::vector<VertexSet> out;
    for (auto s : keep) {
        if (seen[s]) continue;
        VertexSet comp;
        std::deque<std::size_t> todo{s};
        seen[s] = 1;
        while (!todo.empty()) {
            auto v = todo.front();
            todo.pop_front();
            comp.push_back(v);
            for (auto u : g.neighbors(v))
                if (in[u] && !seen[u]) {
                    seen[u] = 1;
                    todo.push_back(u);
                }
        }
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
    }
    return out;
}

VertexSet minus(const VertexSet& a, const VertexSet& b) {
    VertexSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

} // namespace

std::string to_string(MarkovProperty property) {
    switch (property) {
    case MarkovProperty::pairwise: return "pairwise";
    case MarkovProperty::global: return "global";
    case MarkovProperty::factorization: return "factorization";
    }
    return "?";
}

MarkovReport pairwise_markov_holds(const TabularDistribution& p, const Graph& g, double tol) {
    check_layout(p, g);
    MarkovReport r;
    r.property = MarkovProperty::pairwise;
    const auto rv = g.random_vertices();
    for (auto v : rv) {
        for (std::size_t z = 0; z < g.size(); ++z) {
            if (z == v || g.adjacent(v, z)) continue;
            if (g.is_random(z) && z < v) continue;  // symmetric; checked once
            std::vector<std::string> rest;
            for (auto u : rv)
                if (u != v && u != z) rest.push_back(g.name(u));
            const double dev = ci_deviation(p, {g.name(v)}, {g.name(z)}, rest);
            record(r, statement({g.name(v)}, {g.name(z)}, rest), dev, tol);
        }
    }
    r.passed = r.violations.empty();
    return r;
}

MarkovReport global_markov_holds(const TabularDistribution& p, const Graph& g, double tol,
                                 const GlobalMarkovLimits& limits) {
    check_layout(p, g);
    MarkovReport r;
    r.property = MarkovProperty::global;
    const auto rv = g.random_vertices();
    const auto fv = g.fixed_vertices();

    if (g.is_cug()) {
        for_each_subset_upto(rv, limits.max_conditioning, [&](const VertexSet& c) {
            const auto cnames = g.names_of(c);
            const auto rest = minus(rv, c);
            for (const auto& k : components_within(g, rest)) {
                auto others = minus(rest, k);
                const auto pa = g.parents_of_set(k);
                for (auto w : fv)
                    if (!std::binary_search(pa.begin(), pa.end(), w)) others.push_back(w);
                if (others.empty()) continue;
                if (r.statements_checked >= limits.max_statements) return false;
                const auto knames = g.names_of(k), onames = g.names_of(others);
                record(r, statement(knames, onames, cnames), ci_deviation(p, knames, onames, cnames), tol);
            }
            return true;
        });
    } else if (g.is_dag() && fv.empty()) {
        for_each_subset_upto(rv, limits.max_conditioning, [&](const VertexSet& c) {
            const auto cnames = g.names_of(c);
            for (auto a : minus(rv, c)) {
                VertexSet sep;
                for (auto b : rv)
                    if (b != a && !std::binary_search(c.begin(), c.end(), b) && d_separated(g, {a}, {b}, c))
                        sep.push_back(b);
                if (sep.empty()) continue;
                if (r.statements_checked >= limits.max_statements) return false;
                const auto bnames = g.names_of(sep);
                record(r, statement({g.name(a)}, bnames, cnames), ci_deviation(p, {g.name(a)}, bnames, cnames),
                       tol);
            }
            return true;
        });
    } else {
        throw std::invalid_argument(
            "global Markov check supports undirected, conditional undirected and DAG graphs only");
    }
    r.passed = r.violations.empty();
    return r;
}

MarkovReport hammersley_clifford_check(const TabularDistribution& p, const Graph& g, const ReferenceAssignment& ref,
                                       double tol) {
    check_layout(p, g);
    if (!g.is_cug()) throw std::invalid_argument("Hammersley-Clifford check needs a conditional undirected graph");
    MarkovReport r;
    r.property = MarkovProperty::factorization;

    const auto pre = pairwise_markov_holds(p, g, tol);
    if (!pre.passed) {
        for (const auto& v : pre.violations) r.violations.push_back({"precondition: " + v.statement, v.deviation});
        r.statements_checked = pre.statements_checked;
        r.passed = false;
        return r;
    }

    const auto rv = g.random_vertices();
    const auto fv = g.fixed_vertices();
    const auto dec = lauritzen_decompose(p, ref);
    const auto wrefs = ref.levels_for(p.context());
    std::vector<int> w(fv.size());

    for (std::size_t mask = 1; mask < dec.terms.size(); ++mask) {
        VertexSet c;
        for (std::size_t i = 0; i < rv.size(); ++i)
            if (mask >> i & 1U) c.push_back(rv[i]);
        const auto& t = dec.terms[mask];
        bool clique = true;
        for (std::size_t i = 0; i < c.size() && clique; ++i)
            for (std::size_t j = i + 1; j < c.size(); ++j)
                if (!g.undirected(c[i], c[j])) clique = false;

        if (!clique) {
            double worst = 0;
            for (double x : t.log_values) worst = std::max(worst, std::abs(x));
            record(r, "phi " + brace_names(g.names_of(c)) + " = 1", worst, tol);
            continue;
        }
        if (fv.empty()) continue;
        // Clique: φ_C may only depend on the fixed coordinates in C*.
        VertexSet star = g.parents(c.front());
        for (std::size_t i = 1; i < c.size(); ++i) {
            VertexSet next, pa = g.parents(c[i]);
            std::set_intersection(star.begin(), star.end(), pa.begin(), pa.end(), std::back_inserter(next));
            star = std::move(next);
        }
        double worst = 0;
        const std::size_t cells = t.cells();
        for (std::size_t ctx = 0; ctx < p.context_count(); ++ctx) {
            p.contexts().decode(ctx, w);
            for (std::size_t j = 0; j < fv.size(); ++j)
                if (!std::binary_search(star.begin(), star.end(), fv[j])) w[j] = wrefs[j];
            const std::size_t base = p.contexts().encode(w);
            for (std::size_t s = 0; s < cells; ++s) worst = std::max(worst, std::abs(t.at(ctx, s) - t.at(base, s)));
        }
        std::vector<std::string> outside;
        for (auto f : fv)
            if (!std::binary_search(star.begin(), star.end(), f)) outside.push_back(g.name(f));
        record(r, "phi " + brace_names(g.names_of(c)) + " free of " + brace_names(outside), worst, tol);
    }
    r.passed = r.violations.empty();
    return r;
}

} // namespace lcf
