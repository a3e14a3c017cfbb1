#include "lcf/decomp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "lcf/error.hpp"
#include "lcf/kernels.hpp"
#include "lcf/settings.hpp"

namespace lcf {

namespace {

std::vector<std::size_t> positions_of(const TabularDistribution& p, const std::vector<std::string>& names) {
    std::vector<std::size_t> pos;
    for (const auto& n : names) pos.push_back(p.variable_position(n));
    auto sorted = pos;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("variable listed twice in subset");
    return pos;
}

void check_levels(const TabularDistribution& p, const std::vector<std::size_t>& pos, std::span<const int> state) {
    if (state.size() != pos.size()) throw std::out_of_range("subset state has wrong length");
    for (std::size_t i = 0; i < pos.size(); ++i)
        if (state[i] < 0 || state[i] >= p.variables()[pos[i]].cardinality)
            throw std::out_of_range("state index out of bounds for '" + p.variables()[pos[i]].name + "'");
}

double lp_at(const TabularDistribution& p, std::size_t ctx, const std::vector<int>& state) {
    return p.log_prob(ctx, p.states().encode(state));
}

// log p(v_k = . | v*_{-k}, w) over the levels of position k.
std::vector<double> reference_conditional(const TabularDistribution& p, std::size_t ctx, std::size_t k,
                                          const std::vector<int>& refs) {
    auto state = refs;
    std::vector<double> out(static_cast<std::size_t>(p.variables()[k].cardinality));
    for (std::size_t l = 0; l < out.size(); ++l) {
        state[k] = static_cast<int>(l);
        out[l] = lp_at(p, ctx, state);
    }
    const double norm = log_sum_exp(out);
    for (auto& x : out) x -= norm;
    return out;
}

kernels::MobiusProblem mobius_problem(const TabularDistribution& p, std::size_t ctx,
                                      const std::vector<int>& refs, const std::vector<std::size_t>& axes) {
    kernels::MobiusProblem pr;
    pr.log_row = p.row(ctx);
    for (std::size_t i = 0; i < p.variables().size(); ++i) pr.strides.push_back(p.states().stride(i));
    pr.reference = refs;
    pr.axes = axes;
    for (auto a : axes) pr.cards.push_back(p.variables()[a].cardinality);
    return pr;
}

// A term wired to positions in a (variables, context) layout.
struct BoundTerm {
    const FactorTerm* term = nullptr;
    std::vector<std::size_t> vpos, wpos, vstride, wstride;
    std::size_t cells = 1;

    double eval(std::span<const int> v, std::span<const int> w) const {
        std::size_t si = 0, ci = 0;
        for (std::size_t j = 0; j < vpos.size(); ++j) si += static_cast<std::size_t>(v[vpos[j]]) * vstride[j];
        for (std::size_t j = 0; j < wpos.size(); ++j) ci += static_cast<std::size_t>(w[wpos[j]]) * wstride[j];
        return term->log_values[ci * cells + si];
    }
};

std::size_t find_var(const std::vector<Variable>& vars, const Variable& v, const std::string& where) {
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i].name == v.name) {
            if (vars[i].cardinality != v.cardinality)
                throw std::invalid_argument(where + ": cardinality mismatch for '" + v.name + "'");
            return i;
        }
    throw std::invalid_argument(where + ": unknown variable '" + v.name + "'");
}

BoundTerm bind(const FactorTerm& t, const std::vector<Variable>& variables, const std::vector<Variable>& context) {
    BoundTerm b;
    b.term = &t;
    const auto ss = t.subset_states();
    const auto cs = t.context_states();
    for (std::size_t j = 0; j < t.subset.size(); ++j) {
        b.vpos.push_back(find_var(variables, t.subset[j], t.label()));
        b.vstride.push_back(ss.stride(j));
    }
    for (std::size_t j = 0; j < t.context.size(); ++j) {
        b.wpos.push_back(find_var(context, t.context[j], t.label()));
        b.wstride.push_back(cs.stride(j));
    }
    b.cells = ss.size();
    if (t.log_values.size() != ss.size() * cs.size())
        throw std::invalid_argument(t.label() + ": table has wrong size");
    return b;
}

std::vector<BoundTerm> bind_all(const std::vector<Variable>& variables, const std::vector<Variable>& context,
                                const std::vector<FactorTerm>& a, const std::vector<FactorTerm>& b) {
    std::vector<BoundTerm> out;
    for (const auto& t : a) out.push_back(bind(t, variables, context));
    for (const auto& t : b) out.push_back(bind(t, variables, context));
    return out;
}

double sum_bound(const std::vector<BoundTerm>& terms, std::span<const int> v, std::span<const int> w) {
    double s = 0;
    for (const auto& t : terms) s += t.eval(v, w);
    return s;
}

bool any_at_reference(const FactorTerm& t, std::span<const int> s) {
    for (std::size_t j = 0; j < s.size(); ++j)
        if (s[j] == t.reference[j]) return true;
    return false;
}

bool or_at_reference(const FactorTerm& t, std::span<const int> s) {
    if (s.empty() || s[0] == t.reference[0]) return true;
    for (std::size_t j = 1; j < s.size(); ++j)
        if (s[j] != t.reference[j]) return false;
    return true;
}

std::vector<Variable> vertex_variables(const Graph& g, const VertexSet& s) {
    std::vector<Variable> out;
    for (auto v : s) out.push_back({g.name(v), g.vertex(v).cardinality});
    return out;
}

VertexSet parents_intersection(const Graph& g, const VertexSet& c) {
    VertexSet acc = g.parents(c.front());
    for (std::size_t i = 1; i < c.size(); ++i) {
        VertexSet next, pa = g.parents(c[i]);
        std::set_intersection(acc.begin(), acc.end(), pa.begin(), pa.end(), std::back_inserter(next));
        acc = std::move(next);
    }
    return acc;
}

bool is_clique(const Graph& g, const VertexSet& c) {
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = i + 1; j < c.size(); ++j)
            if (!g.undirected(c[i], c[j])) return false;
    return true;
}

// Every k-subset of `pool`, in lexicographic index order.
void for_each_combination(const VertexSet& pool, std::size_t k, const std::function<void(const VertexSet&)>& f) {
    if (k > pool.size()) return;
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    VertexSet cur(k);
    while (true) {
        for (std::size_t i = 0; i < k; ++i) cur[i] = pool[idx[i]];
        f(cur);
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == pool.size() - k + i - 1) --i;
        if (i == 0) return;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

} // namespace

void check_subset_cap(std::size_t members) {
    const std::size_t cap = settings().max_subsets;
    if (members >= 63 || (std::size_t{1} << members) > cap)
        throw CapExceeded("max_subsets", cap,
                          members >= 63 ? std::numeric_limits<std::size_t>::max() : std::size_t{1} << members);
}

std::string brace_names(const std::vector<std::string>& names) {
    std::string s = "{";
    for (std::size_t i = 0; i < names.size(); ++i) s += (i ? "," : "") + names[i];
    return s + "}";
}

double FactorTerm::log_value(std::span<const int> subset_state, std::span<const int> context_state) const {
    return at(context_states().encode(context_state), subset_states().encode(subset_state));
}

std::vector<std::string> FactorTerm::names() const {
    std::vector<std::string> out;
    for (const auto& v : subset) out.push_back(v.name);
    return out;
}

std::string FactorTerm::label() const {
    auto n = names();
    switch (kind) {
    case TermKind::univariate_conditional:
        return "cond " + (n.empty() ? std::string("?") : n.front());
    case TermKind::odds_ratio:
        return "or " + (n.empty() ? std::string("?") : n.front()) + "|" +
               brace_names(std::vector<std::string>(n.begin() + (n.empty() ? 0 : 1), n.end()));
    case TermKind::phi:
        break;
    }
    return "phi " + brace_names(n);
}

double h_term(const TabularDistribution& p, const std::vector<std::string>& c, std::span<const int> c_state,
              std::span<const int> w_state, const ReferenceAssignment& ref) {
    const auto pos = positions_of(p, c);
    check_levels(p, pos, c_state);
    auto state = ref.levels_for(p.variables());
    for (std::size_t i = 0; i < pos.size(); ++i) state[pos[i]] = c_state[i];
    return p.evaluate(state, w_state);
}

double phi_term(const TabularDistribution& p, const std::vector<std::string>& c, std::span<const int> c_state,
                std::span<const int> w_state, const ReferenceAssignment& ref) {
    check_subset_cap(c.size());
    const auto pos = positions_of(p, c);
    check_levels(p, pos, c_state);
    const std::size_t ctx = p.contexts().encode(w_state);
    const auto refs = ref.levels_for(p.variables());
    const std::size_t k = pos.size();
    double acc = 0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
        auto state = refs;
        for (std::size_t j = 0; j < k; ++j)
            if (mask >> j & 1U) state[pos[j]] = c_state[j];
        const double h = lp_at(p, ctx, state);
        acc += (k - static_cast<std::size_t>(std::popcount(mask))) % 2 == 0 ? h : -h;
    }
    return acc;
}

const FactorTerm& LauritzenDecomposition::term(const std::vector<std::string>& names) const {
    std::size_t mask = 0;
    for (const auto& n : names) {
        std::size_t i = 0;
        while (i < variables.size() && variables[i].name != n) ++i;
        if (i == variables.size()) throw std::invalid_argument("unknown variable '" + n + "'");
        mask |= std::size_t{1} << i;
    }
    return terms.at(mask);
}

double LauritzenDecomposition::log_product(std::size_t context_index, std::span<const int> state) const {
    double s = 0;
    for (std::size_t mask = 0; mask < terms.size(); ++mask) {
        const auto& t = terms[mask];
        std::size_t idx = 0, j = 0;
        const auto ss = t.subset_states();
        for (std::size_t i = 0; i < variables.size(); ++i)
            if (mask >> i & 1U) idx += static_cast<std::size_t>(state[i]) * ss.stride(j++);
        s += t.at(context_index, idx);
    }
    return s;
}

LauritzenDecomposition lauritzen_decompose(const TabularDistribution& p, const ReferenceAssignment& ref) {
    if (!p.positive()) throw std::invalid_argument("decomposition requires a positive distribution");
    const std::size_t k = p.variables().size();
    check_subset_cap(k);
    const auto refs = ref.levels_for(p.variables());
    LauritzenDecomposition out;
    out.variables = p.variables();
    out.context = p.context();
    out.terms.resize(std::size_t{1} << k);
    for (std::size_t mask = 0; mask < out.terms.size(); ++mask) {
        auto& t = out.terms[mask];
        std::vector<std::size_t> axes;
        for (std::size_t i = 0; i < k; ++i)
            if (mask >> i & 1U) {
                axes.push_back(i);
                t.subset.push_back(p.variables()[i]);
                t.reference.push_back(refs[i]);
            }
        t.kind = TermKind::phi;
        t.context = p.context();
        const std::size_t cells = t.cells();
        t.log_values.resize(cells * p.context_count());
        for (std::size_t c = 0; c < p.context_count(); ++c)
            kernels::mobius_phi(mobius_problem(p, c, refs, axes),
                                std::span<double>(t.log_values).subspan(c * cells, cells));
    }
    return out;
}

double generalized_odds_ratio(const TabularDistribution& p, const PartialState& block1, const PartialState& block2,
                              const PartialState& given, std::span<const int> w_state,
                              const ReferenceAssignment& ref) {
    std::vector<int> owner(p.variables().size(), 0);
    auto claim = [&](const PartialState& s, int who) {
        for (const auto& [name, level] : s) {
            auto i = p.variable_position(name);
            if (owner[i] != 0) throw std::invalid_argument("odds ratio: blocks overlap at '" + name + "'");
            if (level < 0 || level >= p.variables()[i].cardinality)
                throw std::out_of_range("odds ratio: level out of range for '" + name + "'");
            owner[i] = who;
        }
    };
    claim(block1, 1);
    claim(block2, 2);
    claim(given, 3);
    const std::size_t ctx = p.contexts().encode(w_state);
    auto base = ref.levels_for(p.variables());
    for (const auto& [name, level] : given) base[p.variable_position(name)] = level;
    auto with = [&](bool one, bool two) {
        auto s = base;
        if (one)
            for (const auto& [name, level] : block1) s[p.variable_position(name)] = level;
        if (two)
            for (const auto& [name, level] : block2) s[p.variable_position(name)] = level;
        return lp_at(p, ctx, s);
    };
    return with(true, true) + with(false, false) - with(true, false) - with(false, true);
}

double phi_extension_ratio(const TabularDistribution& p, const std::vector<std::string>& c,
                           const std::string& extra, std::span<const int> c_state, int extra_value,
                           std::span<const int> w_state, const ReferenceAssignment& ref) {
    if (std::find(c.begin(), c.end(), extra) != c.end())
        throw std::invalid_argument("phi extension: '" + extra + "' is already in the subset");
    check_subset_cap(c.size() + 1);
    const auto pos = positions_of(p, c);
    check_levels(p, pos, c_state);
    const auto xpos = p.variable_position(extra);
    if (extra_value < 0 || extra_value >= p.variables()[xpos].cardinality)
        throw std::out_of_range("phi extension: level out of range for '" + extra + "'");
    const std::size_t ctx = p.contexts().encode(w_state);
    const auto refs = ref.levels_for(p.variables());
    auto mobius = [&](int x) {
        double acc = 0;
        const std::size_t k = pos.size();
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
            auto state = refs;
            state[xpos] = x;
            for (std::size_t j = 0; j < k; ++j)
                if (mask >> j & 1U) state[pos[j]] = c_state[j];
            const double h = lp_at(p, ctx, state);
            acc += (k - static_cast<std::size_t>(std::popcount(mask))) % 2 == 0 ? h : -h;
        }
        return acc;
    };
    return mobius(extra_value) - mobius(refs[xpos]);
}

double ChenDecomposition::log_density(std::size_t context_index, std::span<const int> state) const {
    double s = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const int x = state[order[k]];
        s += univariate_terms[k].at(context_index, static_cast<std::size_t>(x));
    }
    for (std::size_t j = 0; j < or_terms.size(); ++j) {
        const auto& t = or_terms[j];
        const auto ss = t.subset_states();
        std::size_t idx = static_cast<std::size_t>(state[order[j + 1]]) * ss.stride(0);
        for (std::size_t i = 0; i <= j; ++i) idx += static_cast<std::size_t>(state[order[i]]) * ss.stride(i + 1);
        s += t.at(context_index, idx);
    }
    return s - log_Z[context_index];
}

ChenDecomposition chen_decompose(const TabularDistribution& p, const std::vector<std::string>& order,
                                 const ReferenceAssignment& ref) {
    if (!p.positive()) throw std::invalid_argument("decomposition requires a positive distribution");
    const std::size_t k = p.variables().size();
    if (order.size() != k) throw std::invalid_argument("order is not a permutation of the variables");
    const auto pos = positions_of(p, order);
    const auto refs = ref.levels_for(p.variables());

    ChenDecomposition out;
    out.variables = p.variables();
    out.context = p.context();
    out.order = pos;
    const std::size_t nctx = p.context_count();

    for (std::size_t j = 0; j < k; ++j) {
        FactorTerm t;
        t.kind = TermKind::univariate_conditional;
        t.subset = {p.variables()[pos[j]]};
        t.reference = {refs[pos[j]]};
        t.context = p.context();
        for (std::size_t c = 0; c < nctx; ++c) {
            auto row = reference_conditional(p, c, pos[j], refs);
            t.log_values.insert(t.log_values.end(), row.begin(), row.end());
        }
        out.univariate_terms.push_back(std::move(t));
    }

    for (std::size_t j = 1; j < k; ++j) {
        FactorTerm t;
        t.kind = TermKind::odds_ratio;
        std::vector<std::size_t> axes{pos[j]};
        for (std::size_t i = 0; i < j; ++i) axes.push_back(pos[i]);
        for (auto a : axes) {
            t.subset.push_back(p.variables()[a]);
            t.reference.push_back(refs[a]);
        }
        t.context = p.context();
        const auto ss = t.subset_states();
        std::vector<int> s(axes.size());
        for (std::size_t c = 0; c < nctx; ++c) {
            const double h_empty = lp_at(p, c, refs);
            for (std::size_t cell = 0; cell < ss.size(); ++cell) {
                ss.decode(cell, s);
                auto both = refs, first = refs, rest = refs;
                both[axes[0]] = first[axes[0]] = s[0];
                for (std::size_t i = 1; i < axes.size(); ++i) both[axes[i]] = rest[axes[i]] = s[i];
                t.log_values.push_back(lp_at(p, c, both) + h_empty - lp_at(p, c, first) - lp_at(p, c, rest));
            }
        }
        out.or_terms.push_back(std::move(t));
    }

    out.log_Z.assign(nctx, 0.0);
    out.log_Z_closed.assign(nctx, 0.0);
    std::vector<double> cells(p.state_count());
    std::vector<int> state(k);
    for (std::size_t c = 0; c < nctx; ++c) {
        double closed = -lp_at(p, c, refs);
        for (std::size_t j = 0; j < k; ++j)
            closed += out.univariate_terms[j].at(c, static_cast<std::size_t>(refs[pos[j]]));
        out.log_Z_closed[c] = closed;
        for (std::size_t s = 0; s < p.state_count(); ++s) {
            p.states().decode(s, state);
            cells[s] = out.log_density(c, state);  // log_Z is still 0 here
        }
        out.log_Z[c] = log_sum_exp(cells);
    }
    return out;
}

const FactorTerm* LCFactorization::find_phi(const std::vector<std::string>& names) const {
    auto want = names;
    std::sort(want.begin(), want.end());
    for (const auto& t : phi_terms) {
        auto have = t.names();
        std::sort(have.begin(), have.end());
        if (have == want) return &t;
    }
    return nullptr;
}

double LCFactorization::log_density(std::size_t context_index, std::span<const int> state) const {
    const auto bound = bind_all(variables, context, univariate_terms, phi_terms);
    const auto w = StateIndexer(context).decode(context_index);
    return sum_bound(bound, state, w) - log_Z[context_index];
}

std::vector<double> term_product_table(const std::vector<Variable>& variables, const std::vector<Variable>& context,
                                       const std::vector<FactorTerm>& univariate_terms,
                                       const std::vector<FactorTerm>& phi_terms) {
    const auto bound = bind_all(variables, context, univariate_terms, phi_terms);
    const StateIndexer vs(variables), ws(context);
    std::vector<double> out(vs.size() * ws.size());
    std::vector<int> v(variables.size()), w(context.size());
    for (std::size_t c = 0; c < ws.size(); ++c) {
        ws.decode(c, w);
        for (std::size_t s = 0; s < vs.size(); ++s) {
            vs.decode(s, v);
            out[c * vs.size() + s] = sum_bound(bound, v, w);
        }
    }
    return out;
}

LCFactorization lc_factorize(const TabularDistribution& p, const Graph& g, const ReferenceAssignment& ref,
                             const LCOptions& options) {
    if (!p.positive()) throw std::invalid_argument("decomposition requires a positive distribution");
    if (!g.is_cug())
        throw std::invalid_argument(
            "lc_factorize needs a conditional undirected graph (use the chain-graph factorization)");
    const auto rv = g.random_vertices();
    const auto fv = g.fixed_vertices();
    if (vertex_variables(g, rv) != p.variables() || vertex_variables(g, fv) != p.context())
        throw std::invalid_argument(
            "graph/distribution variable mismatch: the distribution must range over the graph's random "
            "vertices with its fixed vertices as context, in declaration order");
    if (count_cliques(g, settings().max_subsets) > settings().max_subsets)
        throw CapExceeded("max_subsets", settings().max_subsets, count_cliques(g, settings().max_subsets));
    const double tol = options.tol < 0 ? settings().tolerance : options.tol;

    // Graph index -> position in p.variables() / p.context().
    std::vector<std::size_t> vpos(g.size()), wpos(g.size());
    for (std::size_t i = 0; i < rv.size(); ++i) vpos[rv[i]] = i;
    for (std::size_t i = 0; i < fv.size(); ++i) wpos[fv[i]] = i;
    const auto vrefs = ref.levels_for(p.variables());
    const auto wrefs = ref.levels_for(p.context());

    // Context row with `scope` set from `scope_state` and every other fixed
    // coordinate at reference.
    auto context_row = [&](const VertexSet& scope, std::span<const int> scope_state) {
        auto w = wrefs;
        for (std::size_t j = 0; j < scope.size(); ++j) w[wpos[scope[j]]] = scope_state[j];
        return p.contexts().encode(w);
    };

    LCFactorization f;
    f.graph = g;
    f.reference = ref;
    f.variables = p.variables();
    f.context = p.context();

    for (auto v : rv) {
        const auto pa = g.parents(v);
        FactorTerm t;
        t.kind = TermKind::univariate_conditional;
        t.subset = {p.variables()[vpos[v]]};
        t.reference = {vrefs[vpos[v]]};
        t.context = vertex_variables(g, pa);
        const auto cs = t.context_states();
        std::vector<int> c_state(pa.size());
        for (std::size_t c = 0; c < cs.size(); ++c) {
            cs.decode(c, c_state);
            auto row = reference_conditional(p, context_row(pa, c_state), vpos[v], vrefs);
            t.log_values.insert(t.log_values.end(), row.begin(), row.end());
        }
        f.univariate_terms.push_back(std::move(t));
    }

    for (const auto& clique : enumerate_cliques(g, false).cliques) {
        if (clique.size() < 2) continue;
        const auto star = parents_intersection(g, clique);
        FactorTerm t;
        t.kind = TermKind::phi;
        std::vector<std::size_t> axes;
        for (auto v : clique) {
            axes.push_back(vpos[v]);
            t.subset.push_back(p.variables()[vpos[v]]);
            t.reference.push_back(vrefs[vpos[v]]);
        }
        t.context = vertex_variables(g, star);
        const auto cs = t.context_states();
        const std::size_t cells = t.cells();
        t.log_values.resize(cells * cs.size());
        std::vector<int> c_state(star.size());
        for (std::size_t c = 0; c < cs.size(); ++c) {
            cs.decode(c, c_state);
            kernels::mobius_phi(mobius_problem(p, context_row(star, c_state), vrefs, axes),
                                std::span<double>(t.log_values).subspan(c * cells, cells));
        }
        f.phi_terms.push_back(std::move(t));
    }

    const std::size_t nctx = p.context_count();
    f.log_phi_empty.resize(nctx);
    f.log_Z.resize(nctx);
    f.log_Z_direct.resize(nctx);
    for (std::size_t c = 0; c < nctx; ++c) {
        f.log_phi_empty[c] = lp_at(p, c, vrefs);
        double z = -f.log_phi_empty[c];
        for (std::size_t i = 0; i < p.variables().size(); ++i)
            z += reference_conditional(p, c, i, vrefs)[static_cast<std::size_t>(vrefs[i])];
        f.log_Z[c] = z;
    }

    auto& d = f.diagnostics;
    const auto table = term_product_table(f.variables, f.context, f.univariate_terms, f.phi_terms);
    const std::size_t ns = p.state_count();
    for (std::size_t c = 0; c < nctx; ++c) {
        const auto row = std::span<const double>(table).subspan(c * ns, ns);
        f.log_Z_direct[c] = log_sum_exp(row);
        d.z_gap = std::max(d.z_gap, std::abs(f.log_Z_direct[c] - f.log_Z[c]));
        for (std::size_t s = 0; s < ns; ++s)
            d.reconstruction_error =
                std::max(d.reconstruction_error, std::abs(row[s] - f.log_Z[c] - p.log_prob(c, s)));
    }

    d.nonclique_size_cap = std::min(options.diagnostic_max_size, rv.size());
    for (std::size_t size = 2; size <= d.nonclique_size_cap; ++size) {
        std::vector<VertexSet> subsets;
        for_each_combination(rv, size, [&](const VertexSet& s) {
            if (!is_clique(g, s)) subsets.push_back(s);
        });
        sort_canonical(g, subsets);
        for (const auto& s : subsets) {
            std::vector<std::size_t> axes;
            for (auto v : s) axes.push_back(vpos[v]);
            double worst = 0;
            for (std::size_t c = 0; c < nctx; ++c) {
                auto pr = mobius_problem(p, c, vrefs, axes);
                std::vector<double> out(kernels::mobius_cells(pr));
                kernels::mobius_phi(pr, out);
                for (double x : out) worst = std::max(worst, std::abs(x));
            }
            ++d.nonclique_checked;
            if (worst > tol) d.nonclique.push_back({g.names_of(s), worst});
        }
    }
    return f;
}

bool RestrictionReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const TermCheck& c) { return c.passed; });
}

std::vector<TermCheck> RestrictionReport::failures() const {
    std::vector<TermCheck> out;
    for (const auto& c : checks)
        if (!c.passed) out.push_back(c);
    return out;
}

RestrictionReport verify_terms(std::span<const FactorTerm> terms, double tol) {
    RestrictionReport report;
    for (const auto& t : terms) {
        const std::string label = t.label();
        bool finite = std::all_of(t.log_values.begin(), t.log_values.end(), [](double x) { return std::isfinite(x); });
        const std::size_t cells = t.cells();
        const bool shaped = t.reference.size() == t.subset.size() && cells > 0 &&
                            t.log_values.size() == cells * t.context_states().size();
        if (!shaped) {
            report.checks.push_back({label, "shape", false, std::numeric_limits<double>::infinity()});
            continue;
        }
        const std::size_t nctx = t.log_values.size() / cells;
        if (t.kind == TermKind::univariate_conditional) {
            double dev = 0;
            for (std::size_t c = 0; c < nctx; ++c) {
                double total = 0;
                for (std::size_t s = 0; s < cells; ++s) total += std::exp(t.at(c, s));
                dev = std::max(dev, std::abs(total - 1.0));
            }
            if (std::isnan(dev)) dev = std::numeric_limits<double>::infinity();
            report.checks.push_back({label, "normalized", dev <= tol, dev});
        } else {
            const auto ss = t.subset_states();
            std::vector<int> s(t.subset.size());
            double dev = 0;
            for (std::size_t c = 0; c < nctx; ++c)
                for (std::size_t cell = 0; cell < cells; ++cell) {
                    ss.decode(cell, s);
                    const bool pinned = t.kind == TermKind::phi ? any_at_reference(t, s) : or_at_reference(t, s);
                    if (pinned) dev = std::max(dev, std::abs(t.at(c, cell)));
                }
            if (std::isnan(dev)) dev = std::numeric_limits<double>::infinity();
            report.checks.push_back({label, "reference", dev <= tol, dev});
        }
        report.checks.push_back({label, "finite", finite, finite ? 0.0 : std::numeric_limits<double>::infinity()});
    }
    return report;
}

RestrictionReport verify_restrictions(const LCFactorization& f, double tol) {
    std::vector<FactorTerm> all = f.univariate_terms;
    all.insert(all.end(), f.phi_terms.begin(), f.phi_terms.end());
    return verify_terms(all, tol);
}

TabularDistribution compose_from_terms(const Graph& g, const std::vector<FactorTerm>& univariate_terms,
                                       const std::vector<FactorTerm>& phi_terms, const ReferenceAssignment& ref) {
    if (!g.is_cug()) throw std::invalid_argument("compose_from_terms needs a conditional undirected graph");
    const auto rv = g.random_vertices();
    const auto variables = vertex_variables(g, rv);
    const auto context = vertex_variables(g, g.fixed_vertices());

    std::vector<std::string> problems;
    auto contains_all = [&](const std::vector<Variable>& scope, const VertexSet& allowed) {
        for (const auto& v : scope) {
            if (!g.contains(v.name)) return false;
            auto i = g.index_of(v.name);
            if (std::find(allowed.begin(), allowed.end(), i) == allowed.end()) return false;
            if (g.vertex(i).cardinality != v.cardinality) return false;
        }
        return true;
    };
    auto references_match = [&](const FactorTerm& t) {
        if (t.reference.size() != t.subset.size()) return false;
        for (std::size_t j = 0; j < t.subset.size(); ++j)
            if (t.reference[j] != ref.level(t.subset[j].name)) return false;
        return true;
    };

    std::vector<int> seen(g.size(), 0);
    for (const auto& t : univariate_terms) {
        if (t.kind != TermKind::univariate_conditional || t.subset.size() != 1) {
            problems.push_back(t.label() + ": not a univariate conditional term");
            continue;
        }
        if (!contains_all(t.subset, rv)) {
            problems.push_back(t.label() + ": not a random vertex of the graph");
            continue;
        }
        const auto v = g.index_of(t.subset[0].name);
        if (seen[v]++) problems.push_back(t.label() + ": duplicate univariate term");
        if (!contains_all(t.context, g.parents(v))) problems.push_back(t.label() + ": context outside pa(v)");
        if (!references_match(t)) problems.push_back(t.label() + ": reference level differs from the assignment");
    }
    for (auto v : rv)
        if (!seen[v]) problems.push_back("cond " + g.name(v) + ": missing univariate term");

    std::set<VertexSet> cliques_seen;
    for (const auto& t : phi_terms) {
        if (t.kind != TermKind::phi || t.subset.size() < 2) {
            problems.push_back(t.label() + ": not an interaction term on two or more variables");
            continue;
        }
        if (!contains_all(t.subset, rv)) {
            problems.push_back(t.label() + ": subset outside the random vertices");
            continue;
        }
        VertexSet s;
        for (const auto& v : t.subset) s.push_back(g.index_of(v.name));
        std::sort(s.begin(), s.end());
        if (!is_clique(g, s)) problems.push_back(t.label() + ": not a clique of the graph");
        if (!cliques_seen.insert(s).second) problems.push_back(t.label() + ": duplicate interaction term");
        if (!contains_all(t.context, parents_intersection(g, s)))
            problems.push_back(t.label() + ": context outside the common parents");
        if (!references_match(t)) problems.push_back(t.label() + ": reference level differs from the assignment");
    }

    std::vector<FactorTerm> all = univariate_terms;
    all.insert(all.end(), phi_terms.begin(), phi_terms.end());
    for (const auto& c : verify_terms(all, settings().tolerance).failures()) {
        std::ostringstream os;
        os << c.term << ": " << c.check << " check failed (deviation " << c.deviation << ")";
        problems.push_back(os.str());
    }
    if (!problems.empty()) {
        std::string msg = "restriction violation";
        for (const auto& p : problems) msg += "\n  " + p;
        throw Error(msg);
    }

    auto table = term_product_table(variables, context, univariate_terms, phi_terms);
    const std::size_t ns = StateIndexer(variables).size();
    for (std::size_t c = 0; c * ns < table.size(); ++c) {
        auto row = std::span<double>(table).subspan(c * ns, ns);
        const double z = log_sum_exp(row);
        for (auto& x : row) x -= z;
    }
    return TabularDistribution(variables, context, std::move(table), true);
}

BivariateTerms bivariate_terms(const TabularDistribution& p, const ReferenceAssignment& ref) {
    if (p.variables().size() != 2) throw std::invalid_argument("bivariate_terms needs exactly two variables");
    BivariateTerms t;
    t.v1 = p.variables()[0];
    t.v2 = p.variables()[1];
    t.context = p.context();
    const auto refs = ref.levels_for(p.variables());
    t.ref1 = refs[0];
    t.ref2 = refs[1];
    const int k1 = t.v1.cardinality, k2 = t.v2.cardinality;
    auto lp = [&](std::size_t c, int a, int b) { return p.log_prob(c, static_cast<std::size_t>(a * k2 + b)); };
    for (std::size_t c = 0; c < p.context_count(); ++c) {
        auto u1 = reference_conditional(p, c, 0, refs);
        auto u2 = reference_conditional(p, c, 1, refs);
        t.log_univ1.insert(t.log_univ1.end(), u1.begin(), u1.end());
        t.log_univ2.insert(t.log_univ2.end(), u2.begin(), u2.end());
        for (int a = 0; a < k1; ++a)
            for (int b = 0; b < k2; ++b)
                t.log_or.push_back(lp(c, a, b) + lp(c, t.ref1, t.ref2) - lp(c, a, t.ref2) - lp(c, t.ref1, b));
    }
    return t;
}

namespace {

void normalize_log(std::vector<double>& xs) {
    const double z = log_sum_exp(xs);
    for (auto& x : xs) x -= z;
}

// log Σ_{v1} univ1(v1) OR(v1, v2), for each v2.
std::vector<double> or_weighted_mass(const BivariateTerms& t, std::size_t c) {
    const auto k1 = static_cast<std::size_t>(t.v1.cardinality), k2 = static_cast<std::size_t>(t.v2.cardinality);
    std::vector<double> out(k2), col(k1);
    for (std::size_t b = 0; b < k2; ++b) {
        for (std::size_t a = 0; a < k1; ++a) col[a] = t.log_univ1[c * k1 + a] + t.log_or[(c * k1 + a) * k2 + b];
        out[b] = log_sum_exp(col);
    }
    return out;
}

void check_context(const BivariateTerms& t, std::size_t c) {
    if (c >= StateIndexer(t.context).size()) throw std::out_of_range("context index out of range");
}

} // namespace

std::vector<double> reconstruct_conditional(const BivariateTerms& t, int v2, std::size_t c) {
    check_context(t, c);
    if (v2 < 0 || v2 >= t.v2.cardinality) throw std::out_of_range("level out of range for '" + t.v2.name + "'");
    const auto k1 = static_cast<std::size_t>(t.v1.cardinality), k2 = static_cast<std::size_t>(t.v2.cardinality);
    std::vector<double> out(k1);
    for (std::size_t a = 0; a < k1; ++a)
        out[a] = t.log_univ1[c * k1 + a] + t.log_or[(c * k1 + a) * k2 + static_cast<std::size_t>(v2)];
    normalize_log(out);
    return out;
}

std::vector<double> reconstruct_marginal(const BivariateTerms& t, std::size_t c) {
    check_context(t, c);
    const auto k2 = static_cast<std::size_t>(t.v2.cardinality);
    auto out = or_weighted_mass(t, c);
    for (std::size_t b = 0; b < k2; ++b) out[b] += t.log_univ2[c * k2 + b];
    normalize_log(out);
    return out;
}

std::vector<double> reference_conditional_from_marginal(const BivariateTerms& t, std::span<const double> log_marginal2,
                                                        std::size_t c) {
    check_context(t, c);
    const auto k2 = static_cast<std::size_t>(t.v2.cardinality);
    if (log_marginal2.size() != k2) throw std::invalid_argument("marginal has wrong length");
    auto mass = or_weighted_mass(t, c);
    std::vector<double> out(k2);
    for (std::size_t b = 0; b < k2; ++b) out[b] = log_marginal2[b] - mass[b];
    normalize_log(out);
    return out;
}

} // namespace lcf
