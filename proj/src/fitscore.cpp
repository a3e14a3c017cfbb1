#include "lcf/fitscore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lcf/kernels.hpp"
#include "lcf/settings.hpp"

namespace lcf {

namespace {

std::vector<Variable> vertex_variables(const Graph& g, const VertexSet& s) {
    std::vector<Variable> out;
    for (auto v : s) out.push_back({g.name(v), g.vertex(v).cardinality});
    return out;
}

VertexSet common_parents(const Graph& g, const VertexSet& c) {
    VertexSet acc = g.parents(c.front());
    for (std::size_t i = 1; i < c.size(); ++i) {
        VertexSet next, pa = g.parents(c[i]);
        std::set_intersection(acc.begin(), acc.end(), pa.begin(), pa.end(), std::back_inserter(next));
        acc = std::move(next);
    }
    return acc;
}

std::size_t non_reference_cells(const std::vector<Variable>& vars) {
    std::size_t n = 1;
    for (const auto& v : vars) n *= static_cast<std::size_t>(v.cardinality - 1);
    return n;
}

std::size_t context_cells(const std::vector<Variable>& vars) { return StateIndexer(vars).size(); }

std::size_t block_size(const ModelParams& m, const ParamBlock& b, bool interaction) {
    if (interaction && m.family == Family::transformed_linear) return 1;
    return context_cells(b.context) * non_reference_cells(b.subset);
}

// Index of a state among the non-reference combinations, or npos if some
// coordinate sits at reference.
constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

std::size_t combo_index(const std::vector<Variable>& vars, const std::vector<int>& refs, std::span<const int> s) {
    std::size_t idx = 0;
    for (std::size_t j = 0; j < vars.size(); ++j) {
        if (s[j] == refs[j]) return npos;
        const int rank = s[j] < refs[j] ? s[j] : s[j] - 1;
        idx = idx * static_cast<std::size_t>(vars[j].cardinality - 1) + static_cast<std::size_t>(rank);
    }
    return idx;
}

std::vector<int> refs_of(const ModelParams& m, const std::vector<Variable>& vars) {
    return m.reference.levels_for(vars);
}

void check_shapes(const ModelParams& m) {
    for (const auto& b : m.univariate)
        if (b.values.size() != block_size(m, b, false))
            throw std::invalid_argument("parameter block cond " + b.subset.at(0).name + " has wrong size");
    for (const auto& b : m.interactions)
        if (b.values.size() != block_size(m, b, true)) {
            std::vector<std::string> n;
            for (const auto& v : b.subset) n.push_back(v.name);
            throw std::invalid_argument("parameter block phi " + brace_names(n) + " has wrong size");
        }
    if (m.family == Family::transformed_linear) {
        const auto rv = m.graph.random_vertices();
        if (m.scores.size() != rv.size()) throw std::invalid_argument("score functions missing");
        for (std::size_t i = 0; i < rv.size(); ++i)
            if (m.scores[i].size() != static_cast<std::size_t>(m.graph.vertex(rv[i]).cardinality))
                throw std::invalid_argument("score function for '" + m.graph.name(rv[i]) + "' has wrong length");
    }
}

// Log φ of interaction block b at a subset state (transformed-linear family).
double tlor_value(const ModelParams& m, const ParamBlock& b, const std::vector<int>& refs, std::span<const int> s) {
    std::vector<double> at, base;
    const auto rv = m.graph.random_vertices();
    for (std::size_t j = 0; j < b.subset.size(); ++j) {
        const auto v = m.graph.index_of(b.subset[j].name);
        const auto k = static_cast<std::size_t>(std::find(rv.begin(), rv.end(), v) - rv.begin());
        at.push_back(m.scores[k][static_cast<std::size_t>(s[j])]);
        base.push_back(m.scores[k][static_cast<std::size_t>(refs[j])]);
    }
    return transformed_linear_phi(b.values.at(0), at, base);
}

// Sufficient-statistic design over (full context, state) rows.
struct Design {
    std::vector<Variable> variables, context;
    kernels::CsrMatrix x;
    std::size_t states = 0, contexts = 0;
};

Design build_design(const ModelParams& m) {
    check_shapes(m);
    const Graph& g = m.graph;
    Design d;
    d.variables = vertex_variables(g, g.random_vertices());
    d.context = vertex_variables(g, g.fixed_vertices());
    const StateIndexer vs(d.variables), ws(d.context);
    d.states = vs.size();
    d.contexts = ws.size();
    d.x.cols = param_count(m);

    struct Wiring {
        std::vector<std::size_t> vpos, wpos, wstride;
        std::vector<int> refs;
        std::size_t offset = 0, width = 0;
        const ParamBlock* block = nullptr;
        bool interaction = false;
    };
    auto pos_in = [](const std::vector<Variable>& vars, const std::string& name) {
        for (std::size_t i = 0; i < vars.size(); ++i)
            if (vars[i].name == name) return i;
        throw std::invalid_argument("unknown variable '" + name + "' in parameters");
    };
    std::vector<Wiring> wiring;
    std::size_t offset = 0;
    auto wire = [&](const ParamBlock& b, bool interaction) {
        Wiring w;
        w.block = &b;
        w.interaction = interaction;
        for (const auto& v : b.subset) w.vpos.push_back(pos_in(d.variables, v.name));
        const StateIndexer cs(b.context);
        for (std::size_t j = 0; j < b.context.size(); ++j) {
            w.wpos.push_back(pos_in(d.context, b.context[j].name));
            w.wstride.push_back(cs.stride(j));
        }
        w.refs = refs_of(m, b.subset);
        w.offset = offset;
        w.width = non_reference_cells(b.subset);
        offset += block_size(m, b, interaction);
        wiring.push_back(std::move(w));
    };
    for (const auto& b : m.univariate) wire(b, false);
    for (const auto& b : m.interactions) wire(b, true);

    std::vector<int> v(d.variables.size()), w(d.context.size()), sub;
    for (std::size_t c = 0; c < d.contexts; ++c) {
        ws.decode(c, w);
        for (std::size_t s = 0; s < d.states; ++s) {
            vs.decode(s, v);
            for (const auto& wi : wiring) {
                sub.clear();
                for (auto p : wi.vpos) sub.push_back(v[p]);
                const std::size_t combo = combo_index(wi.block->subset, wi.refs, sub);
                if (combo == npos) continue;
                if (wi.interaction && m.family == Family::transformed_linear) {
                    const double x = tlor_value(m, ParamBlock{wi.block->subset, {}, {1.0}}, wi.refs, sub);
                    if (x != 0.0) d.x.push(wi.offset, x);
                    continue;
                }
                std::size_t ci = 0;
                for (std::size_t j = 0; j < wi.wpos.size(); ++j)
                    ci += static_cast<std::size_t>(w[wi.wpos[j]]) * wi.wstride[j];
                d.x.push(wi.offset + ci * wi.width + combo, 1.0);
            }
            d.x.end_row();
        }
    }
    return d;
}

// Weighted cell counts over (full context, state) rows.
std::vector<double> cell_counts(const Design& d, const SampleSet& data, double pseudo_count) {
    std::vector<Variable> all = d.variables;
    all.insert(all.end(), d.context.begin(), d.context.end());
    data.validate(all);
    if (data.size() == 0 && pseudo_count <= 0) throw std::invalid_argument("empty sample set");
    std::vector<std::size_t> vcol, wcol;
    for (const auto& v : d.variables) vcol.push_back(data.column(v.name));
    for (const auto& v : d.context) wcol.push_back(data.column(v.name));
    const StateIndexer vs(d.variables), ws(d.context);
    std::vector<double> counts(d.states * d.contexts, pseudo_count);
    std::vector<int> v(vcol.size()), w(wcol.size());
    for (std::size_t r = 0; r < data.size(); ++r) {
        for (std::size_t i = 0; i < vcol.size(); ++i) v[i] = data.rows[r][vcol[i]];
        for (std::size_t i = 0; i < wcol.size(); ++i) w[i] = data.rows[r][wcol[i]];
        counts[ws.encode(w) * d.states + vs.encode(v)] += data.weight(r);
    }
    return counts;
}

// Objective pieces shared by loglik_and_gradient and the optimizer.
struct Objective {
    const Design& d;
    const std::vector<double>& counts;
    std::vector<double> context_total;
    double n = 0;

    Objective(const Design& design, const std::vector<double>& c) : d(design), counts(c) {
        context_total.assign(d.contexts, 0.0);
        for (std::size_t ctx = 0; ctx < d.contexts; ++ctx)
            for (std::size_t s = 0; s < d.states; ++s) context_total[ctx] += counts[ctx * d.states + s];
        for (double t : context_total) n += t;
    }

    // Total log-likelihood; fills the per-row log probabilities.
    double value(std::span<const double> theta, std::vector<double>& logp) const {
        logp.assign(d.x.rows, 0.0);
        kernels::linear_predictor(d.x, theta, logp);
        double ll = 0;
        for (std::size_t ctx = 0; ctx < d.contexts; ++ctx) {
            auto row = std::span<double>(logp).subspan(ctx * d.states, d.states);
            const double z = kernels::log_sum_exp(row);
            for (std::size_t s = 0; s < d.states; ++s) {
                row[s] -= z;
                const double c = counts[ctx * d.states + s];
                if (c != 0.0) ll += c * row[s];
            }
        }
        return ll;
    }

    std::vector<double> mean_gradient(const std::vector<double>& logp) const {
        std::vector<double> resid(d.x.rows), grad(d.x.cols);
        for (std::size_t ctx = 0; ctx < d.contexts; ++ctx)
            for (std::size_t s = 0; s < d.states; ++s) {
                const std::size_t r = ctx * d.states + s;
                resid[r] = (counts[r] - context_total[ctx] * std::exp(logp[r])) / n;
            }
        kernels::weighted_feature_sum(d.x, resid, grad);
        return grad;
    }
};

double max_abs(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

} // namespace

ModelParams make_params(const Graph& g, Family family, const ReferenceAssignment& ref) {
    if (!g.is_cug()) throw std::invalid_argument("parameters need a conditional undirected graph");
    ModelParams m;
    m.graph = g;
    m.reference = ref;
    m.family = family;
    for (auto v : g.random_vertices()) {
        ParamBlock b;
        b.subset = vertex_variables(g, {v});
        b.context = vertex_variables(g, g.parents(v));
        b.values.assign(block_size(m, b, false), 0.0);
        m.univariate.push_back(std::move(b));
        std::vector<double> s(static_cast<std::size_t>(g.vertex(v).cardinality));
        for (std::size_t l = 0; l < s.size(); ++l) s[l] = static_cast<double>(l);
        m.scores.push_back(std::move(s));
    }
    for (const auto& c : enumerate_cliques(g, false).cliques) {
        if (c.size() < 2) continue;
        ParamBlock b;
        b.subset = vertex_variables(g, c);
        if (family == Family::free) b.context = vertex_variables(g, common_parents(g, c));
        b.values.assign(block_size(m, b, true), 0.0);
        m.interactions.push_back(std::move(b));
    }
    // Reference levels must be valid for every vertex.
    (void)ref.levels_for(vertex_variables(g, g.random_vertices()));
    return m;
}

std::size_t param_count(const ModelParams& m) {
    std::size_t n = 0;
    for (const auto& b : m.univariate) n += block_size(m, b, false);
    for (const auto& b : m.interactions) n += block_size(m, b, true);
    return n;
}

std::vector<double> flatten(const ModelParams& m) {
    std::vector<double> out;
    for (const auto& b : m.univariate) out.insert(out.end(), b.values.begin(), b.values.end());
    for (const auto& b : m.interactions) out.insert(out.end(), b.values.begin(), b.values.end());
    return out;
}

void assign(ModelParams& m, std::span<const double> theta) {
    if (theta.size() != param_count(m)) throw std::invalid_argument("parameter vector has wrong length");
    std::size_t at = 0;
    auto fill = [&](ParamBlock& b, bool interaction) {
        b.values.assign(theta.begin() + static_cast<std::ptrdiff_t>(at),
                        theta.begin() + static_cast<std::ptrdiff_t>(at + block_size(m, b, interaction)));
        at += b.values.size();
    };
    for (auto& b : m.univariate) fill(b, false);
    for (auto& b : m.interactions) fill(b, true);
}

std::vector<FactorTerm> univariate_terms(const ModelParams& m) {
    check_shapes(m);
    std::vector<FactorTerm> out;
    for (const auto& b : m.univariate) {
        FactorTerm t;
        t.kind = TermKind::univariate_conditional;
        t.subset = b.subset;
        t.reference = refs_of(m, b.subset);
        t.context = b.context;
        const int k = b.subset[0].cardinality, r = t.reference[0];
        const std::size_t nctx = context_cells(b.context);
        std::vector<double> row(static_cast<std::size_t>(k));
        for (std::size_t c = 0; c < nctx; ++c) {
            for (int l = 0; l < k; ++l)
                row[static_cast<std::size_t>(l)] =
                    l == r ? 0.0 : b.values[c * static_cast<std::size_t>(k - 1) + static_cast<std::size_t>(l < r ? l : l - 1)];
            const double z = log_sum_exp(row);
            for (double x : row) t.log_values.push_back(x - z);
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<FactorTerm> phi_terms(const ModelParams& m) {
    check_shapes(m);
    std::vector<FactorTerm> out;
    for (const auto& b : m.interactions) {
        FactorTerm t;
        t.kind = TermKind::phi;
        t.subset = b.subset;
        t.reference = refs_of(m, b.subset);
        t.context = b.context;
        const auto ss = t.subset_states();
        const std::size_t nctx = context_cells(b.context), width = non_reference_cells(b.subset);
        std::vector<int> s(b.subset.size());
        for (std::size_t c = 0; c < nctx; ++c)
            for (std::size_t cell = 0; cell < ss.size(); ++cell) {
                ss.decode(cell, s);
                const std::size_t combo = combo_index(b.subset, t.reference, s);
                if (combo == npos)
                    t.log_values.push_back(0.0);
                else if (m.family == Family::transformed_linear)
                    t.log_values.push_back(tlor_value(m, b, t.reference, s));
                else
                    t.log_values.push_back(b.values[c * width + combo]);
            }
        out.push_back(std::move(t));
    }
    return out;
}

TabularDistribution params_to_distribution(const ModelParams& m) {
    return compose_from_terms(m.graph, univariate_terms(m), phi_terms(m), m.reference);
}

ModelParams params_from_factorization(const LCFactorization& f) {
    ModelParams m = make_params(f.graph, Family::free, f.reference);
    for (std::size_t i = 0; i < m.univariate.size(); ++i) {
        auto& b = m.univariate[i];
        const auto& t = f.univariate_terms.at(i);
        if (t.subset != b.subset || t.context != b.context)
            throw std::invalid_argument("factorization does not match the graph: " + t.label());
        const int k = b.subset[0].cardinality, r = t.reference[0];
        std::size_t at = 0;
        for (std::size_t c = 0; c < context_cells(b.context); ++c)
            for (int l = 0; l < k; ++l)
                if (l != r) b.values[at++] = t.at(c, static_cast<std::size_t>(l)) - t.at(c, static_cast<std::size_t>(r));
    }
    for (auto& b : m.interactions) {
        std::vector<std::string> names;
        for (const auto& v : b.subset) names.push_back(v.name);
        const FactorTerm* t = f.find_phi(names);
        if (!t || t->subset != b.subset || t->context != b.context)
            throw std::invalid_argument("factorization does not match the graph: phi " + brace_names(names));
        const auto ss = t->subset_states();
        std::vector<int> s(b.subset.size());
        const std::size_t width = non_reference_cells(b.subset);
        for (std::size_t c = 0; c < context_cells(b.context); ++c)
            for (std::size_t cell = 0; cell < ss.size(); ++cell) {
                ss.decode(cell, s);
                const std::size_t combo = combo_index(b.subset, t->reference, s);
                if (combo != npos) b.values[c * width + combo] = t->at(c, cell);
            }
    }
    return m;
}

double transformed_linear_phi(double gamma, std::span<const double> state_scores, std::span<const double> ref_scores) {
    if (state_scores.size() != ref_scores.size()) throw std::invalid_argument("score vectors differ in length");
    double prod = gamma;
    for (std::size_t i = 0; i < state_scores.size(); ++i) prod *= state_scores[i] - ref_scores[i];
    return prod;
}

LogLikelihood loglik_and_gradient(const ModelParams& m, const SampleSet& data, double pseudo_count) {
    const Design d = build_design(m);
    const auto counts = cell_counts(d, data, pseudo_count);
    const Objective obj(d, counts);
    const auto theta = flatten(m);
    std::vector<double> logp;
    LogLikelihood out;
    out.loglik = obj.value(theta, logp);
    out.gradient = obj.mean_gradient(logp);
    out.n = obj.n;
    return out;
}

FitResult fit_mle(const Graph& g, const SampleSet& data, const FitOptions& options) {
    FitResult res;
    res.params = make_params(g, options.family, options.reference);
    if (!options.scores.empty()) res.params.scores = options.scores;
    if (!options.init.empty()) assign(res.params, options.init);

    const Design d = build_design(res.params);
    const auto counts = cell_counts(d, data, options.pseudo_count);
    const Objective obj(d, counts);
    if (!(obj.n > 0)) throw std::invalid_argument("empty sample set");

    std::vector<double> theta = flatten(res.params), logp;
    double ll = obj.value(theta, logp);
    std::vector<double> grad = obj.mean_gradient(logp);
    res.trace.push_back(ll);

    constexpr double armijo = 1e-4;
    std::vector<double> prev_theta, prev_grad, trial(theta.size()), trial_logp;
    double step = 1.0;
    for (res.iterations = 0; res.iterations < options.max_iter; ++res.iterations) {
        if (max_abs(grad) <= options.tol) {
            res.converged = true;
            break;
        }
        if (!prev_theta.empty()) {
            double ss = 0, sy = 0;
            for (std::size_t i = 0; i < theta.size(); ++i) {
                const double s = theta[i] - prev_theta[i], y = grad[i] - prev_grad[i];
                ss += s * s;
                sy += s * y;
            }
            step = sy < 0 ? ss / -sy : 2 * step;
        }
        double g2 = 0;
        for (double x : grad) g2 += x * x;
        const double mean_ll = ll / obj.n;
        bool accepted = false;
        double trial_ll = ll;
        for (int halvings = 0; halvings < 80; ++halvings, step *= 0.5) {
            for (std::size_t i = 0; i < theta.size(); ++i) trial[i] = theta[i] + step * grad[i];
            trial_ll = obj.value(trial, trial_logp);
            if (std::isfinite(trial_ll) && trial_ll / obj.n >= mean_ll + armijo * step * g2 && trial_ll >= ll) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;  // no ascent possible at working precision
        prev_theta = theta;
        prev_grad = grad;
        theta = trial;
        logp.swap(trial_logp);
        ll = trial_ll;
        grad = obj.mean_gradient(logp);
        res.trace.push_back(ll);
    }
    if (!res.converged && max_abs(grad) <= options.tol) res.converged = true;
    assign(res.params, theta);
    res.grad_norm = max_abs(grad);
    res.loglik = ll;
    return res;
}

} // namespace lcf
