#include "lcf/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "lcf/kernels.hpp"

namespace lcf {

namespace {

std::vector<int> cards_of(const std::vector<Variable>& vars) {
    std::vector<int> c;
    for (const auto& v : vars) c.push_back(v.cardinality);
    return c;
}

std::size_t position_in(const std::vector<Variable>& vars, const std::string& name, const char* what) {
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i].name == name) return i;
    throw std::invalid_argument(std::string("unknown ") + what + " '" + name + "'");
}

void check_unique_names(const std::vector<Variable>& vars, const std::vector<Variable>& ctx) {
    std::vector<std::string> names;
    for (const auto& v : vars) names.push_back(v.name);
    for (const auto& v : ctx) names.push_back(v.name);
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end())
        throw std::invalid_argument("duplicate variable name in distribution");
}

} // namespace

StateIndexer::StateIndexer(std::vector<int> cardinalities) : cards_(std::move(cardinalities)) {
    strides_.assign(cards_.size(), 1);
    size_ = 1;
    for (std::size_t i = cards_.size(); i-- > 0;) {
        if (cards_[i] < 1) throw std::invalid_argument("cardinality must be positive");
        strides_[i] = size_;
        size_ *= static_cast<std::size_t>(cards_[i]);
    }
}

StateIndexer::StateIndexer(const std::vector<Variable>& vars) : StateIndexer(cards_of(vars)) {}

std::size_t StateIndexer::encode(std::span<const int> state) const {
    if (state.size() != cards_.size()) throw std::out_of_range("state has wrong length");
    std::size_t index = 0;
    for (std::size_t i = 0; i < cards_.size(); ++i) {
        if (state[i] < 0 || state[i] >= cards_[i]) throw std::out_of_range("state index out of bounds");
        index += static_cast<std::size_t>(state[i]) * strides_[i];
    }
    return index;
}

void StateIndexer::decode(std::size_t index, std::span<int> state) const {
    for (std::size_t i = 0; i < cards_.size(); ++i) {
        state[i] = static_cast<int>(index / strides_[i]);
        index %= strides_[i];
    }
}

std::vector<int> StateIndexer::decode(std::size_t index) const {
    std::vector<int> s(cards_.size());
    decode(index, s);
    return s;
}

double log_sum_exp(std::span<const double> xs) { return kernels::log_sum_exp(xs); }

TabularDistribution::TabularDistribution(std::vector<Variable> variables, std::vector<Variable> context,
                                         std::vector<double> log_table, bool positive)
    : vars_(std::move(variables)),
      ctx_(std::move(context)),
      states_(vars_),
      contexts_(ctx_),
      log_table_(std::move(log_table)),
      positive_(positive) {
    check_unique_names(vars_, ctx_);
    if (log_table_.size() != states_.size() * contexts_.size())
        throw std::invalid_argument("log table has " + std::to_string(log_table_.size()) +
                                    " entries, expected " +
                                    std::to_string(states_.size() * contexts_.size()));
    const double floor = std::log(positivity_floor);
    for (std::size_t c = 0; c < contexts_.size(); ++c) {
        auto r = row(c);
        for (double x : r) {
            if (std::isnan(x) || x > 1e-12) throw std::invalid_argument("invalid log probability");
            if (positive_ && !(x > floor))
                throw std::invalid_argument("distribution is not positive (entry below 1e-12)");
        }
        double total = 0;
        for (double x : r) total += std::exp(x);
        if (std::abs(total - 1.0) > 1e-9)
            throw std::invalid_argument("context " + std::to_string(c) + " sums to " +
                                        std::to_string(total) + ", not 1");
    }
}

TabularDistribution TabularDistribution::from_probabilities(std::vector<Variable> variables,
                                                            std::vector<Variable> context,
                                                            const std::vector<double>& probabilities,
                                                            bool positive) {
    std::vector<double> logs;
    logs.reserve(probabilities.size());
    for (double p : probabilities) {
        if (p < 0) throw std::invalid_argument("negative probability");
        logs.push_back(std::log(p));
    }
    return TabularDistribution(std::move(variables), std::move(context), std::move(logs), positive);
}

double TabularDistribution::evaluate(std::span<const int> v_state, std::span<const int> w_state) const {
    return log_prob(contexts_.encode(w_state), states_.encode(v_state));
}

std::size_t TabularDistribution::variable_position(const std::string& name) const {
    return position_in(vars_, name, "variable");
}

std::size_t TabularDistribution::context_position(const std::string& name) const {
    return position_in(ctx_, name, "context variable");
}

bool TabularDistribution::has_variable(const std::string& name) const {
    return std::any_of(vars_.begin(), vars_.end(), [&](const Variable& v) { return v.name == name; });
}

bool TabularDistribution::has_context(const std::string& name) const {
    return std::any_of(ctx_.begin(), ctx_.end(), [&](const Variable& v) { return v.name == name; });
}

std::vector<int> ReferenceAssignment::levels_for(const std::vector<Variable>& vars) const {
    std::vector<int> out;
    for (const auto& v : vars) {
        int l = level(v.name);
        if (l < 0 || l >= v.cardinality)
            throw std::invalid_argument("reference level " + std::to_string(l) + " out of range for '" +
                                        v.name + "'");
        out.push_back(l);
    }
    return out;
}

double SampleSet::total_weight() const {
    if (weights.empty()) return static_cast<double>(rows.size());
    double t = 0;
    for (double w : weights) t += w;
    return t;
}

std::size_t SampleSet::column(const std::string& name) const {
    auto it = std::find(variables.begin(), variables.end(), name);
    if (it == variables.end()) throw std::invalid_argument("samples have no column '" + name + "'");
    return static_cast<std::size_t>(it - variables.begin());
}

void SampleSet::validate(const std::vector<Variable>& vars) const {
    if (!weights.empty() && weights.size() != rows.size())
        throw std::invalid_argument("sample weights do not match row count");
    for (double w : weights)
        if (!(w > 0) || !std::isfinite(w)) throw std::invalid_argument("sample weights must be positive");
    std::vector<std::size_t> cols;
    for (const auto& v : vars) cols.push_back(column(v.name));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != variables.size())
            throw std::invalid_argument("sample row " + std::to_string(r) + " has wrong length");
        for (std::size_t i = 0; i < vars.size(); ++i) {
            int x = rows[r][cols[i]];
            if (x < 0 || x >= vars[i].cardinality)
                throw std::invalid_argument("sample row " + std::to_string(r) + ": level " +
                                            std::to_string(x) + " out of range for '" + vars[i].name + "'");
        }
    }
}

TabularDistribution marginalize(const TabularDistribution& p, const std::vector<std::string>& keep) {
    std::vector<bool> kept(p.variables().size(), false);
    for (const auto& n : keep) kept[p.variable_position(n)] = true;

    std::vector<Variable> out_vars;
    for (std::size_t i = 0; i < kept.size(); ++i)
        if (kept[i]) out_vars.push_back(p.variables()[i]);
    const StateIndexer out_states(out_vars);

    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> buckets(out_states.size());
    std::vector<double> out(out_states.size() * p.context_count(), neg_inf);
    std::vector<int> full(p.variables().size()), part;
    for (std::size_t c = 0; c < p.context_count(); ++c) {
        for (auto& b : buckets) b.clear();
        for (std::size_t s = 0; s < p.state_count(); ++s) {
            p.states().decode(s, full);
            part.clear();
            for (std::size_t i = 0; i < full.size(); ++i)
                if (kept[i]) part.push_back(full[i]);
            buckets[out_states.encode(part)].push_back(p.log_prob(c, s));
        }
        for (std::size_t t = 0; t < out_states.size(); ++t)
            out[c * out_states.size() + t] = log_sum_exp(buckets[t]);
    }
    return TabularDistribution(std::move(out_vars), p.context(), std::move(out), p.positive());
}

TabularDistribution condition_on(const TabularDistribution& p,
                                 const std::vector<std::pair<std::string, int>>& fix) {
    std::vector<int> pinned(p.variables().size(), -1);
    for (const auto& [name, level] : fix) {
        auto i = p.variable_position(name);
        if (level < 0 || level >= p.variables()[i].cardinality)
            throw std::out_of_range("conditioning level out of range for '" + name + "'");
        pinned[i] = level;
    }
    std::vector<Variable> out_vars;
    for (std::size_t i = 0; i < pinned.size(); ++i)
        if (pinned[i] < 0) out_vars.push_back(p.variables()[i]);
    const StateIndexer out_states(out_vars);

    std::vector<double> out(out_states.size() * p.context_count());
    std::vector<int> full(p.variables().size());
    for (std::size_t c = 0; c < p.context_count(); ++c) {
        std::vector<double> slice;
        for (std::size_t s = 0; s < p.state_count(); ++s) {
            p.states().decode(s, full);
            bool match = true;
            for (std::size_t i = 0; i < full.size(); ++i)
                if (pinned[i] >= 0 && full[i] != pinned[i]) match = false;
            if (match) slice.push_back(p.log_prob(c, s));
        }
        const double norm = log_sum_exp(slice);
        if (!std::isfinite(norm)) throw std::domain_error("conditioning on a zero-probability event");
        for (std::size_t t = 0; t < slice.size(); ++t) out[c * out_states.size() + t] = slice[t] - norm;
    }
    return TabularDistribution(std::move(out_vars), p.context(), std::move(out), p.positive());
}

TabularDistribution to_conditional(const TabularDistribution& joint, const std::vector<std::string>& target,
                                   const std::vector<std::string>& given) {
    if (!joint.context().empty())
        throw std::invalid_argument("to_conditional expects a joint table without context");
    std::vector<std::size_t> tpos, gpos;
    std::vector<Variable> tvars, gvars;
    std::vector<bool> used(joint.variables().size(), false);
    auto take = [&](const std::string& n, std::vector<std::size_t>& pos, std::vector<Variable>& vars) {
        auto i = joint.variable_position(n);
        if (used[i]) throw std::invalid_argument("variable '" + n + "' listed twice");
        used[i] = true;
        pos.push_back(i);
        vars.push_back(joint.variables()[i]);
    };
    for (const auto& n : target) take(n, tpos, tvars);
    for (const auto& n : given) take(n, gpos, gvars);

    const StateIndexer ts(tvars), gs(gvars);
    std::vector<std::vector<double>> cells(ts.size() * gs.size());
    std::vector<int> full(joint.variables().size()), tpart(tpos.size()), gpart(gpos.size());
    for (std::size_t s = 0; s < joint.state_count(); ++s) {
        joint.states().decode(s, full);
        for (std::size_t i = 0; i < tpos.size(); ++i) tpart[i] = full[tpos[i]];
        for (std::size_t i = 0; i < gpos.size(); ++i) gpart[i] = full[gpos[i]];
        cells[gs.encode(gpart) * ts.size() + ts.encode(tpart)].push_back(joint.log_prob(0, s));
    }
    std::vector<double> out(cells.size());
    for (std::size_t c = 0; c < gs.size(); ++c) {
        std::vector<double> row(ts.size());
        for (std::size_t t = 0; t < ts.size(); ++t) row[t] = log_sum_exp(cells[c * ts.size() + t]);
        const double norm = log_sum_exp(row);
        if (!std::isfinite(norm)) throw std::domain_error("conditioning on a zero-probability event");
        for (std::size_t t = 0; t < ts.size(); ++t) out[c * ts.size() + t] = row[t] - norm;
    }
    return TabularDistribution(std::move(tvars), std::move(gvars), std::move(out), joint.positive());
}

double ci_deviation(const TabularDistribution& p, const std::vector<std::string>& a,
                    const std::vector<std::string>& b, const std::vector<std::string>& c) {
    enum Role : int { none = 0, in_a, in_b, in_c };
    std::vector<int> vrole(p.variables().size(), none), wrole(p.context().size(), none);
    auto assign = [&](const std::vector<std::string>& names, Role r) {
        for (const auto& n : names) {
            int* slot;
            if (p.has_variable(n))
                slot = &vrole[p.variable_position(n)];
            else if (r != in_a && p.has_context(n))
                slot = &wrole[p.context_position(n)];
            else
                throw std::invalid_argument("ci query: unknown variable '" + n + "'");
            if (*slot != none) throw std::invalid_argument("ci query: sets must be disjoint");
            *slot = r;
        }
    };
    assign(a, in_a);
    assign(b, in_b);
    assign(c, in_c);
    if (a.empty()) return 0.0;

    // Axes of the three keys, each in declaration order.
    std::vector<int> acards, ccards, bcards;
    for (std::size_t i = 0; i < vrole.size(); ++i) {
        if (vrole[i] == in_a) acards.push_back(p.variables()[i].cardinality);
        if (vrole[i] == in_b) bcards.push_back(p.variables()[i].cardinality);
        if (vrole[i] == in_c) ccards.push_back(p.variables()[i].cardinality);
    }
    const StateIndexer as(acards), bs(bcards), cs(ccards);
    const std::size_t na = as.size(), nb = bs.size(), nc = cs.size();

    // q[w][a][b][c], summed over the remaining variables.
    const std::size_t nw = p.context_count();
    std::vector<double> q(nw * na * nb * nc, 0.0);
    std::vector<int> full(p.variables().size()), ak, bk, ck;
    for (std::size_t s = 0; s < p.state_count(); ++s) {
        p.states().decode(s, full);
        ak.clear();
        bk.clear();
        ck.clear();
        for (std::size_t i = 0; i < full.size(); ++i) {
            if (vrole[i] == in_a) ak.push_back(full[i]);
            if (vrole[i] == in_b) bk.push_back(full[i]);
            if (vrole[i] == in_c) ck.push_back(full[i]);
        }
        const std::size_t cell = (as.encode(ak) * nb + bs.encode(bk)) * nc + cs.encode(ck);
        for (std::size_t w = 0; w < nw; ++w) q[w * na * nb * nc + cell] += std::exp(p.log_prob(w, s));
    }

    std::vector<int> wstate(p.context().size());
    double worst = 0;
    for (std::size_t w = 0; w < nw; ++w) {
        p.contexts().decode(w, wstate);
        for (std::size_t j = 0; j < wstate.size(); ++j)
            if (wrole[j] == in_b) wstate[j] = 0;
        const std::size_t wref = p.contexts().encode(wstate);
        const double* qw = &q[w * na * nb * nc];
        const double* qr = &q[wref * na * nb * nc];
        for (std::size_t ci = 0; ci < nc; ++ci) {
            double ref_total = 0;
            for (std::size_t ai = 0; ai < na; ++ai)
                for (std::size_t bi = 0; bi < nb; ++bi) ref_total += qr[(ai * nb + bi) * nc + ci];
            for (std::size_t bi = 0; bi < nb; ++bi) {
                double total = 0;
                for (std::size_t ai = 0; ai < na; ++ai) total += qw[(ai * nb + bi) * nc + ci];
                for (std::size_t ai = 0; ai < na; ++ai) {
                    double ref_a = 0;
                    for (std::size_t bj = 0; bj < nb; ++bj) ref_a += qr[(ai * nb + bj) * nc + ci];
                    const double lhs = qw[(ai * nb + bi) * nc + ci] / total;
                    const double rhs = ref_a / ref_total;
                    worst = std::max(worst, std::abs(lhs - rhs));
                }
            }
        }
    }
    return worst;
}

bool exact_ci_holds(const TabularDistribution& p, const std::vector<std::string>& a,
                    const std::vector<std::string>& b, const std::vector<std::string>& c, double tol) {
    return ci_deviation(p, a, b, c) <= tol;
}

TabularDistribution random_positive(const std::vector<Variable>& variables, std::uint64_t seed,
                                    double concentration, const std::vector<Variable>& context) {
    if (!(concentration > 0)) throw std::invalid_argument("concentration must be positive");
    const StateIndexer states(variables), contexts(context);
    const std::size_t n = states.size();
    const double floor = std::min(1e-6, 0.5 / static_cast<double>(n));
    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> gamma(concentration, 1.0);
    std::vector<double> probs(n * contexts.size());
    for (std::size_t c = 0; c < contexts.size(); ++c) {
        double total = 0;
        for (std::size_t s = 0; s < n; ++s) total += probs[c * n + s] = gamma(rng);
        if (!(total > 0)) {  // every draw underflowed: fall back to uniform
            std::fill_n(probs.begin() + static_cast<std::ptrdiff_t>(c * n), n, 1.0);
            total = static_cast<double>(n);
        }
        const double scale = (1.0 - floor * static_cast<double>(n)) / total;
        for (std::size_t s = 0; s < n; ++s) probs[c * n + s] = floor + probs[c * n + s] * scale;
    }
    return TabularDistribution::from_probabilities(variables, context, probs);
}

SampleSet sample(const TabularDistribution& p, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick_context(0, p.context_count() - 1);

    std::vector<std::vector<double>> cdf(p.context_count());
    for (std::size_t c = 0; c < p.context_count(); ++c) {
        double acc = 0;
        for (double lp : p.row(c)) cdf[c].push_back(acc += std::exp(lp));
    }
    SampleSet out;
    for (const auto& v : p.variables()) out.variables.push_back(v.name);
    for (const auto& v : p.context()) out.variables.push_back(v.name);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = p.context_count() > 1 ? pick_context(rng) : 0;
        const double u = unit(rng) * cdf[c].back();
        auto it = std::upper_bound(cdf[c].begin(), cdf[c].end(), u);
        auto s = std::min<std::size_t>(static_cast<std::size_t>(it - cdf[c].begin()), p.state_count() - 1);
        auto row = p.states().decode(s);
        auto ctx = p.contexts().decode(c);
        row.insert(row.end(), ctx.begin(), ctx.end());
        out.rows.push_back(std::move(row));
    }
    return out;
}

TabularDistribution empirical_distribution(const SampleSet& data, const std::vector<Variable>& vars) {
    data.validate(vars);
    const StateIndexer states(vars);
    std::vector<std::size_t> cols;
    for (const auto& v : vars) cols.push_back(data.column(v.name));
    std::vector<double> counts(states.size(), 0.0);
    std::vector<int> s(vars.size());
    for (std::size_t r = 0; r < data.size(); ++r) {
        for (std::size_t i = 0; i < cols.size(); ++i) s[i] = data.rows[r][cols[i]];
        counts[states.encode(s)] += data.weight(r);
    }
    const double total = data.total_weight();
    if (!(total > 0)) throw std::invalid_argument("empty sample set");
    for (auto& c : counts) c /= total;
    return TabularDistribution::from_probabilities(vars, {}, counts, false);
}

double total_variation(const TabularDistribution& p, const TabularDistribution& q) {
    if (p.variables() != q.variables() || p.context() != q.context())
        throw std::invalid_argument("total_variation: layouts differ");
    double worst = 0;
    for (std::size_t c = 0; c < p.context_count(); ++c) {
        double tv = 0;
        for (std::size_t s = 0; s < p.state_count(); ++s)
            tv += std::abs(std::exp(p.log_prob(c, s)) - std::exp(q.log_prob(c, s)));
        worst = std::max(worst, 0.5 * tv);
    }
    return worst;
}

} // namespace lcf
