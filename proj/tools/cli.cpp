#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "fixtures.hpp"
#include "lcf/decomp.hpp"
#include "lcf/error.hpp"
#include "lcf/io.hpp"
#include "lcf/markov.hpp"
#include "lcf/settings.hpp"

namespace lcf::cli {

namespace {

constexpr std::size_t max_listed_violations = 50;
constexpr std::size_t max_joint_cells = std::size_t{1} << 24;

struct InputError : Error {
    using Error::Error;
};

// Restores the subset cap after an in-process run.
class CapOverride {
public:
    explicit CapOverride(std::size_t cap) : saved_(settings().max_subsets) {
        if (cap) settings().max_subsets = cap;
    }
    ~CapOverride() { settings().max_subsets = saved_; }
    CapOverride(const CapOverride&) = delete;
    CapOverride& operator=(const CapOverride&) = delete;

private:
    std::size_t saved_;
};

void require(const std::string& value, const char* flag, const char* command) {
    if (value.empty()) throw InputError(std::string(command) + " needs " + flag);
}

template <class F>
auto load(const std::string& path, F&& parse) {
    const std::string text = read_text_file(path);
    try {
        return parse(text);
    } catch (const ParseError& e) {
        throw ParseError(e.line(), path + ": " + [&] {
            std::string msg = e.what();
            return e.line() ? msg.substr(msg.find(": ") + 2) : msg;
        }());
    }
}

Graph load_graph(const std::string& path) {
    return load(path, [](const std::string& t) { return parse_graph(t); });
}
TabularDistribution load_distribution(const std::string& path) {
    return load(path, [](const std::string& t) { return parse_distribution(t); });
}
SampleSet load_samples(const std::string& path) {
    return load(path, [](const std::string& t) { return parse_samples(t); });
}

std::vector<Variable> vars_of(const Graph& g, const VertexSet& s) {
    std::vector<Variable> out;
    for (auto v : s) out.push_back({g.name(v), g.vertex(v).cardinality});
    return out;
}

ReferenceAssignment make_reference(const RunConfig& c, const std::vector<Variable>& known) {
    ReferenceAssignment ref;
    for (const auto& [name, level] : c.ref_spec) {
        auto it = std::find_if(known.begin(), known.end(), [&, n = name](const Variable& v) { return v.name == n; });
        if (it == known.end()) throw InputError("--ref names unknown variable '" + name + "'");
        if (level < 0 || level >= it->cardinality)
            throw InputError("--ref level " + std::to_string(level) + " out of range for '" + name + "'");
        ref.set(name, level);
    }
    return ref;
}

std::vector<Variable> all_vars(const Graph& g) {
    auto out = vars_of(g, g.random_vertices());
    auto fixed = vars_of(g, g.fixed_vertices());
    out.insert(out.end(), fixed.begin(), fixed.end());
    return out;
}

void require_layout(const TabularDistribution& p, const Graph& g) {
    if (p.variables() != vars_of(g, g.random_vertices()) || p.context() != vars_of(g, g.fixed_vertices()))
        throw InputError("the distribution must range over the graph's random vertices, in declaration order, "
                         "with its fixed vertices as context");
}

void add_check(Report& r, const std::string& name, bool passed, double deviation) {
    r.checks.push_back({name, passed, deviation});
}

void add_bound_check(Report& r, const std::string& name, double deviation, double tol) {
    add_check(r, name, deviation <= tol, deviation);
}

void list_violations(Report& r, const MarkovReport& m) {
    std::size_t shown = 0;
    for (const auto& v : m.violations) {
        if (shown++ == max_listed_violations) {
            r.comments.push_back(to_string(m.property) + ": " + std::to_string(m.violations.size() - shown + 1) +
                                 " further violations");
            break;
        }
        std::ostringstream os;
        os << to_string(m.property) << " violation: " << v.statement << " (deviation " << v.deviation << ")";
        r.comments.push_back(os.str());
    }
}

void add_markov_check(Report& r, const std::string& name, const MarkovReport& m) {
    double dev = 0;
    for (const auto& v : m.violations) dev = std::max(dev, v.deviation);
    list_violations(r, m);
    add_check(r, name, m.passed, dev);
}

void add_restriction_check(Report& r, const RestrictionReport& rr) {
    double dev = 0;
    for (const auto& c : rr.checks) dev = std::max(dev, c.deviation);
    for (const auto& f : rr.failures()) r.comments.push_back("restriction violation: " + f.term + " " + f.check);
    add_check(r, "restrictions", rr.passed(), dev);
}

// Checks shared by factorize and verify on a single CUG factorization.
void add_lc_checks(Report& r, const LCFactorization& f, double tol) {
    add_bound_check(r, "reconstruction", f.diagnostics.reconstruction_error, tol);
    add_bound_check(r, "normalizer", f.diagnostics.z_gap, tol);
    double worst = 0;
    for (const auto& d : f.diagnostics.nonclique) {
        worst = std::max(worst, d.max_abs_log_phi);
        r.comments.push_back("non-clique " + brace_names(d.subset) + " has |log phi| up to " +
                             std::to_string(d.max_abs_log_phi));
    }
    r.comments.push_back("non-clique subsets checked: " + std::to_string(f.diagnostics.nonclique_checked) +
                         " (size <= " + std::to_string(f.diagnostics.nonclique_size_cap) + ")");
    add_check(r, "nonclique", f.diagnostics.nonclique.empty(), worst);
    add_restriction_check(r, verify_restrictions(f, tol));
}

LCOptions lc_options(const RunConfig& c) {
    LCOptions o;
    o.diagnostic_max_size = c.diagnostic_max_size;
    o.tol = c.tol;
    return o;
}

bool is_plain_dag(const Graph& g) { return g.is_dag() && g.fixed_vertices().empty(); }

// factorize and verify share everything but the term blocks.
std::string factor_or_verify(const RunConfig& c, bool with_terms, Report& r) {
    require(c.graph_path, "--graph", with_terms ? "factorize" : "verify");
    require(c.dist_path, "--dist", with_terms ? "factorize" : "verify");
    const Graph g = load_graph(c.graph_path);
    const TabularDistribution p = load_distribution(c.dist_path);
    require_layout(p, g);
    const ReferenceAssignment ref = make_reference(c, all_vars(g));
    const auto check = validate_chain_graph(g);
    if (!check.valid) throw InputError("not a chain graph: " + check.diagnostic);

    if (g.is_cug()) {
        const auto f = lc_factorize(p, g, ref, lc_options(c));
        r.comments.push_back(std::string(with_terms ? "factorize" : "verify") + ": " +
                             std::to_string(f.univariate_terms.size()) + " univariate terms, " +
                             std::to_string(f.phi_terms.size()) + " clique terms");
        if (with_terms) {
            for (const auto& t : f.univariate_terms) add_term(r, t);
            for (const auto& t : f.phi_terms) add_term(r, t);
            const StateIndexer cs(f.context);
            for (std::size_t i = 0; i < f.log_Z.size(); ++i)
                r.normalizers.push_back({context_label(cs, i), std::exp(f.log_Z[i])});
        }
        add_lc_checks(r, f, c.tol);
        add_markov_check(r, "pairwise_markov", pairwise_markov_holds(p, g, c.tol));
        if (!with_terms) {
            add_markov_check(r, "global_markov", global_markov_holds(p, g, c.tol));
            add_markov_check(r, "factorization", hammersley_clifford_check(p, g, ref, c.tol));
        }
        return format_report(r);
    }

    const auto cf = cg_lc_factorize(p, g, ref, lc_options(c));
    r.comments.push_back(std::string(with_terms ? "factorize" : "verify") + ": chain graph with " +
                         std::to_string(cf.blocks.size()) + " blocks");
    double z_gap = 0;
    RestrictionReport restrictions;
    std::size_t checked = 0;
    double worst = 0;
    bool nonclique_ok = true;
    for (std::size_t k = 0; k < cf.blocks.size(); ++k) {
        const auto& f = cf.per_block[k];
        const std::string block = brace_names(g.names_of(cf.blocks[k]));
        r.comments.push_back("block " + std::to_string(k + 1) + " " + block + " given " +
                             brace_names(g.names_of(cf.block_parents[k])));
        if (with_terms) {
            for (const auto& t : f.univariate_terms) add_term(r, t);
            for (const auto& t : f.phi_terms) add_term(r, t);
            const StateIndexer cs(f.context);
            for (std::size_t i = 0; i < f.log_Z.size(); ++i)
                r.normalizers.push_back({block + ":" + context_label(cs, i), std::exp(f.log_Z[i])});
        }
        z_gap = std::max(z_gap, f.diagnostics.z_gap);
        checked += f.diagnostics.nonclique_checked;
        for (const auto& d : f.diagnostics.nonclique) {
            nonclique_ok = false;
            worst = std::max(worst, d.max_abs_log_phi);
            r.comments.push_back("block " + block + ": non-clique " + brace_names(d.subset) +
                                 " has |log phi| up to " + std::to_string(d.max_abs_log_phi));
        }
        const auto rr = verify_restrictions(f, c.tol);
        restrictions.checks.insert(restrictions.checks.end(), rr.checks.begin(), rr.checks.end());
    }
    r.comments.push_back("non-clique subsets checked: " + std::to_string(checked));
    add_bound_check(r, "reconstruction", cf.reconstruction_error, c.tol);
    add_bound_check(r, "normalizer", z_gap, c.tol);
    add_check(r, "nonclique", nonclique_ok, worst);
    add_restriction_check(r, restrictions);
    if (!with_terms && is_plain_dag(g)) add_markov_check(r, "global_markov", global_markov_holds(p, g, c.tol));
    return format_report(r);
}

std::string run_chen(const RunConfig& c, Report& r) {
    require(c.dist_path, "--dist", "chen");
    const TabularDistribution p = load_distribution(c.dist_path);
    auto known = p.variables();
    known.insert(known.end(), p.context().begin(), p.context().end());
    const ReferenceAssignment ref = make_reference(c, known);
    std::vector<std::string> order = c.order_spec;
    if (order.empty())
        for (const auto& v : p.variables()) order.push_back(v.name);
    const auto d = chen_decompose(p, order, ref);

    std::string joined;
    for (const auto& n : order) joined += (joined.empty() ? "" : ",") + n;
    r.comments.push_back("chen: order " + joined);
    for (const auto& t : d.univariate_terms) add_term(r, t);
    for (const auto& t : d.or_terms) add_term(r, t);
    const StateIndexer cs(d.context);
    for (std::size_t i = 0; i < d.log_Z.size(); ++i) r.normalizers.push_back({context_label(cs, i), std::exp(d.log_Z[i])});

    double recon = 0, zgap = 0;
    std::vector<int> state(p.variables().size());
    for (std::size_t ci = 0; ci < p.context_count(); ++ci) {
        zgap = std::max(zgap, std::abs(d.log_Z[ci] - d.log_Z_closed[ci]));
        for (std::size_t s = 0; s < p.state_count(); ++s) {
            p.states().decode(s, state);
            recon = std::max(recon, std::abs(d.log_density(ci, state) - p.log_prob(ci, s)));
        }
    }
    add_bound_check(r, "reconstruction", recon, c.tol);
    add_bound_check(r, "normalizer", zgap, c.tol);
    std::vector<FactorTerm> terms = d.univariate_terms;
    terms.insert(terms.end(), d.or_terms.begin(), d.or_terms.end());
    add_restriction_check(r, verify_terms(terms, c.tol));
    return format_report(r);
}

Graph essential_input(const Graph& g) {
    if (!g.fixed_vertices().empty()) throw InputError("equivalence-class commands take graphs without fixed vertices");
    return g.is_dag() ? essential_graph(g) : g;
}

std::string run_score(const RunConfig& c, int& status) {
    require(c.graph_path, "--graph", "score");
    require(c.samples_path, "--samples", "score");
    const Graph g = load_graph(c.graph_path);
    const SampleSet data = load_samples(c.samples_path);
    ScoreOptions o;
    o.penalty = c.penalty;
    o.tol = c.fit_tol;
    o.max_iter = c.max_iter;
    const auto s = class_coherent_score(data, g, o);

    Report r;
    r.comments.push_back(std::string("score: class-coherent chain-graph likelihood, penalty ") +
                         (c.penalty == Penalty::bic ? "bic" : "none"));
    Report::Term t{"score", {}};
    t.rows.push_back({"score", s.score});
    t.rows.push_back({"loglik", s.loglik});
    t.rows.push_back({"dimension", static_cast<double>(s.dimension)});
    t.rows.push_back({"n", s.n});
    if (is_plain_dag(g)) t.rows.push_back({"dag_loglik", dag_loglik(data, g)});
    r.terms.push_back(std::move(t));
    add_check(r, "converged", s.converged, 0);
    if (!s.converged) status = exit_code::check_failed;
    return format_report(r);
}

std::string run_fit(const RunConfig& c, int& status) {
    require(c.graph_path, "--graph", "fit");
    require(c.samples_path, "--samples", "fit");
    const Graph g = load_graph(c.graph_path);
    if (!g.is_cug()) throw InputError("fit needs an undirected graph, optionally with fixed parents");
    const SampleSet data = load_samples(c.samples_path);
    FitOptions o;
    o.family = c.family;
    o.reference = make_reference(c, all_vars(g));
    o.tol = c.fit_tol;
    o.max_iter = c.max_iter;
    const auto res = fit_mle(g, data, o);
    if (!res.converged) status = exit_code::check_failed;
    std::ostringstream os;
    os.precision(12);
    os << "# fit: " << (res.converged ? "converged" : "not converged") << " after " << res.iterations
       << " iterations, loglik " << res.loglik << ", gradient max-norm " << res.grad_norm << '\n';
    return os.str() + format_params(res.params);
}

// Random parameters for g (a CUG), standard normal draws.
TabularDistribution random_model(const Graph& g, const RunConfig& c, std::mt19937_64& rng) {
    ModelParams m = make_params(g, c.family, make_reference(c, all_vars(g)));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> theta(param_count(m));
    for (auto& x : theta) x = normal(rng);
    assign(m, theta);
    return params_to_distribution(m);
}

// In-model joint for a chain graph without fixed vertices: a random model
// for each block given its parents, multiplied out.
TabularDistribution random_chain_model(const Graph& g, const RunConfig& c, std::mt19937_64& rng) {
    const auto vars = vars_of(g, g.random_vertices());
    const StateIndexer states(vars);
    if (states.size() > max_joint_cells) throw CapExceeded("max_joint_cells", max_joint_cells, states.size());
    std::vector<double> log_table(states.size(), 0.0);
    std::vector<int> state(vars.size()), bs, ps;
    for (const auto& b : blocks(g)) {
        const auto pa = g.parents_of_set(b);
        const TabularDistribution cond = random_model(conditional_graph(g, b), c, rng);
        for (std::size_t s = 0; s < states.size(); ++s) {
            states.decode(s, state);
            bs.clear();
            ps.clear();
            for (auto v : b) bs.push_back(state[v]);
            for (auto v : pa) ps.push_back(state[v]);
            log_table[s] += cond.log_prob(cond.contexts().encode(ps), cond.states().encode(bs));
        }
    }
    return TabularDistribution(vars, {}, std::move(log_table));
}

std::string run_gen(const RunConfig& c) {
    require(c.graph_path, "--graph", "gen");
    const Graph g = load_graph(c.graph_path);
    std::mt19937_64 rng(c.seed);
    const bool model = c.in_model || c.samples > 0;
    std::optional<TabularDistribution> p;
    if (!model) {
        p = random_positive(vars_of(g, g.random_vertices()), c.seed, 1.0, vars_of(g, g.fixed_vertices()));
    } else if (g.is_cug()) {
        p = random_model(g, c, rng);
    } else {
        const auto check = validate_chain_graph(g);
        if (!check.valid) throw InputError("not a chain graph: " + check.diagnostic);
        if (!g.fixed_vertices().empty())
            throw InputError("gen draws chain-graph models only for graphs without fixed vertices");
        p = random_chain_model(g, c, rng);
    }
    if (c.samples == 0) return format_distribution(*p);
    return format_samples(sample(*p, c.samples, rng()));
}

std::string run_demo(const RunConfig& c) {
    if (!c.fixture.empty()) return format_graph(fixtures::by_name(c.fixture));
    std::vector<Graph> all;
    std::string listing;
    for (const auto& n : fixtures::names()) {
        all.push_back(fixtures::by_name(n));
        listing += " " + n;
    }
    return "# fixtures:" + listing + "\n" + format_graph_list(all);
}

std::string dispatch(const RunConfig& c, int& status) {
    Report r;
    switch (c.command) {
    case Command::factorize:
    case Command::verify: {
        auto out = factor_or_verify(c, c.command == Command::factorize, r);
        if (!r.passed()) status = exit_code::check_failed;
        return out;
    }
    case Command::chen: {
        auto out = run_chen(c, r);
        if (!r.passed()) status = exit_code::check_failed;
        return out;
    }
    case Command::essential:
        require(c.graph_path, "--graph", "essential");
        {
            const Graph g = load_graph(c.graph_path);
            if (!is_plain_dag(g)) throw InputError("essential needs a DAG without fixed vertices");
            return format_graph(essential_graph(g));
        }
    case Command::enumerate: {
        require(c.graph_path, "--graph", "enumerate");
        const auto cls = enumerate_equivalence_class(essential_input(load_graph(c.graph_path)));
        return "# equivalence class: " + std::to_string(cls.members.size()) + " members\n" +
               format_graph_list(cls.members);
    }
    case Command::score:
        return run_score(c, status);
    case Command::fit:
        return run_fit(c, status);
    case Command::gen:
        return run_gen(c);
    case Command::demo:
        return run_demo(c);
    }
    throw InputError("unknown command");
}

} // namespace

std::optional<Command> parse_command(const std::string& name) {
    static const std::pair<const char*, Command> table[] = {
        {"factorize", Command::factorize}, {"chen", Command::chen},   {"verify", Command::verify},
        {"essential", Command::essential}, {"enumerate", Command::enumerate}, {"score", Command::score},
        {"fit", Command::fit},             {"gen", Command::gen},     {"demo", Command::demo},
    };
    for (const auto& [n, cmd] : table)
        if (name == n) return cmd;
    return std::nullopt;
}

std::vector<std::string> command_names() {
    return {"factorize", "chen", "verify", "essential", "enumerate", "score", "fit", "gen", "demo"};
}

std::vector<std::pair<std::string, int>> parse_ref_spec(const std::string& text) {
    std::vector<std::pair<std::string, int>> out;
    std::istringstream in(text);
    for (std::string item; std::getline(in, item, ',');) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size())
            throw Error("reference overrides look like A=1, got '" + item + "'");
        try {
            std::size_t used = 0;
            const int level = std::stoi(item.substr(eq + 1), &used);
            if (used != item.size() - eq - 1) throw std::invalid_argument("trailing characters");
            out.emplace_back(item.substr(0, eq), level);
        } catch (const std::exception&) {
            throw Error("reference level is not an integer in '" + item + "'");
        }
    }
    return out;
}

RunResult run(const RunConfig& config) {
    RunResult result;
    try {
        if (!(config.tol > 0)) throw InputError("--tol must be positive");
        if (!(config.fit_tol > 0)) throw InputError("--fit-tol must be positive");
        const CapOverride cap(config.max_subsets);
        result.output = dispatch(config, result.status);
    } catch (const std::exception& e) {
        // Every exception escaping a command traces back to its inputs:
        // unreadable or malformed files, caps, or arguments the library refused.
        result.status = exit_code::input_error;
        result.message = e.what();
        result.output.clear();
        return result;
    }
    if (!config.out_path.empty()) {
        std::ofstream out(config.out_path, std::ios::binary);
        if (!out || !(out << result.output)) {
            result.status = exit_code::input_error;
            result.message = "cannot write '" + config.out_path + "'";
        }
    }
    return result;
}

} // namespace lcf::cli
