#include "lcf/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "lcf/error.hpp"

namespace lcf {

namespace {

std::string format_number(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::string join_ints(const std::vector<int>& xs) {
    if (xs.empty()) return "-";
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
    return s;
}

// Reads non-blank lines with comments stripped.
class Lines {
public:
    explicit Lines(std::istream& in) : in_(in) {}

    bool next(std::vector<std::string>& tokens) {
        std::string raw;
        while (std::getline(in_, raw)) {
            ++line_;
            if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
            std::istringstream ss(raw);
            tokens.clear();
            for (std::string t; ss >> t;) tokens.push_back(t);
            if (!tokens.empty()) return true;
        }
        return false;
    }
    std::size_t line() const { return line_; }

private:
    std::istream& in_;
    std::size_t line_ = 0;
};

long parse_long(const std::string& tok, std::size_t line, const std::string& what) {
    try {
        std::size_t used = 0;
        const long v = std::stol(tok, &used);
        if (used == tok.size()) return v;
    } catch (const std::exception&) {
    }
    throw ParseError(line, "expected an integer " + what + ", got '" + tok + "'");
}

double parse_double(const std::string& tok, std::size_t line, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used == tok.size()) return v;
    } catch (const std::exception&) {
    }
    throw ParseError(line, "expected a number " + what + ", got '" + tok + "'");
}

std::vector<int> parse_levels(const std::string& tok, std::size_t line) {
    if (tok == "-") return {};
    std::vector<int> out;
    for (const auto& part : split(tok, ','))
        out.push_back(static_cast<int>(parse_long(part, line, "level")));
    return out;
}

// "s1,s2|c1,c2" -> (state, context)
std::pair<std::vector<int>, std::vector<int>> parse_cell(const std::string& tok, std::size_t line) {
    const auto bar = tok.find('|');
    if (bar == std::string::npos) return {parse_levels(tok, line), {}};
    return {parse_levels(tok.substr(0, bar), line), parse_levels(tok.substr(bar + 1), line)};
}

Variable parse_declared(const std::string& tok, std::size_t line) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos || colon == 0)
        throw ParseError(line, "expected <name>:<cardinality>, got '" + tok + "'");
    const long k = parse_long(tok.substr(colon + 1), line, "cardinality");
    if (k < 1 || k > 1 << 20) throw ParseError(line, "cardinality out of range in '" + tok + "'");
    return {tok.substr(0, colon), static_cast<int>(k)};
}

template <class F>
auto rethrow_at(std::size_t line, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError(line, e.what());
    }
}

std::string names_csv(const std::vector<Variable>& vars) {
    std::string s;
    for (std::size_t i = 0; i < vars.size(); ++i) s += (i ? "," : "") + vars[i].name;
    return s;
}

std::vector<std::string> names_of_vars(const std::vector<Variable>& vars) {
    std::vector<std::string> out;
    for (const auto& v : vars) out.push_back(v.name);
    return out;
}

} // namespace

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Graph parse_graph(std::istream& in) {
    Graph g;
    Lines lines(in);
    std::vector<std::string> t;
    while (lines.next(t)) {
        const auto line = lines.line();
        if (t[0] == "var" || t[0] == "fixed") {
            if (t.size() != 3) throw ParseError(line, "expected '" + t[0] + " <name> <cardinality>'");
            const long k = parse_long(t[2], line, "cardinality");
            if (k < 1 || k > 1 << 20) throw ParseError(line, "cardinality out of range");
            rethrow_at(line, [&] {
                return g.add_vertex(t[1], t[0] == "var" ? VertexKind::random : VertexKind::fixed,
                                    static_cast<int>(k));
            });
        } else if (t[0] == "edge") {
            if (t.size() != 4 || (t[2] != "--" && t[2] != "->"))
                throw ParseError(line, "expected 'edge <a> -- <b>' or 'edge <a> -> <b>'");
            for (const auto* n : {&t[1], &t[3]})
                if (!g.contains(*n)) throw ParseError(line, "unknown vertex '" + *n + "'");
            rethrow_at(line, [&] {
                if (t[2] == "--")
                    g.add_undirected(t[1], t[3]);
                else
                    g.add_directed(t[1], t[3]);
                return 0;
            });
        } else {
            throw ParseError(line, "unknown directive '" + t[0] + "'");
        }
    }
    return g;
}

Graph parse_graph(const std::string& text) {
    std::istringstream in(text);
    return parse_graph(in);
}

std::string format_graph(const Graph& g) {
    std::ostringstream os;
    for (const auto& v : g.vertices())
        os << (v.kind == VertexKind::random ? "var " : "fixed ") << v.name << ' ' << v.cardinality << '\n';
    for (auto [a, b] : g.undirected_edges()) os << "edge " << g.name(a) << " -- " << g.name(b) << '\n';
    for (auto [a, b] : g.directed_edges()) os << "edge " << g.name(a) << " -> " << g.name(b) << '\n';
    return os.str();
}

std::vector<Graph> parse_graph_list(const std::string& text) {
    std::vector<Graph> out;
    std::istringstream in(text);
    std::string raw, chunk;
    std::size_t line = 0, chunk_start = 0;
    bool open = false;
    auto flush = [&] {
        if (!open) return;
        try {
            out.push_back(parse_graph(chunk));
        } catch (const ParseError& e) {
            std::string msg = e.what();
            if (e.line()) msg = msg.substr(msg.find(": ") + 2);
            throw ParseError(e.line() ? chunk_start + e.line() : 0, msg);
        }
    };
    while (std::getline(in, raw)) {
        ++line;
        if (raw.rfind("# member", 0) == 0) {
            flush();
            chunk.clear();
            chunk_start = line;
            open = true;
            continue;
        }
        if (!open) {
            auto body = raw.substr(0, raw.find('#'));
            if (body.find_first_not_of(" \t\r") != std::string::npos)
                throw ParseError(line, "expected a '# member i of n' header before graph content");
            continue;
        }
        chunk += raw + '\n';
    }
    flush();
    return out;
}

std::string format_graph_list(const std::vector<Graph>& graphs) {
    std::string out;
    for (std::size_t i = 0; i < graphs.size(); ++i)
        out += "# member " + std::to_string(i + 1) + " of " + std::to_string(graphs.size()) + "\n" +
               format_graph(graphs[i]);
    return out;
}

TabularDistribution parse_distribution(std::istream& in) {
    Lines lines(in);
    std::vector<std::string> t;
    if (!lines.next(t) || t[0] != "dist") throw ParseError(lines.line(), "expected a 'dist' header");
    std::vector<Variable> vars, ctx;
    bool in_context = false;
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (t[i] == "|") {
            if (in_context) throw ParseError(lines.line(), "more than one '|' in header");
            in_context = true;
            continue;
        }
        (in_context ? ctx : vars).push_back(parse_declared(t[i], lines.line()));
    }
    const StateIndexer vs = rethrow_at(lines.line(), [&] { return StateIndexer(vars); });
    const StateIndexer cs(ctx);
    const std::size_t total = vs.size() * cs.size();
    if (total > (std::size_t{1} << 26)) throw ParseError(lines.line(), "table too large");
    std::vector<double> probs(total, std::numeric_limits<double>::quiet_NaN());
    std::size_t filled = 0;
    while (lines.next(t)) {
        const auto line = lines.line();
        if (t.size() != 2) throw ParseError(line, "expected '<state> <probability>'");
        auto [s, c] = parse_cell(t[0], line);
        const std::size_t si = rethrow_at(line, [&] { return vs.encode(s); });
        const std::size_t ci = rethrow_at(line, [&] { return cs.encode(c); });
        const double p = parse_double(t[1], line, "probability");
        if (!(p >= 0) || p > 1 + 1e-9) throw ParseError(line, "probability out of range");
        double& slot = probs[ci * vs.size() + si];
        if (!std::isnan(slot)) throw ParseError(line, "state listed twice");
        slot = p;
        ++filled;
    }
    if (filled != total)
        throw ParseError(lines.line(), "table incomplete: " + std::to_string(filled) + " of " +
                                           std::to_string(total) + " cells given");
    const bool positive = std::all_of(probs.begin(), probs.end(), [](double p) { return p > positivity_floor; });
    return rethrow_at(lines.line(), [&] { return TabularDistribution::from_probabilities(vars, ctx, probs, positive); });
}

TabularDistribution parse_distribution(const std::string& text) {
    std::istringstream in(text);
    return parse_distribution(in);
}

std::string format_distribution(const TabularDistribution& p) {
    std::ostringstream os;
    os << "dist";
    for (const auto& v : p.variables()) os << ' ' << v.name << ':' << v.cardinality;
    if (!p.context().empty()) {
        os << " |";
        for (const auto& v : p.context()) os << ' ' << v.name << ':' << v.cardinality;
    }
    os << '\n';
    for (std::size_t c = 0; c < p.context_count(); ++c)
        for (std::size_t s = 0; s < p.state_count(); ++s) {
            os << join_ints(p.states().decode(s));
            if (!p.context().empty()) os << '|' << join_ints(p.contexts().decode(c));
            os << ' ' << format_number(std::exp(p.log_prob(c, s)), 17) << '\n';
        }
    return os.str();
}

SampleSet parse_samples(std::istream& in) {
    Lines lines(in);
    std::vector<std::string> t;
    if (!lines.next(t) || t[0] != "samples") throw ParseError(lines.line(), "expected a 'samples' header");
    SampleSet s;
    s.variables.assign(t.begin() + 1, t.end());
    if (s.variables.empty()) throw ParseError(lines.line(), "no sample columns");
    if (std::set<std::string>(s.variables.begin(), s.variables.end()).size() != s.variables.size())
        throw ParseError(lines.line(), "duplicate sample column");
    std::vector<double> weights;
    bool weighted = false;
    while (lines.next(t)) {
        const auto line = lines.line();
        if (t.size() > 2) throw ParseError(line, "expected '<levels> [weight]'");
        auto row = parse_levels(t[0], line);
        if (row.size() != s.variables.size())
            throw ParseError(line, "expected " + std::to_string(s.variables.size()) + " levels");
        for (int x : row)
            if (x < 0) throw ParseError(line, "negative level");
        double w = 1.0;
        if (t.size() == 2) {
            w = parse_double(t[1], line, "weight");
            if (!(w > 0) || !std::isfinite(w)) throw ParseError(line, "weights must be positive");
            weighted = true;
        }
        s.rows.push_back(std::move(row));
        weights.push_back(w);
    }
    if (weighted) s.weights = std::move(weights);
    return s;
}

SampleSet parse_samples(const std::string& text) {
    std::istringstream in(text);
    return parse_samples(in);
}

std::string format_samples(const SampleSet& s) {
    std::ostringstream os;
    os << "samples";
    for (const auto& v : s.variables) os << ' ' << v;
    os << '\n';
    for (std::size_t r = 0; r < s.rows.size(); ++r) {
        os << join_ints(s.rows[r]);
        if (!s.weights.empty()) os << ' ' << format_number(s.weights[r], 17);
        os << '\n';
    }
    return os.str();
}

bool Report::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

Report parse_report(std::istream& in) {
    Report r;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (raw.rfind("#", 0) == 0) {
            r.comments.push_back(raw.size() > 1 && raw[1] == ' ' ? raw.substr(2) : raw.substr(1));
            continue;
        }
        std::istringstream ss(raw.substr(0, raw.find('#')));
        std::vector<std::string> t;
        for (std::string x; ss >> x;) t.push_back(x);
        if (t.empty()) continue;
        if (t[0] == "term") {
            if (t.size() < 2) throw ParseError(line, "term header without a description");
            Report::Term term;
            for (std::size_t i = 1; i < t.size(); ++i) term.header += (i > 1 ? " " : "") + t[i];
            r.terms.push_back(std::move(term));
        } else if (t[0] == "Z") {
            if (t.size() != 3) throw ParseError(line, "expected 'Z <context-state> <value>'");
            r.normalizers.push_back({t[1], parse_double(t[2], line, "normalizer")});
        } else if (t[0] == "check") {
            if (t.size() != 4 || (t[2] != "pass" && t[2] != "fail"))
                throw ParseError(line, "expected 'check <name> pass|fail <deviation>'");
            r.checks.push_back({t[1], t[2] == "pass", parse_double(t[3], line, "deviation")});
        } else {
            if (t.size() != 2) throw ParseError(line, "expected '<state> <value>'");
            if (r.terms.empty()) throw ParseError(line, "state line outside a term block");
            r.terms.back().rows.push_back({t[0], parse_double(t[1], line, "value")});
        }
    }
    return r;
}

Report parse_report(const std::string& text) {
    std::istringstream in(text);
    return parse_report(in);
}

std::string format_report(const Report& r) {
    std::ostringstream os;
    for (const auto& c : r.comments) os << "# " << c << '\n';
    for (const auto& t : r.terms) {
        os << "term " << t.header << '\n';
        for (const auto& row : t.rows) os << row.state << ' ' << format_number(row.value, 12) << '\n';
    }
    for (const auto& z : r.normalizers) os << "Z " << z.state << ' ' << format_number(z.value, 12) << '\n';
    for (const auto& c : r.checks)
        os << "check " << c.name << ' ' << (c.passed ? "pass" : "fail") << ' ' << format_number(c.deviation, 12)
           << '\n';
    return os.str();
}

std::string context_label(const StateIndexer& contexts, std::size_t index) {
    return join_ints(contexts.decode(index));
}

void add_term(Report& r, const FactorTerm& t) {
    Report::Term term;
    term.header = t.label();
    if (!t.context.empty()) term.header += " | " + names_csv(t.context);
    const auto ss = t.subset_states();
    const auto cs = t.context_states();
    for (std::size_t c = 0; c < cs.size(); ++c)
        for (std::size_t s = 0; s < ss.size(); ++s) {
            std::string state = join_ints(ss.decode(s));
            if (!t.context.empty()) state += "|" + join_ints(cs.decode(c));
            term.rows.push_back({state, std::exp(t.at(c, s))});
        }
    r.terms.push_back(std::move(term));
}

ModelParams parse_params(std::istream& in, const Graph& g) {
    struct Entry {
        std::size_t line;
        std::vector<std::string> tokens;
    };
    Lines lines(in);
    std::vector<std::string> t;
    std::vector<Entry> params;
    Family family = Family::free;
    bool family_seen = false;
    ReferenceAssignment ref;
    std::map<std::string, std::vector<double>> scores;
    while (lines.next(t)) {
        const auto line = lines.line();
        if (t[0] == "family") {
            if (t.size() != 2 || (t[1] != "free" && t[1] != "tlor"))
                throw ParseError(line, "expected 'family free|tlor'");
            if (family_seen) throw ParseError(line, "family given twice");
            family_seen = true;
            family = t[1] == "free" ? Family::free : Family::transformed_linear;
        } else if (t[0] == "ref") {
            if (t.size() != 3) throw ParseError(line, "expected 'ref <variable> <level>'");
            if (!g.contains(t[1])) throw ParseError(line, "unknown variable '" + t[1] + "'");
            ref.set(t[1], static_cast<int>(parse_long(t[2], line, "level")));
        } else if (t[0] == "score") {
            if (t.size() != 3) throw ParseError(line, "expected 'score <variable> g0,g1,...'");
            std::vector<double> s;
            for (const auto& x : split(t[2], ',')) s.push_back(parse_double(x, line, "score"));
            scores[t[1]] = s;
        } else if (t[0] == "param") {
            params.push_back({line, t});
        } else {
            throw ParseError(line, "unknown directive '" + t[0] + "'");
        }
    }

    ModelParams m = rethrow_at(0, [&] { return make_params(g, family, ref); });
    const auto rv = g.random_vertices();
    for (const auto& [name, s] : scores) {
        auto it = std::find_if(rv.begin(), rv.end(), [&, n = name](std::size_t v) { return g.name(v) == n; });
        if (it == rv.end()) throw ParseError(0, "score for unknown random variable '" + name + "'");
        m.scores[static_cast<std::size_t>(it - rv.begin())] = s;
    }

    std::vector<std::vector<char>> set_u(m.univariate.size()), set_i(m.interactions.size());
    for (std::size_t i = 0; i < m.univariate.size(); ++i) set_u[i].assign(m.univariate[i].values.size(), 0);
    for (std::size_t i = 0; i < m.interactions.size(); ++i) set_i[i].assign(m.interactions[i].values.size(), 0);

    // Index of levels among the non-reference combinations of `vars`.
    auto combo = [&](const std::vector<Variable>& vars, const std::vector<int>& levels, std::size_t line) {
        if (levels.size() != vars.size()) throw ParseError(line, "wrong number of levels");
        std::size_t idx = 0;
        for (std::size_t j = 0; j < vars.size(); ++j) {
            const int r = m.reference.level(vars[j].name);
            if (levels[j] < 0 || levels[j] >= vars[j].cardinality || levels[j] == r)
                throw ParseError(line, "level " + std::to_string(levels[j]) + " of '" + vars[j].name +
                                           "' is out of range or the reference level");
            idx = idx * static_cast<std::size_t>(vars[j].cardinality - 1) +
                  static_cast<std::size_t>(levels[j] < r ? levels[j] : levels[j] - 1);
        }
        return idx;
    };
    auto context_index = [&](const std::vector<Variable>& ctx, const std::vector<int>& c, std::size_t line) {
        return rethrow_at(line, [&] { return StateIndexer(ctx).encode(c); });
    };

    for (const auto& e : params) {
        const auto& p = e.tokens;
        const auto line = e.line;
        if (p.size() < 2) throw ParseError(line, "incomplete param line");
        if (p[1] == "cond") {
            if (p.size() != 5) throw ParseError(line, "expected 'param cond <v> <level>[|ctx] <value>'");
            auto it = std::find_if(m.univariate.begin(), m.univariate.end(),
                                   [&](const ParamBlock& b) { return b.subset[0].name == p[2]; });
            if (it == m.univariate.end()) throw ParseError(line, "unknown random variable '" + p[2] + "'");
            const auto bi = static_cast<std::size_t>(it - m.univariate.begin());
            auto [lv, cv] = parse_cell(p[3], line);
            const std::size_t idx = context_index(it->context, cv, line) *
                                        static_cast<std::size_t>(it->subset[0].cardinality - 1) +
                                    combo(it->subset, lv, line);
            if (set_u[bi][idx]++) throw ParseError(line, "parameter given twice");
            it->values[idx] = parse_double(p[4], line, "value");
        } else if (p[1] == "phi" || p[1] == "gamma") {
            const bool gamma = p[1] == "gamma";
            if (gamma != (m.family == Family::transformed_linear))
                throw ParseError(line, "'param " + p[1] + "' does not match the declared family");
            if (p.size() != (gamma ? 4u : 5u))
                throw ParseError(line, gamma ? "expected 'param gamma {A,B} <value>'"
                                             : "expected 'param phi {A,B} <levels>[|ctx] <value>'");
            if (p[2].size() < 2 || p[2].front() != '{' || p[2].back() != '}')
                throw ParseError(line, "expected a subset written as {A,B}");
            const auto names = split(p[2].substr(1, p[2].size() - 2), ',');
            auto it = std::find_if(m.interactions.begin(), m.interactions.end(),
                                   [&](const ParamBlock& b) { return names_of_vars(b.subset) == names; });
            if (it == m.interactions.end()) throw ParseError(line, "no clique " + p[2] + " in the graph");
            const auto bi = static_cast<std::size_t>(it - m.interactions.begin());
            std::size_t idx = 0;
            if (!gamma) {
                auto [lv, cv] = parse_cell(p[3], line);
                idx = context_index(it->context, cv, line) * [&] {
                    std::size_t w = 1;
                    for (const auto& v : it->subset) w *= static_cast<std::size_t>(v.cardinality - 1);
                    return w;
                }() + combo(it->subset, lv, line);
            }
            if (set_i[bi][idx]++) throw ParseError(line, "parameter given twice");
            it->values[idx] = parse_double(p.back(), line, "value");
        } else {
            throw ParseError(line, "unknown parameter kind '" + p[1] + "'");
        }
    }
    for (std::size_t i = 0; i < set_u.size(); ++i)
        if (std::find(set_u[i].begin(), set_u[i].end(), 0) != set_u[i].end())
            throw ParseError(lines.line(), "missing parameters for cond " + m.univariate[i].subset[0].name);
    for (std::size_t i = 0; i < set_i.size(); ++i)
        if (std::find(set_i[i].begin(), set_i[i].end(), 0) != set_i[i].end())
            throw ParseError(lines.line(),
                             "missing parameters for " + brace_names(names_of_vars(m.interactions[i].subset)));
    return m;
}

ModelParams parse_params(const std::string& text, const Graph& g) {
    std::istringstream in(text);
    return parse_params(in, g);
}

std::string format_params(const ModelParams& m) {
    std::ostringstream os;
    os << "family " << (m.family == Family::free ? "free" : "tlor") << '\n';
    for (const auto& [name, level] : m.reference.overrides())
        if (m.graph.contains(name)) os << "ref " << name << ' ' << level << '\n';
    const auto rv = m.graph.random_vertices();
    if (m.family == Family::transformed_linear)
        for (std::size_t i = 0; i < rv.size(); ++i) {
            os << "score " << m.graph.name(rv[i]) << ' ';
            for (std::size_t l = 0; l < m.scores[i].size(); ++l)
                os << (l ? "," : "") << format_number(m.scores[i][l], 17);
            os << '\n';
        }

    // Non-reference level combinations of `vars`, in parameter order.
    auto combos = [&](const std::vector<Variable>& vars) {
        std::vector<std::vector<int>> out{{}};
        for (const auto& v : vars) {
            std::vector<std::vector<int>> next;
            const int r = m.reference.level(v.name);
            for (const auto& prefix : out)
                for (int l = 0; l < v.cardinality; ++l)
                    if (l != r) {
                        auto x = prefix;
                        x.push_back(l);
                        next.push_back(std::move(x));
                    }
            out = std::move(next);
        }
        return out;
    };
    auto emit = [&](const std::string& head, const ParamBlock& b) {
        const StateIndexer cs(b.context);
        const auto cl = combos(b.subset);
        std::size_t at = 0;
        for (std::size_t c = 0; c < cs.size(); ++c)
            for (const auto& levels : cl) {
                os << "param " << head << ' ' << join_ints(levels);
                if (!b.context.empty()) os << '|' << join_ints(cs.decode(c));
                os << ' ' << format_number(b.values[at++], 17) << '\n';
            }
    };
    for (const auto& b : m.univariate) emit("cond " + b.subset[0].name, b);
    for (const auto& b : m.interactions) {
        const std::string subset = brace_names(names_of_vars(b.subset));
        if (m.family == Family::transformed_linear)
            os << "param gamma " << subset << ' ' << format_number(b.values.at(0), 17) << '\n';
        else
            emit("phi " + subset, b);
    }
    return os.str();
}

} // namespace lcf
