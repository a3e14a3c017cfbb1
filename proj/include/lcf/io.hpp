#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lcf/decomp.hpp"
#include "lcf/fitscore.hpp"
#include "lcf/graph.hpp"
#include "lcf/tabular.hpp"

// Line-oriented text formats. '#' starts a comment everywhere; parse errors
// are lcf::ParseError carrying the line number.

namespace lcf {

// Graph: `var <name> <k>`, `fixed <name> <k>`, `edge <a> -- <b>`, `edge <a> -> <b>`.
Graph parse_graph(std::istream& in);
Graph parse_graph(const std::string& text);
std::string format_graph(const Graph& g);

/// Graphs each introduced by a `# member i of n` line.
std::vector<Graph> parse_graph_list(const std::string& text);
std::string format_graph_list(const std::vector<Graph>& graphs);

// Distribution: header `dist A:2 B:3 [| W:2 ...]`, then `s1,...,sK[|c1,...] <probability>`
// for every cell. Probabilities are written with 17 significant digits.
TabularDistribution parse_distribution(std::istream& in);
TabularDistribution parse_distribution(const std::string& text);
std::string format_distribution(const TabularDistribution& p);

// Samples: `samples A B ...`, then comma-separated levels with an optional
// trailing weight.
SampleSet parse_samples(std::istream& in);
SampleSet parse_samples(const std::string& text);
std::string format_samples(const SampleSet& s);

/// A factorization report: term blocks, normalizers and check lines.
struct Report {
    struct Row {
        std::string state;  ///< "s1,s2" or "s1,s2|c1"
        double value = 0;   ///< linear domain
    };
    struct Term {
        std::string header;  ///< text after "term "
        std::vector<Row> rows;
    };
    struct Check {
        std::string name;
        bool passed = true;
        double deviation = 0;
    };
    std::vector<std::string> comments;
    std::vector<Term> terms;
    std::vector<Row> normalizers;  ///< `Z <context-state> <value>`; "-" without context
    std::vector<Check> checks;

    bool passed() const;
};

Report parse_report(std::istream& in);
Report parse_report(const std::string& text);
/// Values with 12 significant digits.
std::string format_report(const Report& r);

/// Adds a term block, values exponentiated, canonical state order.
void add_term(Report& r, const FactorTerm& t);
std::string context_label(const StateIndexer& contexts, std::size_t index);

// Parameters: `family free|tlor`, `ref <v> <level>`, `score <v> g0,g1,...`,
// `param cond <v> <level>[|ctx] <value>`, `param phi {A,B} l1,l2[|ctx] <value>`,
// `param gamma {A,B} <value>`. 17 significant digits.
ModelParams parse_params(std::istream& in, const Graph& g);
ModelParams parse_params(const std::string& text, const Graph& g);
std::string format_params(const ModelParams& m);

/// Whole file as a string; throws lcf::Error when it cannot be read.
std::string read_text_file(const std::string& path);

} // namespace lcf
