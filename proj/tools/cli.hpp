#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lcf/chaingraph.hpp"
#include "lcf/fitscore.hpp"

namespace lcf::cli {

enum class Command { factorize, chen, verify, essential, enumerate, score, fit, gen, demo };

std::optional<Command> parse_command(const std::string& name);
std::vector<std::string> command_names();

struct RunConfig {
    Command command = Command::factorize;
    std::string graph_path, dist_path, samples_path, out_path;
    std::vector<std::pair<std::string, int>> ref_spec;
    std::vector<std::string> order_spec;
    double tol = 1e-9;
    std::uint64_t seed = 1;
    std::size_t max_subsets = 0;  ///< 0: keep the process setting
    std::size_t diagnostic_max_size = 4;
    Penalty penalty = Penalty::bic;
    Family family = Family::free;
    double fit_tol = 1e-8;
    std::size_t max_iter = 20000;
    std::size_t samples = 0;  ///< gen: rows to draw; 0 emits a distribution
    bool in_model = false;    ///< gen: draw from the graph's model
    std::string fixture;      ///< demo: empty emits every fixture
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int check_failed = 1;
inline constexpr int input_error = 2;
}

struct RunResult {
    int status = exit_code::ok;
    std::string output;   ///< the report, also written to out_path when set
    std::string message;  ///< diagnostic for status 2
};

/// Executes one command. Never throws for bad input; see status.
RunResult run(const RunConfig& config);

/// "A=1,B=0" -> {{"A",1},{"B",0}}. Throws lcf::Error.
std::vector<std::pair<std::string, int>> parse_ref_spec(const std::string& text);

} // namespace lcf::cli
