#pragma once

#include <string>
#include <vector>

#include "lcf/graph.hpp"

namespace lcf::fixtures {

/// The four-cycle MRF A - B - D - C - A.
Graph fig1a();
/// Three DAGs sharing one Markov equivalence class, and its essential graph.
Graph fig1b();
Graph fig1c();
Graph fig1d();
Graph fig1e();
/// 3x3 grid MRF over V1..V9, row-major.
Graph lattice3x3();
/// Tree with leaves L1..L8 and latent internal vertices.
Graph binary_tree15();

/// Names accepted by by_name, in listing order.
std::vector<std::string> names();
/// Throws lcf::Error for an unknown name.
Graph by_name(const std::string& name);

} // namespace lcf::fixtures
