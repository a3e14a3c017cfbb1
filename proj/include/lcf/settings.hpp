#pragma once

#include <cstddef>

namespace lcf {

/// Process-wide knobs. Set them before starting work; they are read, never
/// written, by the library itself.
struct Settings {
    /// Absolute tolerance (log domain) for every identity check.
    double tolerance = 1e-9;
    /// Largest subset lattice a decomposition-facing operation will enumerate.
    std::size_t max_subsets = std::size_t{1} << 20;
};

Settings& settings();

/// Applies LCF_MAX_SUBSETS from the environment, if set and valid.
void load_settings_from_env();

} // namespace lcf
