#pragma once

// Hot loops, each with a serial reference and an OpenMP variant. Both variants
// use the same fixed blocking and merge order, so their results are
// bit-identical for any thread count.

#include <cstddef>
#include <span>
#include <vector>

namespace lcf::kernels {

/// Rows per reduction block.
inline constexpr std::size_t block_rows = 1024;

double log_sum_exp_serial(std::span<const double> xs);
double log_sum_exp_parallel(std::span<const double> xs);

/// Möbius sums over every cell of one subset C of a joint log table.
///
/// `log_row` is one context row of the joint, `strides` the row-major strides
/// of its variables and `reference` their reference levels. For each state s
/// of C (row-major over `axes`), out[s] = sum over B ⊆ C of
/// (-1)^{|C \ B|} log_row[state with B at s, everything else at reference].
/// Subsets are visited in increasing bitmask order.
struct MobiusProblem {
    std::span<const double> log_row;
    std::vector<std::size_t> strides;
    std::vector<int> reference;
    std::vector<std::size_t> axes;
    std::vector<int> cards;  ///< cardinalities of the axes
};

std::size_t mobius_cells(const MobiusProblem& problem);
void mobius_phi_serial(const MobiusProblem& problem, std::span<double> out);
void mobius_phi_parallel(const MobiusProblem& problem, std::span<double> out);

/// Compressed sparse rows.
struct CsrMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> row_start{0};
    std::vector<std::size_t> col;
    std::vector<double> value;

    void push(std::size_t c, double v) {
        col.push_back(c);
        value.push_back(v);
    }
    void end_row() {
        row_start.push_back(col.size());
        ++rows;
    }
};

/// out = X theta.
void linear_predictor_serial(const CsrMatrix& x, std::span<const double> theta, std::span<double> out);
void linear_predictor_parallel(const CsrMatrix& x, std::span<const double> theta, std::span<double> out);

/// out = X^T w, accumulated per block of rows and merged in block order.
void weighted_feature_sum_serial(const CsrMatrix& x, std::span<const double> w, std::span<double> out);
void weighted_feature_sum_parallel(const CsrMatrix& x, std::span<const double> w, std::span<double> out);

// What the library calls. Small inputs stay on one thread.
inline double log_sum_exp(std::span<const double> xs) { return log_sum_exp_parallel(xs); }
inline void mobius_phi(const MobiusProblem& p, std::span<double> out) { mobius_phi_parallel(p, out); }
inline void linear_predictor(const CsrMatrix& x, std::span<const double> t, std::span<double> out) {
    linear_predictor_parallel(x, t, out);
}
inline void weighted_feature_sum(const CsrMatrix& x, std::span<const double> w, std::span<double> out) {
    weighted_feature_sum_parallel(x, w, out);
}

} // namespace lcf::kernels
