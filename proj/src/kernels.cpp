#include "lcf/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace lcf::kernels {

namespace {

// Below this many rows or cells the OpenMP variants stay on one thread.
constexpr std::size_t parallel_threshold = 4096;

std::size_t block_count(std::size_t n) { return (n + block_rows - 1) / block_rows; }

double block_exp_sum(std::span<const double> xs, std::size_t b, double m) {
    const std::size_t lo = b * block_rows, hi = std::min(xs.size(), lo + block_rows);
    double s = 0;
    for (std::size_t i = lo; i < hi; ++i) s += std::exp(xs[i] - m);
    return s;
}

double finish_lse(double m, const std::vector<double>& partial) {
    double total = 0;
    for (double p : partial) total += p;
    return m + std::log(total);
}

double mobius_cell(const MobiusProblem& pr, std::size_t base, std::size_t cell, int* digits) {
    const std::size_t k = pr.axes.size();
    for (std::size_t j = k; j-- > 0;) {
        digits[j] = static_cast<int>(cell % static_cast<std::size_t>(pr.cards[j]));
        cell /= static_cast<std::size_t>(pr.cards[j]);
    }
    double acc = 0;
    const std::uint64_t full = (std::uint64_t{1} << k) - 1;
    for (std::uint64_t mask = 0; mask <= full; ++mask) {
        std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(base);
        for (std::size_t j = 0; j < k; ++j)
            if (mask >> j & 1U) {
                const auto ax = pr.axes[j];
                offset += static_cast<std::ptrdiff_t>(pr.strides[ax]) *
                          (digits[j] - pr.reference[ax]);
            }
        const double h = pr.log_row[static_cast<std::size_t>(offset)];
        if ((k - static_cast<std::size_t>(std::popcount(mask))) % 2 == 0)
            acc += h;
        else
            acc -= h;
    }
    return acc;
}

std::size_t reference_offset(const MobiusProblem& pr) {
    std::size_t base = 0;
    for (std::size_t i = 0; i < pr.strides.size(); ++i)
        base += static_cast<std::size_t>(pr.reference[i]) * pr.strides[i];
    return base;
}

void check_problem(const MobiusProblem& pr, std::span<double> out) {
    if (pr.axes.size() != pr.cards.size() || pr.axes.size() > 62)
        throw std::invalid_argument("mobius: bad subset description");
    if (out.size() != mobius_cells(pr)) throw std::invalid_argument("mobius: output has wrong size");
}

void csr_row_block_sum(const CsrMatrix& x, std::span<const double> w, std::size_t b, double* acc) {
    const std::size_t lo = b * block_rows, hi = std::min(x.rows, lo + block_rows);
    for (std::size_t r = lo; r < hi; ++r) {
        const double wr = w[r];
        if (wr == 0.0) continue;
        for (std::size_t e = x.row_start[r]; e < x.row_start[r + 1]; ++e) acc[x.col[e]] += x.value[e] * wr;
    }
}

} // namespace

double log_sum_exp_serial(std::span<const double> xs) {
    if (xs.empty()) return -std::numeric_limits<double>::infinity();
    double m = -std::numeric_limits<double>::infinity();
    for (double x : xs) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    std::vector<double> partial(block_count(xs.size()));
    for (std::size_t b = 0; b < partial.size(); ++b) partial[b] = block_exp_sum(xs, b, m);
    return finish_lse(m, partial);
}

double log_sum_exp_parallel(std::span<const double> xs) {
    if (xs.size() < parallel_threshold) return log_sum_exp_serial(xs);
    const auto n = static_cast<std::ptrdiff_t>(xs.size());
    double m = -std::numeric_limits<double>::infinity();
#pragma omp parallel for reduction(max : m) schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) m = std::max(m, xs[static_cast<std::size_t>(i)]);
    if (!std::isfinite(m)) return m;
    std::vector<double> partial(block_count(xs.size()));
    const auto nb = static_cast<std::ptrdiff_t>(partial.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < nb; ++b)
        partial[static_cast<std::size_t>(b)] = block_exp_sum(xs, static_cast<std::size_t>(b), m);
    return finish_lse(m, partial);
}

std::size_t mobius_cells(const MobiusProblem& problem) {
    std::size_t n = 1;
    for (int c : problem.cards) n *= static_cast<std::size_t>(c);
    return n;
}

void mobius_phi_serial(const MobiusProblem& problem, std::span<double> out) {
    check_problem(problem, out);
    const std::size_t base = reference_offset(problem);
    std::vector<int> digits(problem.axes.size() + 1);
    for (std::size_t cell = 0; cell < out.size(); ++cell) out[cell] = mobius_cell(problem, base, cell, digits.data());
}

void mobius_phi_parallel(const MobiusProblem& problem, std::span<double> out) {
    check_problem(problem, out);
    // Work per cell is 2^|C| lookups.
    const std::size_t work = out.size() << problem.axes.size();
    if (work < parallel_threshold) return mobius_phi_serial(problem, out);
    const std::size_t base = reference_offset(problem);
    const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel
    {
        std::vector<int> digits(problem.axes.size() + 1);
#pragma omp for schedule(static)
        for (std::ptrdiff_t cell = 0; cell < n; ++cell)
            out[static_cast<std::size_t>(cell)] =
                mobius_cell(problem, base, static_cast<std::size_t>(cell), digits.data());
    }
}

void linear_predictor_serial(const CsrMatrix& x, std::span<const double> theta, std::span<double> out) {
    for (std::size_t r = 0; r < x.rows; ++r) {
        double s = 0;
        for (std::size_t e = x.row_start[r]; e < x.row_start[r + 1]; ++e) s += x.value[e] * theta[x.col[e]];
        out[r] = s;
    }
}

void linear_predictor_parallel(const CsrMatrix& x, std::span<const double> theta, std::span<double> out) {
    if (x.rows < parallel_threshold) return linear_predictor_serial(x, theta, out);
    const auto n = static_cast<std::ptrdiff_t>(x.rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ri = 0; ri < n; ++ri) {
        const auto r = static_cast<std::size_t>(ri);
        double s = 0;
        for (std::size_t e = x.row_start[r]; e < x.row_start[r + 1]; ++e) s += x.value[e] * theta[x.col[e]];
        out[r] = s;
    }
}

void weighted_feature_sum_serial(const CsrMatrix& x, std::span<const double> w, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> acc(x.cols);
    for (std::size_t b = 0; b < block_count(x.rows); ++b) {
        std::fill(acc.begin(), acc.end(), 0.0);
        csr_row_block_sum(x, w, b, acc.data());
        for (std::size_t c = 0; c < x.cols; ++c) out[c] += acc[c];
    }
}

void weighted_feature_sum_parallel(const CsrMatrix& x, std::span<const double> w, std::span<double> out) {
    if (x.rows < parallel_threshold) return weighted_feature_sum_serial(x, w, out);
    const std::size_t nb = block_count(x.rows);
    std::vector<double> partial(nb * x.cols, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nb); ++b)
        csr_row_block_sum(x, w, static_cast<std::size_t>(b), &partial[static_cast<std::size_t>(b) * x.cols]);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t c = 0; c < x.cols; ++c) out[c] += partial[b * x.cols + c];
}

} // namespace lcf::kernels
