// Serial reference vs OpenMP variant of each kernel. Arg: problem size.

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "lcf/kernels.hpp"

using namespace lcf::kernels;

namespace {

std::vector<double> random_logs(std::size_t n) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d(-5, 2);
    std::vector<double> xs(n);
    for (auto& x : xs) x = d(rng);
    return xs;
}

// Design-like matrix: `per_row` nonzeros per row over `cols` columns.
CsrMatrix random_csr(std::size_t rows, std::size_t cols, std::size_t per_row) {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> c(0, cols - 1);
    CsrMatrix x;
    x.cols = cols;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = 0; k < per_row; ++k) x.push(c(rng), 1.0);
        x.end_row();
    }
    return x;
}

// Binary joint over `k` variables; problem is the full-size subset.
struct Mobius {
    std::vector<double> table;
    MobiusProblem problem;

    explicit Mobius(std::size_t k) : table(random_logs(std::size_t{1} << k)) {
        problem.log_row = table;
        for (std::size_t i = 0; i < k; ++i) {
            problem.strides.push_back(std::size_t{1} << (k - 1 - i));
            problem.reference.push_back(0);
            problem.axes.push_back(i);
            problem.cards.push_back(2);
        }
    }
};

template <double (*F)(std::span<const double>)>
void bm_log_sum_exp(benchmark::State& state) {
    const auto xs = random_logs(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(F(xs));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <void (*F)(const MobiusProblem&, std::span<double>)>
void bm_mobius(benchmark::State& state) {
    const Mobius m(static_cast<std::size_t>(state.range(0)));
    std::vector<double> out(mobius_cells(m.problem));
    for (auto _ : state) {
        F(m.problem, out);
        benchmark::ClobberMemory();
    }
}

template <void (*F)(const CsrMatrix&, std::span<const double>, std::span<double>)>
void bm_linear_predictor(benchmark::State& state) {
    const auto x = random_csr(static_cast<std::size_t>(state.range(0)), 64, 8);
    const auto theta = random_logs(64);
    std::vector<double> out(x.rows);
    for (auto _ : state) {
        F(x, theta, out);
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <void (*F)(const CsrMatrix&, std::span<const double>, std::span<double>)>
void bm_feature_sum(benchmark::State& state) {
    const auto x = random_csr(static_cast<std::size_t>(state.range(0)), 64, 8);
    const auto w = random_logs(x.rows);
    std::vector<double> out(64);
    for (auto _ : state) {
        F(x, w, out);
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

} // namespace

BENCHMARK(bm_log_sum_exp<log_sum_exp_serial>)->Name("log_sum_exp/serial")->RangeMultiplier(16)->Range(1 << 10, 1 << 22);
BENCHMARK(bm_log_sum_exp<log_sum_exp_parallel>)->Name("log_sum_exp/omp")->RangeMultiplier(16)->Range(1 << 10, 1 << 22);
BENCHMARK(bm_mobius<mobius_phi_serial>)->Name("mobius_phi/serial")->DenseRange(6, 12, 2);
BENCHMARK(bm_mobius<mobius_phi_parallel>)->Name("mobius_phi/omp")->DenseRange(6, 12, 2);
BENCHMARK(bm_linear_predictor<linear_predictor_serial>)->Name("linear_predictor/serial")->RangeMultiplier(16)->Range(1 << 10, 1 << 20);
BENCHMARK(bm_linear_predictor<linear_predictor_parallel>)->Name("linear_predictor/omp")->RangeMultiplier(16)->Range(1 << 10, 1 << 20);
BENCHMARK(bm_feature_sum<weighted_feature_sum_serial>)->Name("feature_sum/serial")->RangeMultiplier(16)->Range(1 << 10, 1 << 20);
BENCHMARK(bm_feature_sum<weighted_feature_sum_parallel>)->Name("feature_sum/omp")->RangeMultiplier(16)->Range(1 << 10, 1 << 20);

BENCHMARK_MAIN();
