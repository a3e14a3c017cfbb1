#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include <omp.h>

#include "lcf/kernels.hpp"
#include "oracles.hpp"

using namespace lcf::kernels;

namespace {

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

CsrMatrix random_csr(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double density) {
    CsrMatrix x;
    x.cols = cols;
    std::bernoulli_distribution keep(density);
    std::normal_distribution<double> val;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c)
            if (keep(rng)) x.push(c, val(rng));
        x.end_row();
    }
    return x;
}

} // namespace

TEST_SUITE("kernels") {

TEST_CASE("the parallel paths really run on several threads") {
    int seen = 0;
#pragma omp parallel
    {
#pragma omp single
        seen = omp_get_num_threads();
    }
    CHECK(seen >= 2);
}

TEST_CASE("log-sum-exp: serial and parallel agree bit for bit") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d(0, 30);
    for (std::size_t n : {1UL, 7UL, 1023UL, 1024UL, 4096UL, 5000UL, 70001UL}) {
        std::vector<double> xs(n);
        for (auto& x : xs) x = d(rng);
        const double s = log_sum_exp_serial(xs), p = log_sum_exp_parallel(xs);
        CHECK(std::memcmp(&s, &p, sizeof s) == 0);
        long double direct = 0;
        const double m = *std::max_element(xs.begin(), xs.end());
        for (double x : xs) direct += std::exp(static_cast<long double>(x - m));
        CHECK(s == doctest::Approx(m + std::log(static_cast<double>(direct))).epsilon(1e-12));
    }
    const std::vector<double> none;
    CHECK(std::isinf(log_sum_exp_serial(none)));
}

TEST_CASE("Möbius sums: serial, parallel and a signed product agree") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 12; ++trial) {
        // Up to 8 ternary-ish axes so the parallel branch gets real work.
        const std::size_t k = 2 + trial % 7;
        std::vector<int> cards(k);
        for (auto& c : cards) c = 2 + static_cast<int>(rng() % 3);
        const auto states = oracle::all_states(cards);
        std::vector<double> row(states.size());
        std::uniform_real_distribution<double> u(-3, 0);
        for (auto& x : row) x = u(rng);
        std::vector<std::size_t> strides(k);
        std::size_t s = 1;
        for (std::size_t i = k; i-- > 0;) {
            strides[i] = s;
            s *= static_cast<std::size_t>(cards[i]);
        }
        MobiusProblem pr;
        pr.log_row = row;
        pr.strides = strides;
        for (auto c : cards) pr.reference.push_back(static_cast<int>(rng() % static_cast<unsigned>(c)));
        for (std::size_t i = 0; i < k; ++i)
            if (i % 2 == 0 || i + 1 == k) pr.axes.push_back(i);
        for (auto a : pr.axes) pr.cards.push_back(cards[a]);
        const std::size_t cells = mobius_cells(pr);
        std::vector<double> a(cells), b(cells);
        mobius_phi_serial(pr, a);
        mobius_phi_parallel(pr, b);
        CHECK(bit_equal(a, b));

        const auto sub_states = oracle::all_states(pr.cards);
        REQUIRE(sub_states.size() == cells);
        for (std::size_t c = 0; c < cells; ++c) {
            double expect = 0;
            for (unsigned mask = 0; mask < (1U << pr.axes.size()); ++mask) {
                std::size_t at = 0;
                for (std::size_t i = 0; i < k; ++i) at += strides[i] * static_cast<std::size_t>(pr.reference[i]);
                std::size_t dropped = 0;
                for (std::size_t j = 0; j < pr.axes.size(); ++j) {
                    if (mask >> j & 1U) {
                        const auto ax = pr.axes[j];
                        at += strides[ax] * static_cast<std::size_t>(sub_states[c][j] - pr.reference[ax]);
                    } else {
                        ++dropped;
                    }
                }
                expect += (dropped % 2 ? -1.0 : 1.0) * row[at];
            }
            CHECK(a[c] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("sparse products: serial and parallel agree bit for bit") {
    std::mt19937_64 rng(3);
    for (std::size_t rows : {10UL, 1024UL, 4097UL, 20000UL}) {
        const auto x = random_csr(rng, rows, 17, 0.3);
        std::normal_distribution<double> d;
        std::vector<double> theta(17), w(rows);
        for (auto& t : theta) t = d(rng);
        for (auto& v : w) v = d(rng);

        std::vector<double> e1(rows), e2(rows);
        linear_predictor_serial(x, theta, e1);
        linear_predictor_parallel(x, theta, e2);
        CHECK(bit_equal(e1, e2));

        std::vector<double> g1(17), g2(17);
        weighted_feature_sum_serial(x, w, g1);
        weighted_feature_sum_parallel(x, w, g2);
        CHECK(bit_equal(g1, g2));

        // Dense reference.
        std::vector<double> dense_e(rows, 0.0), dense_g(17, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t i = x.row_start[r]; i < x.row_start[r + 1]; ++i) {
                dense_e[r] += x.value[i] * theta[x.col[i]];
                dense_g[x.col[i]] += x.value[i] * w[r];
            }
        for (std::size_t r = 0; r < rows; ++r) CHECK(e1[r] == doctest::Approx(dense_e[r]).epsilon(1e-12));
        for (std::size_t c = 0; c < 17; ++c) CHECK(g1[c] == doctest::Approx(dense_g[c]).epsilon(1e-9));
    }
}

}
