#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "fixtures.hpp"
#include "helpers.hpp"
#include "lcf/fitscore.hpp"
#include "oracles.hpp"

using namespace lcf;

namespace {

Graph complete(const std::vector<int>& cards) {
    Graph g;
    for (std::size_t i = 0; i < cards.size(); ++i) g.add_random("V" + std::to_string(i + 1), cards[i]);
    for (std::size_t i = 0; i < cards.size(); ++i)
        for (std::size_t j = i + 1; j < cards.size(); ++j) g.add_undirected(i, j);
    return g;
}

// V1 - V2 - V3 with W -> V1, U -> {V2, V3}.
Graph conditional_chain() {
    Graph g;
    g.add_random("V1", 3);
    g.add_random("V2");
    g.add_random("V3");
    g.add_fixed("W");
    g.add_fixed("U", 3);
    g.add_undirected("V1", "V2");
    g.add_undirected("V2", "V3");
    g.add_directed("W", "V1");
    g.add_directed("U", "V2");
    g.add_directed("U", "V3");
    return g;
}

// Every cell of p as a weighted row.
SampleSet population(const TabularDistribution& p) {
    SampleSet s;
    for (const auto& v : p.variables()) s.variables.push_back(v.name);
    for (const auto& v : p.context()) s.variables.push_back(v.name);
    for (std::size_t c = 0; c < p.context_count(); ++c)
        for (std::size_t i = 0; i < p.state_count(); ++i) {
            auto row = p.states().decode(i);
            const auto w = p.contexts().decode(c);
            row.insert(row.end(), w.begin(), w.end());
            s.rows.push_back(row);
            s.weights.push_back(std::exp(p.log_prob(c, i)));
        }
    return s;
}

double fd_relative_error(const ModelParams& m, const SampleSet& data) {
    const auto lg = loglik_and_gradient(m, data);
    auto theta = flatten(m);
    double worst = 0, scale = 0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        auto mp = m, mm = m;
        auto tp = theta, tm = theta;
        tp[i] += 1e-5;
        tm[i] -= 1e-5;
        assign(mp, tp);
        assign(mm, tm);
        const double fd = (loglik_and_gradient(mp, data).loglik - loglik_and_gradient(mm, data).loglik) / (2e-5 * lg.n);
        worst = std::max(worst, std::abs(fd - lg.gradient[i]));
        scale = std::max(scale, std::abs(lg.gradient[i]));
    }
    return worst / std::max(scale, 1e-300);
}

} // namespace

TEST_SUITE("fitscore") {

TEST_CASE("parameter counts") {
    CHECK(param_count(make_params(complete({2, 2, 2}))) == 7);
    CHECK(param_count(make_params(fixtures::fig1a())) == 8);
    Graph edgeless;
    for (int i = 0; i < 5; ++i) edgeless.add_random("V" + std::to_string(i));
    CHECK(param_count(make_params(edgeless)) == 5);
    std::mt19937_64 rng(51);
    for (int trial = 0; trial < 10; ++trial) {
        const auto cards = testing::random_cards(rng, 1 + static_cast<std::size_t>(trial) % 4, 2, 4);
        const auto expect = std::accumulate(cards.begin(), cards.end(), 1, std::multiplies<>()) - 1;
        CHECK(param_count(make_params(complete(cards))) == static_cast<std::size_t>(expect));
    }
    // Contexts multiply: V1 (2 per W level), V2 and V3 (1 per U level), two edges with C* = {}, {U}.
    const auto m = make_params(conditional_chain());
    CHECK(param_count(m) == 2 * 2 + 3 + 3 + 2 * 1 + 1 * 3);
    CHECK(param_count(make_params(conditional_chain(), Family::transformed_linear)) == 4 + 3 + 3 + 1 + 1);
}

TEST_CASE("zero parameters give the uniform table") {
    const auto p = params_to_distribution(make_params(fixtures::fig1a()));
    for (double lp : p.log_table()) CHECK(lp == doctest::Approx(std::log(1.0 / 16)).epsilon(1e-14));
}

TEST_CASE("two-by-two fixture from its parameters") {
    Graph g;
    g.add_random("A");
    g.add_random("B");
    g.add_undirected("A", "B");
    auto m = make_params(g);
    const std::vector<double> theta{std::log(0.5), std::log(0.25), std::log(6.0)};
    assign(m, theta);
    const auto p = params_to_distribution(m);
    const auto fix = testing::fix_ab();
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(p.log_prob(0, i) - fix.log_prob(0, i)) <= 1e-12);
}

TEST_CASE("parameters round-trip through the factorization") {
    std::mt19937_64 rng(52);
    const std::vector<Graph> graphs{fixtures::fig1a(), conditional_chain(), complete({3, 2, 2})};
    for (int trial = 0; trial < 30; ++trial) {
        const Graph& g = graphs[static_cast<std::size_t>(trial) % graphs.size()];
        std::vector<Variable> rv;
        for (auto v : g.random_vertices()) rv.push_back({g.name(v), g.vertex(v).cardinality});
        const auto ref = testing::random_ref(rng, rv);
        const auto m = testing::random_params(rng, g, ref, 3.0);
        const auto p = params_to_distribution(m);
        const auto back = params_from_factorization(lc_factorize(p, g, ref));
        const auto a = flatten(m), b = flatten(back);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-9);
    }
}

TEST_CASE("any finite parameters give a valid table") {
    std::mt19937_64 rng(53);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = testing::random_params(rng, conditional_chain(), {}, 4.0);
        const auto p = params_to_distribution(m);
        CHECK(p.positive());
    }
}

TEST_CASE("the parameter map has full-rank Jacobian on small binary graphs") {
    std::mt19937_64 rng(54);
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t k = 1 + static_cast<std::size_t>(trial) % 3;
        const Graph g = testing::random_ug(rng, testing::vars(std::vector<int>(k, 2)), 0.6);
        const auto m = testing::random_params(rng, g, {}, 1.0);
        const auto theta = flatten(m);
        const auto cells = params_to_distribution(m).log_table().size();
        Eigen::MatrixXd jac(static_cast<Eigen::Index>(cells), static_cast<Eigen::Index>(theta.size()));
        for (std::size_t j = 0; j < theta.size(); ++j) {
            auto mp = m, mm = m;
            auto tp = theta, tm = theta;
            tp[j] += 1e-6;
            tm[j] -= 1e-6;
            assign(mp, tp);
            assign(mm, tm);
            const auto dp = params_to_distribution(mp), dm = params_to_distribution(mm);
            const auto lp = dp.log_table(), lm = dm.log_table();
            for (std::size_t i = 0; i < cells; ++i)
                jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (lp[i] - lm[i]) / 2e-6;
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac);
        qr.setThreshold(1e-7);
        CHECK(static_cast<std::size_t>(qr.rank()) == param_count(m));
    }
}

TEST_CASE("log-likelihood matches direct evaluation; gradient matches finite differences") {
    std::mt19937_64 rng(55);
    for (int trial = 0; trial < 12; ++trial) {
        const Graph g = trial % 2 ? conditional_chain() : fixtures::fig1a();
        const auto family = trial % 3 == 0 ? Family::transformed_linear : Family::free;
        const auto m = testing::random_params(rng, g, {}, 1.0, family);
        const auto truth = params_to_distribution(testing::random_params(rng, g, {}, 1.0));
        const auto data = sample(truth, 300, 60 + static_cast<std::uint64_t>(trial));
        const auto lg = loglik_and_gradient(m, data);
        CHECK(lg.n == 300);
        CHECK(lg.loglik == doctest::Approx(oracle::loglik(params_to_distribution(m), data)).epsilon(1e-11));
        CHECK(fd_relative_error(m, data) <= 1e-6);
    }
}

TEST_CASE("duplicated data doubles the log-likelihood and keeps the gradient") {
    std::mt19937_64 rng(56);
    const auto m = testing::random_params(rng, fixtures::fig1a(), {}, 1.0);
    const auto data = sample(params_to_distribution(m), 200, 3);
    auto twice = data;
    twice.rows.insert(twice.rows.end(), data.rows.begin(), data.rows.end());
    const auto a = loglik_and_gradient(m, data), b = loglik_and_gradient(m, twice);
    CHECK(b.loglik == 2 * a.loglik);
    CHECK(b.gradient == a.gradient);
}

TEST_CASE("zero parameters on uniform data have zero gradient") {
    const auto m = make_params(fixtures::fig1a());
    SampleSet s;
    s.variables = {"A", "B", "C", "D"};
    for (const auto& st : oracle::all_states({2, 2, 2, 2})) s.rows.push_back(st);
    const auto lg = loglik_and_gradient(m, s);
    for (double g : lg.gradient) CHECK(std::abs(g) <= 1e-15);
}

TEST_CASE("transformed linear interaction") {
    const std::vector<double> ones{1, 1}, zeros{0, 0};
    CHECK(transformed_linear_phi(1.7, ones, zeros) == doctest::Approx(1.7));
    CHECK(transformed_linear_phi(0.0, ones, zeros) == 0.0);
    const std::vector<double> one_at_ref{1, 0};
    CHECK(transformed_linear_phi(2.3, one_at_ref, zeros) == 0.0);
    const std::vector<double> scored{3.0, -1.0}, base{1.0, 0.5};
    CHECK(transformed_linear_phi(0.5, scored, base) == doctest::Approx(0.5 * 2.0 * -1.5));
}

TEST_CASE("fitting: trace, independence, determinism") {
    const Graph g = fixtures::fig1a();
    Graph empty;
    for (const auto* n : {"A", "B", "C", "D"}) empty.add_random(n);
    std::mt19937_64 rng(57);
    const auto indep = params_to_distribution(testing::random_params(rng, empty, {}, 0.5));
    const auto data = sample(indep, 10000, 11);
    const auto fit = fit_mle(g, data);
    CHECK(fit.converged);
    CHECK(fit.grad_norm <= 1e-8);
    for (std::size_t i = 1; i < fit.trace.size(); ++i) CHECK(fit.trace[i] >= fit.trace[i - 1]);
    CHECK(fit.loglik == fit.trace.back());
    for (const auto& b : fit.params.interactions)
        for (double x : b.values) CHECK(std::abs(x) <= 0.1);
    const auto again = fit_mle(g, data);
    CHECK(flatten(again.params) == flatten(fit.params));
    CHECK(again.trace == fit.trace);
}

TEST_CASE("saturated fit reproduces the empirical table") {
    std::mt19937_64 rng(58);
    for (int trial = 0; trial < 4; ++trial) {
        const auto cards = testing::random_cards(rng, 3);
        const Graph g = complete(cards);
        const auto p = params_to_distribution(testing::random_params(rng, g, {}, 0.5));
        const auto data = sample(p, 5000, 70 + static_cast<std::uint64_t>(trial));
        const auto fit = fit_mle(g, data);
        CHECK(fit.converged);
        const auto e = empirical_distribution(data, p.variables());
        CHECK(total_variation(params_to_distribution(fit.params), e) <= 1e-6);
    }
}

TEST_CASE("population data recovers an in-model table") {
    std::mt19937_64 rng(59);
    for (const Graph& g : {fixtures::fig1a(), conditional_chain()}) {
        const auto p = params_to_distribution(testing::random_params(rng, g, {}, 1.5));
        const auto fit = fit_mle(g, population(p));
        CHECK(fit.converged);
        CHECK(total_variation(params_to_distribution(fit.params), p) <= 1e-6);
    }
}

TEST_CASE("transformed linear fits") {
    std::mt19937_64 rng(60);
    // Binary with level-index scores, the two families coincide.
    const auto p = params_to_distribution(testing::random_params(rng, fixtures::fig1a(), {}, 1.0));
    const auto data = sample(p, 3000, 12);
    FitOptions tl;
    tl.family = Family::transformed_linear;
    const auto a = fit_mle(fixtures::fig1a(), data), b = fit_mle(fixtures::fig1a(), data, tl);
    CHECK(a.converged);
    CHECK(b.converged);
    CHECK(b.loglik == doctest::Approx(a.loglik).epsilon(1e-10));

    // Ternary: one γ per clique recovers a transformed-linear model from population data.
    Graph g = complete({3, 3});
    auto m = testing::random_params(rng, g, {}, 1.0, Family::transformed_linear);
    m.scores = {{0.0, 1.0, 3.0}, {0.0, -1.0, 0.5}};
    const auto q = params_to_distribution(m);
    tl.scores = m.scores;
    const auto fit = fit_mle(g, population(q), tl);
    CHECK(fit.converged);
    CHECK(std::abs(fit.params.interactions[0].values[0] - m.interactions[0].values[0]) <= 1e-6);
}

TEST_CASE("pseudo-counts make empty cells fit") {
    Graph g = complete({2, 2});
    SampleSet s;
    s.variables = {"V1", "V2"};
    s.rows = {{0, 0}, {0, 1}, {1, 0}, {0, 0}};
    FitOptions o;
    o.max_iter = 500;
    CHECK_FALSE(fit_mle(g, s, o).converged);
    o.pseudo_count = 0.5;
    const auto fit = fit_mle(g, s, o);
    CHECK(fit.converged);
    // Smoothed counts (2.5, 1.5, 1.5, 0.5) are matched exactly.
    const auto p = params_to_distribution(fit.params);
    CHECK(std::exp(p.log_prob(0, 3)) == doctest::Approx(0.5 / 6).epsilon(1e-7));
}

TEST_CASE("data must cover the model's variables") {
    SampleSet s;
    s.variables = {"A", "B"};
    s.rows = {{0, 1}};
    CHECK_THROWS(loglik_and_gradient(make_params(fixtures::fig1a()), s));
    s.variables = {"A", "B", "C", "D"};
    s.rows = {{0, 1, 2, 0}};
    CHECK_THROWS(loglik_and_gradient(make_params(fixtures::fig1a()), s));
}

}
