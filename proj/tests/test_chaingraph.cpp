#include <doctest.h>

#include <cstring>
#include <map>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "helpers.hpp"
#include "lcf/chaingraph.hpp"
#include "lcf/error.hpp"
#include "oracles.hpp"

using namespace lcf;

namespace {

std::set<std::vector<std::pair<std::size_t, std::size_t>>> edge_sets(const std::vector<Graph>& gs) {
    std::set<std::vector<std::pair<std::size_t, std::size_t>>> out;
    for (const auto& g : gs) out.insert(g.directed_edges());
    return out;
}

bool bit_same(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

} // namespace

TEST_SUITE("chaingraph") {

TEST_CASE("the three DAGs share the stated essential graph") {
    const Graph e = fixtures::fig1e();
    for (const auto& dag : {fixtures::fig1b(), fixtures::fig1c(), fixtures::fig1d()}) {
        const Graph got = essential_graph(dag);
        CHECK(got == e);
        CHECK(got.undirected_edges() == e.undirected_edges());
        CHECK(got.directed_edges() == e.directed_edges());
    }
}

TEST_CASE("essential graph agrees with the brute-force class intersection") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 120; ++trial) {
        const Graph dag = testing::random_dag(rng, 3 + static_cast<std::size_t>(trial) % 4, 0.5);
        const Graph e = essential_graph(dag);
        CHECK(e == oracle::essential(dag));
        CHECK(validate_chain_graph(e).valid);
    }
}

TEST_CASE("the example class has eighteen members") {
    const Graph e = fixtures::fig1e();
    const auto cls = enumerate_equivalence_class(e);
    CHECK(cls.members.size() == 18);
    CHECK(cls.essential == e);
    const auto got = edge_sets(cls.members);
    CHECK(got.size() == 18);
    for (const auto& dag : {fixtures::fig1b(), fixtures::fig1c(), fixtures::fig1d()})
        CHECK(got.count(dag.directed_edges()) == 1);
    CHECK(got == edge_sets(oracle::class_members(fixtures::fig1b())));
    const auto pat = oracle::pattern(fixtures::fig1b());
    for (const auto& m : cls.members) {
        CHECK(m.is_dag());
        CHECK(essential_graph(m) == e);
        CHECK(oracle::pattern(m) == pat);
        CHECK(markov_equivalent(m, fixtures::fig1b()));
    }
    for (std::size_t i = 1; i < cls.members.size(); ++i)
        CHECK(cls.members[i - 1].directed_edges() < cls.members[i].directed_edges());
}

TEST_CASE("class enumeration matches the partition of all DAGs on four vertices") {
    for (std::size_t n = 1; n <= 4; ++n) {
        std::map<std::pair<std::set<std::pair<std::size_t, std::size_t>>, std::set<std::vector<std::size_t>>>,
                 std::vector<Graph>>
            classes;
        const auto dags = oracle::all_dags(n);
        for (const auto& d : dags) classes[oracle::pattern(d)].push_back(d);
        std::size_t covered = 0;
        for (const auto& [key, members] : classes) {
            const Graph e = essential_graph(members.front());
            const auto cls = enumerate_equivalence_class(e);
            CHECK(edge_sets(cls.members) == edge_sets(members));
            covered += cls.members.size();
            for (const auto& m : members) CHECK(essential_graph(m) == e);
            CHECK(edge_sets({consistent_extension(e)}).size() == 1);
            CHECK(oracle::pattern(consistent_extension(e)) == key);
        }
        CHECK(covered == dags.size());
    }
    CHECK(oracle::all_dags(4).size() == 543);
}

TEST_CASE("markov equivalence is skeleton plus colliders") {
    Graph chain, collider, fork;
    for (auto* g : {&chain, &collider, &fork})
        for (const auto* n : {"A", "B", "C"}) g->add_random(n);
    chain.add_directed("A", "B");
    chain.add_directed("B", "C");
    fork.add_directed("B", "A");
    fork.add_directed("B", "C");
    collider.add_directed("A", "B");
    collider.add_directed("C", "B");
    CHECK(markov_equivalent(chain, fork));
    CHECK_FALSE(markov_equivalent(chain, collider));
    CHECK(essential_graph(collider) == collider);
    CHECK(enumerate_equivalence_class(essential_graph(collider)).members.size() == 1);
    CHECK(enumerate_equivalence_class(essential_graph(chain)).members.size() == 3);
}

TEST_CASE("enumeration refuses non-CPDAGs and oversized classes") {
    Graph g;
    for (const auto* n : {"A", "B", "C"}) g.add_random(n);
    g.add_undirected("A", "B");
    g.add_directed("C", "B");  // C -> B - A would force a new collider or a compelled edge
    CHECK_THROWS_AS(enumerate_equivalence_class(g), Error);

    Graph big;
    for (int i = 0; i < 7; ++i) big.add_random("V" + std::to_string(i));
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = i + 1; j < 7; ++j) big.add_undirected(i, j);
    CHECK_THROWS_AS(enumerate_equivalence_class(big), CapExceeded);
    Graph fixed;
    fixed.add_fixed("W");
    fixed.add_random("A");
    fixed.add_directed("W", "A");
    CHECK_THROWS(essential_graph(fixed));
}

TEST_CASE("chain-graph factorization of the essential graph") {
    const Graph e = fixtures::fig1e();
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const auto p = testing::random_dag_model(fixtures::fig1b(), seed);
        ReferenceAssignment ref;
        if (seed == 2) ref.set("E", 1);
        const auto cf = cg_lc_factorize(p, e, ref);
        REQUIRE(cf.blocks.size() == 2);
        CHECK(e.names_of(cf.blocks[0]) == std::vector<std::string>{"A", "B", "C"});
        CHECK(e.names_of(cf.blocks[1]) == std::vector<std::string>{"D", "E", "F"});
        CHECK(e.names_of(cf.block_parents[1]) == std::vector<std::string>{"B", "C"});
        CHECK(cf.reconstruction_error <= 1e-9);

        const auto& f2 = cf.per_block[1];
        std::vector<std::string> labels;
        for (const auto& t : f2.phi_terms) labels.push_back(t.label());
        CHECK(labels == std::vector<std::string>{"phi {D,E}", "phi {D,F}", "phi {E,F}", "phi {D,E,F}"});
        for (const auto& t : f2.phi_terms) CHECK(testing::names(t.context) == std::vector<std::string>{"B", "C"});
        CHECK(f2.diagnostics.nonclique.empty());
        CHECK(cf.per_block[0].diagnostics.nonclique.empty());
        CHECK(cf.per_block[0].phi_terms.size() == 2);

        // Pairwise terms are odds ratios with the third variable at reference;
        // the triple term is the ratio of conditional odds ratios.
        const auto& cond = cf.outer[1];
        const int fref = ref.level("F");
        for (const auto& w : oracle::all_states({2, 2}))
            for (const auto& s : oracle::all_states({2, 2, 2})) {
                const double orr = generalized_odds_ratio(cond, {{"D", s[0]}}, {{"E", s[1]}}, {}, w, ref);
                CHECK(std::abs(f2.find_phi({"D", "E"})->log_value(std::vector<int>{s[0], s[1]}, w) - orr) <= 1e-9);
                const double ratio = generalized_odds_ratio(cond, {{"D", s[0]}}, {{"E", s[1]}}, {{"F", s[2]}}, w, ref) -
                                     generalized_odds_ratio(cond, {{"D", s[0]}}, {{"E", s[1]}}, {{"F", fref}}, w, ref);
                CHECK(std::abs(f2.find_phi({"D", "E", "F"})->log_value(s, w) - ratio) <= 1e-9);
            }
    }
}

TEST_CASE("DAG log-likelihood is constant on the class") {
    const auto cls = enumerate_equivalence_class(fixtures::fig1e());
    for (std::uint64_t seed : {5ULL, 6ULL}) {
        const auto p = testing::random_dag_model(fixtures::fig1c(), seed);
        const double base = dag_loglik(p, fixtures::fig1b());
        for (const auto& m : cls.members) CHECK(std::abs(dag_loglik(p, m) - base) <= 1e-9);
        // Population form is minus the entropy when the DAG holds.
        double h = 0;
        for (double lp : p.log_table()) h += std::exp(lp) * lp;
        CHECK(std::abs(base - h) <= 1e-9);
    }
}

TEST_CASE("class-coherent score is identical across members") {
    // Flat enough that every cell is observed, so the block fits converge.
    const auto p = testing::random_dag_model(fixtures::fig1d(), 7, 4.0);
    const auto data = sample(p, 4000, 8);
    const auto cls = enumerate_equivalence_class(fixtures::fig1e());
    const auto ref = class_coherent_score(data, fixtures::fig1b());
    CHECK(ref.converged);
    CHECK(ref.dimension == 33);
    CHECK(ref.n == 4000);
    CHECK(ref.score == doctest::Approx(ref.loglik - 0.5 * 33 * std::log(4000.0)));
    const double dl = dag_loglik(data, fixtures::fig1b());
    CHECK(std::abs(ref.loglik - dl) <= 1e-6 * std::abs(dl));
    for (const auto& m : cls.members) {
        const auto s = class_coherent_score(data, m);
        CHECK(bit_same(s.score, ref.score));
        CHECK(bit_same(s.loglik, ref.loglik));
        CHECK(std::abs(dag_loglik(data, m) - dl) <= 1e-9 * std::abs(dl));
    }
    CHECK(bit_same(class_coherent_score(data, fixtures::fig1e()).score, ref.score));
    ScoreOptions none;
    none.penalty = Penalty::none;
    CHECK(bit_same(class_coherent_score(data, fixtures::fig1c(), none).score, ref.loglik));
}

TEST_CASE("the generating class scores higher than a non-equivalent one") {
    Graph chain, collider;
    for (auto* g : {&chain, &collider})
        for (const auto* n : {"A", "B", "C"}) g->add_random(n);
    chain.add_directed("A", "B");
    chain.add_directed("B", "C");
    collider.add_directed("A", "B");
    collider.add_directed("C", "B");
    const auto p = testing::random_dag_model(chain, 9, 0.5);
    const auto data = sample(p, 10000, 10);
    const auto s_chain = class_coherent_score(data, chain);
    const auto s_coll = class_coherent_score(data, collider);
    CHECK(s_chain.score > s_coll.score);
    CHECK(s_chain.dimension == 5);
    CHECK(s_coll.dimension == 6);
}

TEST_CASE("sample log-likelihood uses plug-in conditionals") {
    Graph g;
    g.add_random("A");
    g.add_random("B");
    g.add_directed("A", "B");
    SampleSet s;
    s.variables = {"A", "B"};
    s.rows = {{0, 0}, {0, 1}, {1, 1}, {1, 1}};
    // p(a) = (1/2, 1/2); p(b|a=0) = (1/2, 1/2); p(b|a=1) = (0, 1).
    CHECK(dag_loglik(s, g) == doctest::Approx(4 * std::log(0.5) + 2 * std::log(0.5)));
}

}
