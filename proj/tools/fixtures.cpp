#include "fixtures.hpp"

#include <utility>

#include "lcf/error.hpp"

namespace lcf::fixtures {

namespace {

Graph with_vertices(std::initializer_list<const char*> names) {
    Graph g;
    for (const auto* n : names) g.add_random(n);
    return g;
}

// B and C point into each of D, E, F in every member of the class.
void add_bc_parents(Graph& g) {
    for (const auto* child : {"D", "E", "F"}) {
        g.add_directed("B", child);
        g.add_directed("C", child);
    }
}

} // namespace

Graph fig1a() {
    Graph g = with_vertices({"A", "B", "C", "D"});
    g.add_undirected("A", "B");
    g.add_undirected("A", "C");
    g.add_undirected("B", "D");
    g.add_undirected("C", "D");
    return g;
}

Graph fig1b() {
    Graph g = with_vertices({"A", "B", "C", "D", "E", "F"});
    g.add_directed("A", "B");
    g.add_directed("A", "C");
    add_bc_parents(g);
    g.add_directed("D", "E");
    g.add_directed("D", "F");
    g.add_directed("E", "F");
    return g;
}

Graph fig1c() {
    Graph g = with_vertices({"A", "B", "C", "D", "E", "F"});
    g.add_directed("B", "A");
    g.add_directed("A", "C");
    add_bc_parents(g);
    g.add_directed("E", "D");
    g.add_directed("F", "D");
    g.add_directed("F", "E");
    return g;
}

Graph fig1d() {
    Graph g = with_vertices({"A", "B", "C", "D", "E", "F"});
    g.add_directed("A", "B");
    g.add_directed("C", "A");
    add_bc_parents(g);
    g.add_directed("E", "D");
    g.add_directed("F", "D");
    g.add_directed("F", "E");
    return g;
}

Graph fig1e() {
    Graph g = with_vertices({"A", "B", "C", "D", "E", "F"});
    g.add_undirected("A", "B");
    g.add_undirected("A", "C");
    add_bc_parents(g);
    g.add_undirected("D", "E");
    g.add_undirected("D", "F");
    g.add_undirected("E", "F");
    return g;
}

Graph lattice3x3() {
    Graph g;
    for (int i = 1; i <= 9; ++i) g.add_random("V" + std::to_string(i));
    auto name = [](int r, int c) { return "V" + std::to_string(3 * r + c + 1); };
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            if (c + 1 < 3) g.add_undirected(name(r, c), name(r, c + 1));
            if (r + 1 < 3) g.add_undirected(name(r, c), name(r + 1, c));
        }
    return g;
}

Graph binary_tree15() {
    Graph g;
    for (int i = 1; i <= 8; ++i) g.add_random("L" + std::to_string(i));
    for (const auto* h : {"H12", "H34", "H56", "H78", "H1_4", "H5_8", "H1_8"}) g.add_random(h);
    const std::pair<const char*, const char*> edges[] = {
        {"L1", "H12"},  {"L2", "H12"},  {"L3", "H34"},  {"L4", "H34"},  {"L5", "H56"},
        {"L6", "H56"},  {"L7", "H78"},  {"L8", "H78"},  {"H12", "H1_4"}, {"H34", "H1_4"},
        {"H56", "H5_8"}, {"H78", "H5_8"}, {"H1_4", "H1_8"}, {"H5_8", "H1_8"},
    };
    for (auto [a, b] : edges) g.add_undirected(a, b);
    return g;
}

std::vector<std::string> names() {
    return {"fig1a", "fig1b", "fig1c", "fig1d", "fig1e", "lattice", "tree"};
}

Graph by_name(const std::string& name) {
    if (name == "fig1a") return fig1a();
    if (name == "fig1b") return fig1b();
    if (name == "fig1c") return fig1c();
    if (name == "fig1d") return fig1d();
    if (name == "fig1e") return fig1e();
    if (name == "lattice") return lattice3x3();
    if (name == "tree") return binary_tree15();
    throw Error("unknown fixture '" + name + "'");
}

} // namespace lcf::fixtures
