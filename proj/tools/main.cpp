#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "cli.hpp"
#include "fixtures.hpp"
#include "lcf/settings.hpp"

int main(int argc, char** argv) {
    using namespace lcf::cli;
    lcf::load_settings_from_env();

    CLI::App app{"Reference-anchored factorizations of discrete graphical models"};
    app.require_subcommand(1);
    RunConfig config;
    std::string ref_spec, order_spec;

    const std::map<std::string, lcf::Penalty> penalties{{"bic", lcf::Penalty::bic}, {"none", lcf::Penalty::none}};
    const std::map<std::string, lcf::Family> families{{"free", lcf::Family::free},
                                                      {"tlor", lcf::Family::transformed_linear}};

    auto common = [&](CLI::App* sub) {
        sub->add_option("--out", config.out_path, "Write the report here instead of stdout");
        sub->add_option("--ref", ref_spec, "Reference levels, e.g. A=1,B=0 (default 0)");
        sub->add_option("--tol", config.tol, "Tolerance for every check")->check(CLI::PositiveNumber);
        sub->add_option("--max-subsets", config.max_subsets, "Subset-lattice cap (overrides LCF_MAX_SUBSETS)");
    };
    auto with_graph = [&](CLI::App* sub, bool required) {
        auto* o = sub->add_option("--graph", config.graph_path, "Graph file");
        if (required) o->required();
    };
    auto with_dist = [&](CLI::App* sub) {
        sub->add_option("--dist", config.dist_path, "Distribution file")->required();
    };
    auto with_samples = [&](CLI::App* sub) {
        sub->add_option("--samples", config.samples_path, "Sample file")->required();
    };
    auto with_fit = [&](CLI::App* sub) {
        sub->add_option("--fit-tol", config.fit_tol, "Gradient max-norm at convergence")->check(CLI::PositiveNumber);
        sub->add_option("--max-iter", config.max_iter, "Iteration limit of the optimizer");
    };

    auto* factorize = app.add_subcommand("factorize", "Factorize a distribution against a graph and check it");
    common(factorize);
    with_graph(factorize, true);
    with_dist(factorize);
    factorize->add_option("--diag-size", config.diagnostic_max_size, "Largest non-clique subset checked");

    auto* chen = app.add_subcommand("chen", "Order-based odds-ratio decomposition");
    common(chen);
    with_dist(chen);
    chen->add_option("--order", order_spec, "Variable order, e.g. C,A,B (default declaration order)");

    auto* verify = app.add_subcommand("verify", "Markov, restriction and normalizer checks only");
    common(verify);
    with_graph(verify, true);
    with_dist(verify);
    verify->add_option("--diag-size", config.diagnostic_max_size, "Largest non-clique subset checked");

    auto* essential = app.add_subcommand("essential", "Essential graph of a DAG");
    common(essential);
    with_graph(essential, true);

    auto* enumerate = app.add_subcommand("enumerate", "Every DAG in a Markov equivalence class");
    common(enumerate);
    with_graph(enumerate, true);

    auto* score = app.add_subcommand("score", "Class-coherent chain-graph score");
    common(score);
    with_graph(score, true);
    with_samples(score);
    with_fit(score);
    score->add_option("--penalty", config.penalty, "bic or none")
        ->transform(CLI::CheckedTransformer(penalties, CLI::ignore_case));

    auto* fit = app.add_subcommand("fit", "Maximum-likelihood fit; emits a parameter file");
    common(fit);
    with_graph(fit, true);
    with_samples(fit);
    with_fit(fit);
    fit->add_option("--family", config.family, "free or tlor")
        ->transform(CLI::CheckedTransformer(families, CLI::ignore_case));

    auto* gen = app.add_subcommand("gen", "Random positive distribution, in-model distribution or samples");
    common(gen);
    with_graph(gen, true);
    gen->add_option("--seed", config.seed, "Seed for every random draw");
    gen->add_option("--samples", config.samples, "Emit this many sample rows from an in-model distribution");
    gen->add_flag("--in-model", config.in_model, "Draw the distribution from the graph's model");
    gen->add_option("--family", config.family, "Parameter family for in-model draws")
        ->transform(CLI::CheckedTransformer(families, CLI::ignore_case));

    auto* demo = app.add_subcommand("demo", "Emit the built-in example graphs");
    common(demo);
    demo->add_option("--fixture", config.fixture, "One fixture")->check(CLI::IsMember(lcf::fixtures::names()));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_code::ok : exit_code::input_error;
    }

    config.command = *parse_command(app.get_subcommands().front()->get_name());
    try {
        if (!ref_spec.empty()) config.ref_spec = parse_ref_spec(ref_spec);
        if (!order_spec.empty()) {
            std::stringstream in(order_spec);
            for (std::string n; std::getline(in, n, ',');) config.order_spec.push_back(n);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code::input_error;
    }

    const RunResult result = run(config);
    if (result.status == exit_code::input_error) {
        std::cerr << "error: " << result.message << '\n';
        return result.status;
    }
    if (config.out_path.empty()) std::cout << result.output;
    return result.status;
}
