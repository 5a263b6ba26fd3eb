// Command-line entry point.
//
//   bowley {gen-data|solve|oracle|sweep|verify} --config <path> [--out <dir>] [--seed <u64>]
//
// BOWLEY_OUT and BOWLEY_SEED override the output directory and seed when the
// corresponding flag is absent.

#include <iostream>

#include <CLI11.hpp>

#include "bowley/commands.hpp"

namespace cmd = bowley::commands;

int main(int argc, char** argv) {
    CLI::App app{"Bowley insurance equilibria: data generation, bilevel solves and brute-force oracles"};
    app.require_subcommand(1);

    cmd::Options opt;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out, "output directory");
        sub->add_option("--seed", opt.seed, "seed (data seed for gen-data, solver seed otherwise)");
    };

    auto* gen = app.add_subcommand("gen-data", "write scenarios.csv from the configured data source");
    common(gen);
    gen->add_option("--n", opt.n, "number of synthetic scenarios")->check(CLI::Range(std::size_t{2}, std::size_t(1) << 24));
    gen->add_option("--basis-risk", opt.basis_risk, "noise level of Y given X")->check(CLI::NonNegativeNumber);
    gen->add_option("--rows", opt.rows, "weather indices per grid")->check(CLI::Range(std::size_t{1}, std::size_t{64}));

    auto* solve = app.add_subcommand("solve", "run the penalised bilevel solver");
    common(solve);
    auto* oracle = app.add_subcommand("oracle", "grid-search the leader with a stop-loss follower");
    common(oracle);
    auto* sweep = app.add_subcommand("sweep", "solve once per value of the configured sweep parameter");
    common(sweep);
    auto* verify = app.add_subcommand("verify", "re-check every report under the output directory");
    common(verify);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return cmd::kConfigError;
    }

    if (gen->parsed()) return cmd::gen_data(opt);
    if (solve->parsed()) return cmd::solve_cmd(opt);
    if (oracle->parsed()) return cmd::oracle_cmd(opt);
    if (sweep->parsed()) return cmd::sweep_cmd(opt);
    return cmd::verify_cmd(opt);
}
