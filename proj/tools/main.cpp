#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "degfrac/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Series solutions of degenerate time-fractional equations of arbitrary spatial order"};
    app.require_subcommand(1);

    std::string config;
    auto* solve = app.add_subcommand("solve", "solve the problem in a JSON config; writes field.csv and diagnostics.json");
    solve->add_option("config", config, "path to the JSON config")->required();

    auto* eigs = app.add_subcommand("eigs", "compute the spectrum; writes spectrum.csv and eigenfunctions.csv");
    eigs->add_option("config", config, "path to the JSON config")->required();
    std::optional<std::size_t> modes;
    eigs->add_option("--modes", modes, "number of eigenpairs (default: config 'modes')");

    auto* ks = app.add_subcommand("ks", "evaluate the Kilbas-Saigo function E_{alpha,m,l}(z)");
    double alpha = 0.5, m = 1.0, l = 0.0, z = 0.0;
    ks->add_option("--alpha", alpha)->required();
    ks->add_option("--m", m)->required();
    ks->add_option("--l", l)->required();
    ks->add_option("--z", z)->required();

    auto* verify = app.add_subcommand("verify", "solve and run the consistency checks; writes verification.json");
    verify->add_option("config", config, "path to the JSON config")->required();

    auto* selftest = app.add_subcommand("selftest", "run the built-in benchmarks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : degfrac::cli::kExitConfig;
    }

    if (solve->parsed()) return degfrac::cli::cmd_solve(config, std::cout, std::cerr);
    if (eigs->parsed()) return degfrac::cli::cmd_eigs(config, modes, std::cout, std::cerr);
    if (ks->parsed()) return degfrac::cli::cmd_ks(alpha, m, l, z, std::cout, std::cerr);
    if (verify->parsed()) return degfrac::cli::cmd_verify(config, std::cout, std::cerr);
    if (selftest->parsed()) return degfrac::cli::cmd_selftest(std::cout, std::cerr);
    return degfrac::cli::kExitConfig;
}
