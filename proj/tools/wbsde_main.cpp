#include "wbsde/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo solver suite for weighted BSDEs and related PDE probes"};
    app.require_subcommand(1);

    std::string config_path;
    std::string artifacts;
    int workers = -1;

    auto* run = app.add_subcommand("run", "execute the experiments of a config file");
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    run->add_option("--artifacts", artifacts, "artifact directory (overrides config/env)");
    run->add_option("--workers", workers, "cap worker threads (results are unchanged)");

    auto* list = app.add_subcommand("list-fixtures", "print the fixture catalogue");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate-config", "check a config against the schema");
    validate->add_option("config", validate_path, "experiment config (JSON)")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed())
        return wbsde::cli::command_run(config_path, artifacts, workers, std::cout);
    if (list->parsed()) return wbsde::cli::command_list_fixtures(std::cout);
    if (validate->parsed())
        return wbsde::cli::command_validate_config(validate_path, std::cout);
    return 2;
}
