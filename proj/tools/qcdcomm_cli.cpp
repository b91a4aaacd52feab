// Batch front end: region computation, simulation campaigns and codebook
// emission, all driven by one JSON config file.

#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "qcdcomm/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Joint communication and quickest-change-detection toolkit"};
    app.require_subcommand(1);

    qcdcomm::CliOptions opt;
    std::uint64_t seed_value = 0;
    bool seed_given = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opt.config_path, "Path to the JSON config file")->required();
        cmd->add_option("--out", opt.out_dir, "Output directory (created if missing)");
        cmd->add_option("--seed", seed_value, "Master seed override")
            ->each([&](const std::string&) { seed_given = true; });
        cmd->add_option("--threads", opt.threads, "Worker thread cap (0 = all cores)");
        cmd->add_flag("--bits", opt.bits, "Emit rates and divergences in bits instead of nats");
    };

    CLI::App* region = app.add_subcommand("region", "Compute the rate-delay tradeoff region");
    CLI::App* simulate = app.add_subcommand("simulate", "Run a Monte Carlo detection campaign");
    CLI::App* codebook = app.add_subcommand("codebook", "Generate and inspect a CSCC codebook");
    add_common(region);
    add_common(simulate);
    add_common(codebook);

    CLI11_PARSE(app, argc, argv);
    if (seed_given) opt.seed_override = seed_value;

    try {
        if (region->parsed()) return qcdcomm::run_region(opt);
        if (simulate->parsed()) return qcdcomm::run_simulate(opt);
        if (codebook->parsed()) return qcdcomm::run_codebook(opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return qcdcomm::kExitValidation;
    }
    return qcdcomm::kExitValidation;
}
