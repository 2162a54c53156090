#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ehpc/errors.hpp"
#include "ehpc/experiment.hpp"

namespace {

struct Flags {
    std::string config;
    std::string mode = "suboptimal";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::string out = "out";
    std::string policy;
    bool plotdata = false;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "experiment config (JSON)")->required();
    cmd->add_option("--out", f.out, "output directory")->capture_default_str();
    cmd->add_option("--seed", f.seed, "override mc.seed");
    cmd->add_option("--workers", f.workers, "override mc.workers");
}

ehpc::ExperimentConfig load(const Flags& f) {
    ehpc::ExperimentConfig c = ehpc::load_config(f.config);
    if (f.seed) c.mc.seed = *f.seed;
    if (f.workers) c.mc.workers = *f.workers;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-harvesting sensor network power control: solve, simulate, sweep"};
    app.require_subcommand(1);
    Flags f;

    auto* design = app.add_subcommand("design-quantizer", "print quantizer boundaries and level probabilities");
    add_common(design, f);

    auto* solve = app.add_subcommand("solve", "solve a policy and write it with its solver report");
    add_common(solve, f);
    solve->add_option("--mode", f.mode, "optimal | suboptimal | random")->capture_default_str();
    solve->add_flag("--emit-plotdata", f.plotdata, "also write fig4.csv policy data");

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo evaluation of a policy");
    add_common(simulate, f);
    simulate->add_option("--mode", f.mode, "optimal | suboptimal | random")->capture_default_str();
    simulate->add_option("--policy", f.policy, "directory written by `solve` (solves inline when omitted)");

    auto* sweep = app.add_subcommand("sweep", "re-solve and simulate along the config's sweep axis");
    add_common(sweep, f);
    sweep->add_flag("--emit-plotdata", f.plotdata, "also write per-figure long-format files");

    auto* validate = app.add_subcommand("validate-config", "parse and validate a config, print it normalized");
    validate->add_option("--config", f.config, "experiment config (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Help and version exit 0; malformed command lines count as config errors.
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (design->parsed()) {
            ehpc::cmd_design_quantizer(load(f), f.out, std::cout);
        } else if (solve->parsed()) {
            ehpc::cmd_solve(load(f), ehpc::solve_mode_from_string(f.mode), f.out, f.plotdata, std::cout);
        } else if (simulate->parsed()) {
            ehpc::cmd_simulate(load(f), ehpc::solve_mode_from_string(f.mode), f.policy, f.out, std::cout);
        } else if (sweep->parsed()) {
            ehpc::cmd_sweep(load(f), f.out, f.plotdata, std::cout);
        } else if (validate->parsed()) {
            const auto c = ehpc::load_config(f.config);
            std::cout << ehpc::to_json(c).dump(2) << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ehpc::exit_code_for(e);
    }
    return 0;
}
