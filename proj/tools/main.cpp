#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
    using namespace simdis::cli;

    CLI::App app{"Similarity-dissimilarity contrastive losses: experiments and verification"};
    app.require_subcommand(1);
    bool dump_defaults = false;
    app.add_flag("--dump-defaults", dump_defaults, "Print the default experiment config and exit");

    RunOptions run;
    std::string strategy_list;
    std::uint64_t run_seed = 0;
    auto* run_cmd = app.add_subcommand("run", "Train and evaluate from a JSON config");
    run_cmd->add_option("--config", run.config_path, "Experiment config (JSON)")->required();
    run_cmd->add_option("--strategy", strategy_list, "Strategy or comma-separated list (ALL,ANY,MulSupCon,SimDis[:placement[:penalty]])");
    auto* seed_opt = run_cmd->add_option("--seed", run_seed, "Override the data and training seed");
    run_cmd->add_flag("--force", run.force, "Overwrite existing output directories");

    VerifyOptions verify;
    auto* verify_cmd = app.add_subcommand("verify", "Theorem property checks and gradient checks");
    verify_cmd->add_option("--universe", verify.universe, "Label universe size")->capture_default_str();
    verify_cmd->add_option("--trials", verify.trials, "Randomized trials")->capture_default_str();
    verify_cmd->add_option("--seed", verify.seed, "Seed")->capture_default_str();
    verify_cmd->add_flag("--exhaustive", verify.exhaustive, "Only enumerate every pair at --universe (<= 5)");

    auto* case_cmd = app.add_subcommand("case-analysis", "Print the five-relation weight table");

    std::uint64_t grad_seed = 0;
    auto* grad_cmd = app.add_subcommand("grad-check", "Finite-difference checks of every loss gradient");
    grad_cmd->add_option("--seed", grad_seed, "Seed")->capture_default_str();

    // --dump-defaults works without a subcommand.
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--dump-defaults") {
            ExperimentConfig defaults;
            defaults.synth = simdis::synth::SynthSpec{};
            std::cout << to_json(defaults).dump(2) << '\n';
            return kOk;
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    if (*run_cmd) {
        if (*seed_opt) run.seed = run_seed;
        std::stringstream ss(strategy_list);
        for (std::string item; std::getline(ss, item, ',');) {
            if (!item.empty()) run.strategies.push_back(item);
        }
        return cmd_run(run, std::cout, std::cerr);
    }
    if (*verify_cmd) return cmd_verify(verify, std::cout, std::cerr);
    if (*case_cmd) return cmd_case_analysis(std::cout, std::cerr);
    if (*grad_cmd) return cmd_grad_check(grad_seed, std::cout, std::cerr);
    return kConfigError;
}
