#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mctdvp/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo TDVP simulator for dissipative spin chains"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Sample an ensemble of SDE trajectories");
    mctdvp::RunOptions run_options;
    run->add_option("config", run_options.config_path, "Run config file")->required();
    std::string range_text;
    run->add_option("--sample-range", range_text,
                    "Half-open sample index range lo:hi to run in this process");
    run->add_option("--resume", run_options.resume_path,
                    "Continue from an existing checkpoint");
    run->add_option("--checkpoint", run_options.checkpoint_path,
                    "Write the trajectory table to this path");
    run->add_flag("--write-checkpoint", run_options.write_checkpoint,
                  "Always write a checkpoint, even for complete runs");
    run->add_option("--workers", run_options.n_workers_override,
                    "Override worker count from config/environment");

    // oracle
    auto* oracle = app.add_subcommand("oracle", "Dense master-equation reference run");
    std::string oracle_config;
    oracle->add_option("config", oracle_config, "Run config file")->required();

    // compare
    auto* compare = app.add_subcommand("compare", "Compare a run CSV against an oracle CSV");
    std::string compare_run, compare_oracle;
    compare->add_option("run_csv", compare_run, "Ensemble CSV")->required();
    compare->add_option("oracle_csv", compare_oracle, "Oracle CSV")->required();

    // merge
    auto* merge = app.add_subcommand("merge", "Merge partial checkpoints");
    std::string merge_config, merge_out;
    std::vector<std::string> merge_inputs;
    merge->add_option("--config", merge_config, "Run config file")->required();
    merge->add_option("--out", merge_out, "Output directory")->required();
    merge->add_option("checkpoints", merge_inputs, "Checkpoint files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : mctdvp::kExitUsage;
    }

    if (run->parsed()) {
        if (!range_text.empty()) {
            const auto colon = range_text.find(':');
            try {
                if (colon == std::string::npos) throw std::invalid_argument("no colon");
                run_options.range_first = std::stoull(range_text.substr(0, colon));
                run_options.range_last = std::stoull(range_text.substr(colon + 1));
                run_options.has_sample_range = true;
            } catch (const std::exception&) {
                std::cerr << "error: --sample-range expects lo:hi\n";
                return mctdvp::kExitUsage;
            }
        }
        return mctdvp::cmd_run(run_options);
    }
    if (oracle->parsed()) return mctdvp::cmd_oracle(oracle_config);
    if (compare->parsed()) return mctdvp::cmd_compare(compare_run, compare_oracle);
    if (merge->parsed()) return mctdvp::cmd_merge(merge_config, merge_out, merge_inputs);
    return mctdvp::kExitUsage;
}
