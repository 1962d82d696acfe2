#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mctdvp/ensemble.hpp"

namespace mctdvp {

// Config file errors carry the offending line for the CLI's exit-2 message.
struct ConfigError : std::runtime_error {
    ConfigError(const std::string& file, int line, const std::string& message)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + message),
          line(line) {}
    int line;
};

// Fully resolved run configuration. The on-disk format is flat
// "[section]" / "key = value" text; see README for the reference.
struct RunConfig {
    // [model]
    std::string model_type;  // kxz | xxz | none
    int n_sites = 0;
    double epsilon = 1.0;
    double lambda = 0.0;

    // [dissipation]
    std::string dissipation_preset;           // empty when explicit channels given
    std::vector<std::string> channel_tokens;  // e.g. "sp@1"

    // [initial]
    std::string initial_kind;  // product | random
    std::vector<std::string> pattern;  // product: up|down|plus|minus tokens
    std::uint64_t initial_seed = 0;    // random
    bool per_sample_initial = false;   // random
    int initial_bond_dim = 0;          // random; 0 = use [simulation] bond_dim

    // [simulation]
    double dt = 0.0;
    double t_final = 0.0;
    std::uint64_t n_samples = 0;
    int bond_dim = 1;
    std::uint64_t master_seed = 0;
    int n_workers = 1;
    int record_every = 1;
    bool resample_failed = false;
    double pinv_cutoff = kDefaultPinvCutoff;

    // [observables]
    std::vector<std::string> observable_tokens;

    // [output]
    std::string output_dir = ".";

    LindbladModel build_model() const;
    InitialStateSpec build_initial() const;
    TrajectoryConfig build_trajectory_config() const;
    std::vector<ObservableSpec> parse_observables() const;
};

RunConfig parse_run_config(const std::string& path);
RunConfig parse_run_config_text(const std::string& text, const std::string& file_name);

}  // namespace mctdvp
