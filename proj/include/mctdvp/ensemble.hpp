#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mctdvp/exact.hpp"
#include "mctdvp/sde.hpp"

namespace mctdvp {

struct EnsembleFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Counter-based per-sample stream seed: SplitMix64 avalanche over
// master_seed xor (golden-ratio multiple of index+1). Injective in
// sample_index for a fixed master seed.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t sample_index);

// How each trajectory's starting state is produced. With per_sample set,
// sample i draws its own random state seeded derive_seed(seed, i);
// otherwise all samples share one initial state.
struct InitialStateSpec {
    enum class Kind { Product, Random };
    Kind kind = Kind::Product;
    std::vector<ComplexVector> kets;  // Product: one per site
    int bond_dim = 1;                 // Random
    std::uint64_t seed = 0;           // Random
    bool per_sample = false;          // Random only

    MpsState build(int n_sites, int phys_dim, std::uint64_t sample_index) const;
};

struct SampleRecord {
    bool ok = false;
    double fail_time = 0.0;
    int attempts = 1;  // > 1 when resampling was enabled and used
    // values[time][channel]; empty for failed samples.
    std::vector<std::vector<Complex>> values;
};

// Raw per-sample results keyed by sample index; the unit of checkpointing
// and merging. Aggregation happens after the fact, in index order, so the
// final numbers cannot depend on scheduling.
struct TrajectoryTable {
    std::uint64_t master_seed = 0;
    std::uint64_t n_samples = 0;  // requested ensemble size
    std::vector<double> times;
    std::vector<std::string> labels;
    std::map<std::uint64_t, SampleRecord> records;

    bool header_matches(const TrajectoryTable& other) const;
};

struct EnsembleResult {
    std::vector<double> times;
    std::vector<std::string> labels;
    std::vector<std::vector<Complex>> mean;      // [time][channel]
    std::vector<std::vector<double>> std_error;  // [time][channel]
    std::uint64_t n_samples_requested = 0;
    std::uint64_t n_samples_effective = 0;
    bool stderr_defined = true;  // false when fewer than 2 survivors
    std::vector<std::pair<std::uint64_t, double>> failures;  // (index, time)
};

struct EnsembleRunOptions {
    int n_workers = 1;
    // Half-open sample-index range to run; {0, 0} means all of n_samples.
    std::uint64_t first_sample = 0;
    std::uint64_t last_sample = 0;
    bool resample_failed = false;
    int max_attempts = 3;
};

// The record schedule of run_trajectory for this config: t = 0, every
// record_every-th step, and the final step.
std::vector<double> record_times(const TrajectoryConfig& cfg);

// Runs the requested sample indices (skipping any already present in
// *resume_from), each with seed derive_seed(cfg.seed, i).
TrajectoryTable run_trajectory_table(const LindbladModel& model,
                                     const InitialStateSpec& initial,
                                     const TrajectoryConfig& cfg,
                                     std::uint64_t n_samples,
                                     const EnsembleRunOptions& options = {},
                                     const TrajectoryTable* resume_from = nullptr);

// Mean and standard error (sample std / sqrt(n)) over surviving samples,
// accumulated in ascending index order. Throws EnsembleFailure if no
// sample survived.
EnsembleResult aggregate(const TrajectoryTable& table);

EnsembleResult run_ensemble(const LindbladModel& model, const InitialStateSpec& initial,
                            const TrajectoryConfig& cfg, std::uint64_t n_samples,
                            int n_workers);

struct TomographySeries {
    std::vector<double> times;
    std::vector<DensityMatrix> states;  // rho_hat(t) = (1/N) sum |psi_l><psi_l|
    EnsembleResult stats;               // per-element means and errors
};

TomographySeries tomography_ensemble(const LindbladModel& model,
                                     const InitialStateSpec& initial,
                                     const TrajectoryConfig& cfg,
                                     std::uint64_t n_samples, int n_workers = 1);

// Versioned binary checkpoint of a TrajectoryTable (header, completed-index
// bitmap, per-index series blocks).
void checkpoint_save(const TrajectoryTable& table, const std::string& path);
TrajectoryTable checkpoint_load(const std::string& path);

// Union of partial tables with identical headers and disjoint index sets.
TrajectoryTable merge_tables(const std::vector<TrajectoryTable>& parts);

}  // namespace mctdvp
