#pragma once

#include <string>
#include <vector>

#include "mctdvp/config.hpp"

namespace mctdvp {

// Exit codes shared by every subcommand: 0 ok, 2 usage/config, 3 runtime.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

struct RunOptions {
    std::string config_path;
    // Optional half-open sample range "lo:hi" for job-array splitting.
    bool has_sample_range = false;
    std::uint64_t range_first = 0;
    std::uint64_t range_last = 0;
    std::string resume_path;      // checkpoint to continue from
    std::string checkpoint_path;  // where to write the table (default: out dir)
    bool write_checkpoint = false;
    int n_workers_override = 0;  // 0 = use config / env
};

int cmd_run(const RunOptions& options);
int cmd_oracle(const std::string& config_path);
int cmd_compare(const std::string& run_csv, const std::string& oracle_csv);
int cmd_merge(const std::string& config_path, const std::string& out_dir,
              const std::vector<std::string>& checkpoint_paths);

// In-memory form of one observable CSV file.
struct CsvTable {
    std::vector<double> times;
    std::vector<std::string> labels;
    std::vector<std::vector<Complex>> values;   // [time][label]
    std::vector<std::vector<double>> std_error; // [time][label]
};

void write_csv(const CsvTable& table, const std::string& path);
CsvTable read_csv(const std::string& path);

// Full-precision decimal rendering used in every CSV cell.
std::string format_double(double v);

}  // namespace mctdvp
