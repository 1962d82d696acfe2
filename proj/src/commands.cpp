#include "mctdvp/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace mctdvp {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_csv(const CsvTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "time,label,mean_re,mean_im,stderr\n";
    for (size_t t = 0; t < table.times.size(); ++t)
        for (size_t c = 0; c < table.labels.size(); ++c)
            out << format_double(table.times[t]) << ',' << table.labels[c] << ','
                << format_double(table.values[t][c].real()) << ','
                << format_double(table.values[t][c].imag()) << ','
                << format_double(table.std_error[t][c]) << '\n';
    out.flush();
    if (!out) throw std::runtime_error("write error on '" + path + "'");
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "time,label,mean_re,mean_im,stderr")
        throw std::runtime_error(path + ": unexpected CSV header");
    CsvTable table;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (fields.size() != 5)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected 5 fields");
        const double t = std::stod(fields[0]);
        if (table.times.empty() || table.times.back() != t) {
            table.times.push_back(t);
            table.values.emplace_back();
            table.std_error.emplace_back();
        }
        if (table.times.size() == 1) table.labels.push_back(fields[1]);
        const size_t c = table.values.back().size();
        if (c >= table.labels.size() || table.labels[c] != fields[1])
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": label order is inconsistent between times");
        table.values.back().emplace_back(std::stod(fields[2]), std::stod(fields[3]));
        table.std_error.back().push_back(std::stod(fields[4]));
    }
    for (size_t t = 0; t < table.times.size(); ++t)
        if (table.values[t].size() != table.labels.size())
            throw std::runtime_error(path + ": ragged time block");
    return table;
}

namespace {

int effective_workers(const RunConfig& cfg, int override_value) {
    if (override_value > 0) return override_value;
    if (const char* env = std::getenv("MCTDVP_WORKERS")) {
        try {
            const int v = std::stoi(env);
            if (v >= 1) return v;
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring invalid MCTDVP_WORKERS='" << env << "'\n";
    }
    return cfg.n_workers;
}

json config_to_json(const RunConfig& cfg) {
    json j;
    j["model"] = {{"type", cfg.model_type},
                  {"n_sites", cfg.n_sites},
                  {"epsilon", cfg.epsilon},
                  {"lambda", cfg.lambda}};
    j["dissipation"] = {{"preset", cfg.dissipation_preset},
                        {"channels", cfg.channel_tokens}};
    j["initial"] = {{"kind", cfg.initial_kind},
                    {"pattern", cfg.pattern},
                    {"seed", cfg.initial_seed},
                    {"per_sample", cfg.per_sample_initial}};
    j["simulation"] = {{"dt", cfg.dt},
                       {"t_final", cfg.t_final},
                       {"n_samples", cfg.n_samples},
                       {"bond_dim", cfg.bond_dim},
                       {"master_seed", cfg.master_seed},
                       {"n_workers", cfg.n_workers},
                       {"record_every", cfg.record_every},
                       {"resample_failed", cfg.resample_failed},
                       {"pinv_cutoff", cfg.pinv_cutoff}};
    j["observables"] = cfg.observable_tokens;
    j["output"] = {{"directory", cfg.output_dir}};
    return j;
}

// One CSV per observable spec, grouped through the ObservableSet's ranges.
std::vector<std::string> write_observable_csvs(const RunConfig& cfg,
                                               const ObservableSet& obs,
                                               const EnsembleResult& result,
                                               const fs::path& out_dir) {
    std::vector<std::string> files;
    for (size_t i = 0; i < obs.specs().size(); ++i) {
        const auto [first, last] = obs.channel_range(static_cast<int>(i));
        CsvTable table;
        table.times = result.times;
        for (int c = first; c < last; ++c)
            table.labels.push_back(result.labels[static_cast<size_t>(c)]);
        for (size_t t = 0; t < result.times.size(); ++t) {
            table.values.emplace_back(result.mean[t].begin() + first,
                                      result.mean[t].begin() + last);
            table.std_error.emplace_back(result.std_error[t].begin() + first,
                                         result.std_error[t].begin() + last);
        }
        const std::string name = obs.specs()[i].file_stem() + ".csv";
        write_csv(table, (out_dir / name).string());
        files.push_back(name);
    }
    return files;
}

void write_manifest(const fs::path& out_dir, json manifest) {
    std::ofstream out(out_dir / "manifest.json", std::ios::trunc);
    out << manifest.dump(2) << '\n';
}

}  // namespace

int cmd_run(const RunOptions& options) {
    const auto t_start = std::chrono::steady_clock::now();
    RunConfig cfg;
    try {
        cfg = parse_run_config(options.config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    }

    const fs::path out_dir(cfg.output_dir);
    fs::create_directories(out_dir);
    const int n_workers = effective_workers(cfg, options.n_workers_override);

    json manifest;
    manifest["schema_version"] = 1;
    manifest["code_version"] = kVersion;
    manifest["method"] = "ensemble";
    manifest["csv_schema"] = "time,label,mean_re,mean_im,stderr";
    manifest["config"] = config_to_json(cfg);
    manifest["config_path"] = options.config_path;
    manifest["n_workers_used"] = n_workers;
    manifest["status"] = "incomplete";

    try {
        const LindbladModel model = cfg.build_model();
        const InitialStateSpec initial = cfg.build_initial();
        const TrajectoryConfig traj_cfg = cfg.build_trajectory_config();
        const ObservableSet obs(traj_cfg.observables, model);

        EnsembleRunOptions run_options;
        run_options.n_workers = n_workers;
        run_options.resample_failed = cfg.resample_failed;
        if (options.has_sample_range) {
            if (options.range_first >= options.range_last ||
                options.range_last > cfg.n_samples) {
                std::cerr << "error: --sample-range must be lo:hi with lo < hi <= n_samples\n";
                return kExitUsage;
            }
            run_options.first_sample = options.range_first;
            run_options.last_sample = options.range_last;
        }

        TrajectoryTable resume_table;
        const TrajectoryTable* resume_ptr = nullptr;
        if (!options.resume_path.empty()) {
            resume_table = checkpoint_load(options.resume_path);
            resume_ptr = &resume_table;
        }

        const TrajectoryTable table = run_trajectory_table(
            model, initial, traj_cfg, cfg.n_samples, run_options, resume_ptr);

        const bool complete = table.records.size() == cfg.n_samples;
        std::vector<std::string> csv_files;
        json failures = json::array();
        json resampled = json::array();
        for (const auto& [index, rec] : table.records) {
            if (!rec.ok) failures.push_back({index, rec.fail_time});
            if (rec.attempts > 1) resampled.push_back({index, rec.attempts});
        }

        if (complete) {
            const EnsembleResult result = aggregate(table);
            csv_files = write_observable_csvs(cfg, obs, result, out_dir);
            manifest["n_samples_effective"] = result.n_samples_effective;
            manifest["stderr_defined"] = result.stderr_defined;
        }
        if (options.write_checkpoint || !complete) {
            const std::string ckpt = options.checkpoint_path.empty()
                                         ? (out_dir / "checkpoint.bin").string()
                                         : options.checkpoint_path;
            checkpoint_save(table, ckpt);
            manifest["checkpoint"] = ckpt;
        }

        manifest["status"] = complete ? "complete" : "partial";
        manifest["csv_files"] = csv_files;
        manifest["failures"] = failures;
        manifest["resampled"] = resampled;
        manifest["n_samples_completed"] = table.records.size();
        manifest["wall_time_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                .count();
        write_manifest(out_dir, manifest);
        return kExitOk;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const CapExceeded& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        manifest["error"] = e.what();
        manifest["wall_time_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                .count();
        write_manifest(out_dir, manifest);
        return kExitRuntime;
    }
}

int cmd_oracle(const std::string& config_path) {
    const auto t_start = std::chrono::steady_clock::now();
    RunConfig cfg;
    try {
        cfg = parse_run_config(config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    }
    try {
        const LindbladModel model = cfg.build_model();
        if (cfg.per_sample_initial) {
            std::cerr << "error: the dense oracle needs a single shared initial state\n";
            return kExitUsage;
        }
        std::int64_t dim = 1;
        for (int i = 0; i < model.n_sites; ++i) {
            dim *= model.phys_dim;
            if (dim > kDefaultRhoCap)
                throw CapExceeded("oracle: d^n = " + std::to_string(dim) +
                                  " exceeds the density-matrix cap of " +
                                  std::to_string(kDefaultRhoCap));
        }

        const MpsState psi0_mps = cfg.build_initial().build(model.n_sites, model.phys_dim, 0);
        const ComplexVector psi0 = to_dense(psi0_mps);
        DensityMatrix rho0;
        rho0.rho = psi0 * psi0.adjoint();

        const TrajectoryConfig traj_cfg = cfg.build_trajectory_config();
        const MasterSeries series = integrate_master(rho0, model, traj_cfg.t_final,
                                                     traj_cfg.dt, traj_cfg.record_every);
        const ObservableSet obs(traj_cfg.observables, model);

        EnsembleResult result;
        result.times = series.times;
        result.labels = obs.labels();
        double max_trace_drift = 0.0;
        CsvTable purity;
        purity.times = series.times;
        purity.labels = {"purity"};
        for (const auto& rho : series.states) {
            result.mean.push_back(obs.evaluate_rho(rho.rho));
            result.std_error.emplace_back(result.labels.size(), 0.0);
            max_trace_drift = std::max(max_trace_drift, rho.trace_error());
            purity.values.push_back({Complex((rho.rho * rho.rho).trace().real(), 0.0)});
            purity.std_error.push_back({0.0});
        }

        const fs::path out_dir(cfg.output_dir);
        fs::create_directories(out_dir);
        std::vector<std::string> csv_files =
            write_observable_csvs(cfg, obs, result, out_dir);
        write_csv(purity, (out_dir / "purity.csv").string());
        csv_files.push_back("purity.csv");

        json manifest;
        manifest["schema_version"] = 1;
        manifest["code_version"] = kVersion;
        manifest["method"] = "dense";
        manifest["csv_schema"] = "time,label,mean_re,mean_im,stderr";
        manifest["config"] = config_to_json(cfg);
        manifest["config_path"] = config_path;
        manifest["csv_files"] = csv_files;
        manifest["trace_check_max_drift"] = max_trace_drift;
        manifest["status"] = "complete";
        manifest["wall_time_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                .count();
        write_manifest(out_dir, manifest);
        std::cout << "oracle: max trace drift " << max_trace_drift << '\n';
        return kExitOk;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const CapExceeded& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

int cmd_compare(const std::string& run_csv, const std::string& oracle_csv) {
    try {
        const CsvTable run = read_csv(run_csv);
        const CsvTable oracle = read_csv(oracle_csv);
        if (run.times != oracle.times) {
            std::cerr << "error: time grids differ; rerun with matching dt/record_every "
                         "(no interpolation is performed)\n";
            return kExitUsage;
        }
        // Columns are matched by label; extra oracle-only columns (purity)
        // are ignored, but the run file must be covered.
        std::vector<std::pair<size_t, size_t>> pairs;
        for (size_t c = 0; c < run.labels.size(); ++c) {
            bool found = false;
            for (size_t k = 0; k < oracle.labels.size(); ++k)
                if (oracle.labels[k] == run.labels[c]) {
                    pairs.emplace_back(c, k);
                    found = true;
                    break;
                }
            if (!found) {
                std::cerr << "error: observable '" << run.labels[c]
                          << "' is missing from " << oracle_csv << '\n';
                return kExitUsage;
            }
        }
        if (pairs.empty()) {
            std::cerr << "error: no common observables\n";
            return kExitUsage;
        }

        double worst_z = 0.0;
        bool any_zero_stderr_dev = false;
        std::printf("%-16s %12s %12s %10s\n", "label", "max|dev|", "rms dev", "max z");
        for (const auto& [c, k] : pairs) {
            double max_dev = 0.0, sum_sq = 0.0, max_z = 0.0;
            for (size_t t = 0; t < run.times.size(); ++t) {
                const double dev = std::abs(run.values[t][c] - oracle.values[t][k]);
                max_dev = std::max(max_dev, dev);
                sum_sq += dev * dev;
                const double se = run.std_error[t][c];
                if (dev > 0.0 && se == 0.0) {
                    any_zero_stderr_dev = true;
                    max_z = std::numeric_limits<double>::infinity();
                } else if (se > 0.0) {
                    max_z = std::max(max_z, dev / se);
                }
            }
            worst_z = std::max(worst_z, max_z);
            std::printf("%-16s %12.4e %12.4e %10.3f\n", run.labels[c].c_str(), max_dev,
                        std::sqrt(sum_sq / static_cast<double>(run.times.size())), max_z);
        }
        const bool pass = worst_z <= 4.0;
        std::printf("max z over %zu observables x %zu times: %.3f\n", pairs.size(),
                    run.times.size(), worst_z);
        if (any_zero_stderr_dev)
            std::printf("note: some deviations have zero standard error "
                        "(deterministic run or single sample); their z is infinite\n");
        std::printf("note: with many points a few z-scores above 4 can occur by chance; "
                    "the threshold makes no multiplicity correction\n");
        std::printf("verdict: %s\n", pass ? "PASS" : "FAIL");
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

int cmd_merge(const std::string& config_path, const std::string& out_dir_arg,
              const std::vector<std::string>& checkpoint_paths) {
    RunConfig cfg;
    try {
        cfg = parse_run_config(config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    }
    try {
        if (checkpoint_paths.empty()) {
            std::cerr << "error: no checkpoints to merge\n";
            return kExitUsage;
        }
        std::vector<TrajectoryTable> parts;
        for (const auto& path : checkpoint_paths) parts.push_back(checkpoint_load(path));
        const TrajectoryTable merged = merge_tables(parts);

        const fs::path out_dir(out_dir_arg);
        fs::create_directories(out_dir);
        checkpoint_save(merged, (out_dir / "checkpoint.bin").string());

        json manifest;
        manifest["schema_version"] = 1;
        manifest["code_version"] = kVersion;
        manifest["method"] = "ensemble";
        manifest["csv_schema"] = "time,label,mean_re,mean_im,stderr";
        manifest["config"] = config_to_json(cfg);
        manifest["merged_from"] = checkpoint_paths;
        manifest["n_samples_completed"] = merged.records.size();

        const bool complete = merged.records.size() == merged.n_samples;
        if (complete) {
            const LindbladModel model = cfg.build_model();
            const ObservableSet obs(cfg.parse_observables(), model);
            const EnsembleResult result = aggregate(merged);
            manifest["csv_files"] = write_observable_csvs(cfg, obs, result, out_dir);
            manifest["n_samples_effective"] = result.n_samples_effective;
        }
        manifest["status"] = complete ? "complete" : "partial";
        write_manifest(out_dir, manifest);
        std::cout << "merged " << merged.records.size() << "/" << merged.n_samples
                  << " samples\n";
        return kExitOk;
    } catch (const CheckpointFormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace mctdvp
