#include "mctdvp/ensemble.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <thread>

namespace mctdvp {

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t sample_index) {
    return splitmix64_mix(master_seed ^ (0x9E3779B97F4A7C15ULL * (sample_index + 1)));
}

MpsState InitialStateSpec::build(int n_sites, int phys_dim,
                                 std::uint64_t sample_index) const {
    switch (kind) {
        case Kind::Product:
            return product_state(n_sites, phys_dim, kets);
        case Kind::Random: {
            const std::uint64_t s = per_sample ? derive_seed(seed, sample_index) : seed;
            return random_state(n_sites, phys_dim, bond_dim, s);
        }
    }
    throw InvalidInput("InitialStateSpec: unknown kind");
}

bool TrajectoryTable::header_matches(const TrajectoryTable& other) const {
    return master_seed == other.master_seed && n_samples == other.n_samples &&
           times == other.times && labels == other.labels;
}

std::vector<double> record_times(const TrajectoryConfig& cfg) {
    cfg.validate();
    const int n_steps = cfg.n_steps();
    std::vector<double> times{0.0};
    for (int step = 1; step <= n_steps; ++step)
        if (step % cfg.record_every == 0 || step == n_steps)
            times.push_back(step * cfg.dt);
    return times;
}

namespace {

constexpr std::uint64_t kResampleTag = 0x7265736d706c6531ULL;

SampleRecord run_one_sample(const LindbladModel& model, const InitialStateSpec& initial,
                            const TrajectoryConfig& cfg, std::uint64_t index,
                            const EnsembleRunOptions& options) {
    SampleRecord rec;
    const int max_attempts = options.resample_failed ? std::max(1, options.max_attempts) : 1;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        TrajectoryConfig sample_cfg = cfg;
        sample_cfg.seed =
            attempt == 0 ? derive_seed(cfg.seed, index)
                         : derive_seed(splitmix64_mix(cfg.seed ^ kResampleTag),
                                       index * 16 + static_cast<std::uint64_t>(attempt));
        rec.attempts = attempt + 1;
        try {
            const MpsState psi0 = initial.build(model.n_sites, model.phys_dim, index);
            ObservableSeries series = run_trajectory(psi0, model, sample_cfg);
            rec.ok = true;
            rec.values = std::move(series.values);
            return rec;
        } catch (const TrajectoryFailure& f) {
            rec.ok = false;
            rec.fail_time = f.time;
        }
    }
    return rec;
}

}  // namespace

TrajectoryTable run_trajectory_table(const LindbladModel& model,
                                     const InitialStateSpec& initial,
                                     const TrajectoryConfig& cfg,
                                     std::uint64_t n_samples,
                                     const EnsembleRunOptions& options,
                                     const TrajectoryTable* resume_from) {
    if (n_samples < 1) throw InvalidInput("run_trajectory_table: n_samples >= 1 required");
    cfg.validate();
    const ObservableSet obs(cfg.observables, model);

    TrajectoryTable table;
    table.master_seed = cfg.seed;
    table.n_samples = n_samples;
    table.times = record_times(cfg);
    table.labels = obs.labels();

    std::uint64_t first = options.first_sample;
    std::uint64_t last = options.last_sample == 0 ? n_samples : options.last_sample;
    if (first >= last || last > n_samples)
        throw InvalidInput("run_trajectory_table: bad sample range");

    if (resume_from) {
        if (!resume_from->header_matches(table))
            throw InvalidInput("run_trajectory_table: resume checkpoint does not match "
                               "this configuration");
        table.records = resume_from->records;
    }

    std::vector<std::uint64_t> pending;
    for (std::uint64_t i = first; i < last; ++i)
        if (!table.records.count(i)) pending.push_back(i);

    const int n_workers = std::max(1, options.n_workers);
    std::vector<std::optional<SampleRecord>> slots(pending.size());
    std::atomic<size_t> cursor{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        for (;;) {
            const size_t k = cursor.fetch_add(1);
            if (k >= pending.size()) return;
            try {
                slots[k] = run_one_sample(model, initial, cfg, pending[k], options);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    if (n_workers == 1 || pending.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        const int n_threads = static_cast<int>(
            std::min<size_t>(static_cast<size_t>(n_workers), pending.size()));
        threads.reserve(static_cast<size_t>(n_threads));
        for (int i = 0; i < n_threads; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    for (size_t k = 0; k < pending.size(); ++k) {
        if (!slots[k])
            throw EnsembleFailure("run_trajectory_table: worker aborted before finishing");
        table.records.emplace(pending[k], std::move(*slots[k]));
    }
    return table;
}

EnsembleResult aggregate(const TrajectoryTable& table) {
    EnsembleResult out;
    out.times = table.times;
    out.labels = table.labels;
    out.n_samples_requested = table.n_samples;

    const size_t n_times = table.times.size();
    const size_t n_channels = table.labels.size();
    out.mean.assign(n_times, std::vector<Complex>(n_channels, Complex(0, 0)));
    out.std_error.assign(n_times, std::vector<double>(n_channels, 0.0));

    std::uint64_t n_ok = 0;
    for (const auto& [index, rec] : table.records) {
        if (!rec.ok) {
            out.failures.emplace_back(index, rec.fail_time);
            continue;
        }
        if (rec.values.size() != n_times)
            throw EnsembleFailure("aggregate: sample " + std::to_string(index) +
                                  " has a mismatched time grid");
        ++n_ok;
        for (size_t t = 0; t < n_times; ++t)
            for (size_t c = 0; c < n_channels; ++c) out.mean[t][c] += rec.values[t][c];
    }
    if (n_ok == 0) throw EnsembleFailure("aggregate: every sample failed");
    out.n_samples_effective = n_ok;
    const double inv_n = 1.0 / static_cast<double>(n_ok);
    for (auto& row : out.mean)
        for (auto& v : row) v *= inv_n;

    out.stderr_defined = n_ok >= 2;
    if (out.stderr_defined) {
        for (const auto& [index, rec] : table.records) {
            if (!rec.ok) continue;
            for (size_t t = 0; t < n_times; ++t)
                for (size_t c = 0; c < n_channels; ++c)
                    out.std_error[t][c] += std::norm(rec.values[t][c] - out.mean[t][c]);
        }
        const double scale = 1.0 / (static_cast<double>(n_ok - 1) * static_cast<double>(n_ok));
        for (auto& row : out.std_error)
            for (auto& v : row) v = std::sqrt(v * scale);
    }
    return out;
}

EnsembleResult run_ensemble(const LindbladModel& model, const InitialStateSpec& initial,
                            const TrajectoryConfig& cfg, std::uint64_t n_samples,
                            int n_workers) {
    EnsembleRunOptions options;
    options.n_workers = n_workers;
    return aggregate(run_trajectory_table(model, initial, cfg, n_samples, options));
}

TomographySeries tomography_ensemble(const LindbladModel& model,
                                     const InitialStateSpec& initial,
                                     const TrajectoryConfig& cfg,
                                     std::uint64_t n_samples, int n_workers) {
    TrajectoryConfig tomo_cfg = cfg;
    tomo_cfg.observables = {ObservableSpec{ObservableKind::Tomography}};
    TomographySeries out;
    out.stats = run_ensemble(model, initial, tomo_cfg, n_samples, n_workers);
    std::int64_t dim = 1;
    for (int i = 0; i < model.n_sites; ++i) dim *= model.phys_dim;
    out.times = out.stats.times;
    for (const auto& row : out.stats.mean) {
        DensityMatrix rho;
        rho.rho = ComplexMatrix(dim, dim);
        for (std::int64_t i = 0; i < dim; ++i)
            for (std::int64_t j = 0; j < dim; ++j)
                rho.rho(i, j) = row[static_cast<size_t>(i * dim + j)];
        out.states.push_back(std::move(rho));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint format: "MCTK" magic, u32 version, header, completed-index
// bitmap, per-index blocks in ascending order. All integers little-endian.

namespace {

constexpr char kMagic[4] = {'M', 'C', 'T', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw CheckpointFormatError("checkpoint truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw CheckpointFormatError("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& in) {
    const std::uint64_t bits = get_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    const std::uint64_t len = get_u64(in);
    if (len > (1u << 20)) throw CheckpointFormatError("checkpoint string too long");
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw CheckpointFormatError("checkpoint truncated");
    return s;
}

}  // namespace

void checkpoint_save(const TrajectoryTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointFormatError("cannot open '" + path + "' for writing");
    out.write(kMagic, 4);
    put_u32(out, kCheckpointVersion);
    put_u64(out, table.master_seed);
    put_u64(out, table.n_samples);
    put_u64(out, table.times.size());
    for (const double t : table.times) put_f64(out, t);
    put_u64(out, table.labels.size());
    for (const auto& l : table.labels) put_string(out, l);

    std::vector<unsigned char> bitmap((table.n_samples + 7) / 8, 0);
    for (const auto& [index, rec] : table.records) {
        if (index >= table.n_samples)
            throw CheckpointFormatError("checkpoint_save: record index out of range");
        bitmap[index / 8] |= static_cast<unsigned char>(1u << (index % 8));
    }
    out.write(reinterpret_cast<const char*>(bitmap.data()),
              static_cast<std::streamsize>(bitmap.size()));

    for (const auto& [index, rec] : table.records) {
        put_u64(out, index);
        out.put(rec.ok ? 1 : 0);
        put_u32(out, static_cast<std::uint32_t>(rec.attempts));
        if (rec.ok) {
            for (const auto& row : rec.values)
                for (const Complex v : row) {
                    put_f64(out, v.real());
                    put_f64(out, v.imag());
                }
        } else {
            put_f64(out, rec.fail_time);
        }
    }
    out.flush();
    if (!out) throw CheckpointFormatError("write error on '" + path + "'");
}

TrajectoryTable checkpoint_load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointFormatError("cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointFormatError("'" + path + "' is not a checkpoint file");
    const std::uint32_t version = get_u32(in);
    if (version != kCheckpointVersion)
        throw CheckpointFormatError("unsupported checkpoint version " +
                                    std::to_string(version));
    TrajectoryTable table;
    table.master_seed = get_u64(in);
    table.n_samples = get_u64(in);
    if (table.n_samples == 0 || table.n_samples > (1ull << 32))
        throw CheckpointFormatError("implausible sample count");
    const std::uint64_t n_times = get_u64(in);
    if (n_times > (1ull << 24)) throw CheckpointFormatError("implausible time count");
    table.times.resize(n_times);
    for (auto& t : table.times) t = get_f64(in);
    const std::uint64_t n_channels = get_u64(in);
    if (n_channels > (1ull << 24)) throw CheckpointFormatError("implausible channel count");
    table.labels.resize(n_channels);
    for (auto& l : table.labels) l = get_string(in);

    std::vector<unsigned char> bitmap((table.n_samples + 7) / 8);
    in.read(reinterpret_cast<char*>(bitmap.data()),
            static_cast<std::streamsize>(bitmap.size()));
    if (!in) throw CheckpointFormatError("checkpoint truncated");

    std::uint64_t expected = 0;
    for (std::uint64_t i = 0; i < table.n_samples; ++i)
        if (bitmap[i / 8] & (1u << (i % 8))) ++expected;

    for (std::uint64_t k = 0; k < expected; ++k) {
        const std::uint64_t index = get_u64(in);
        if (index >= table.n_samples || !(bitmap[index / 8] & (1u << (index % 8))))
            throw CheckpointFormatError("checkpoint block index disagrees with bitmap");
        SampleRecord rec;
        const int ok = in.get();
        if (ok != 0 && ok != 1) throw CheckpointFormatError("checkpoint truncated");
        rec.ok = ok == 1;
        rec.attempts = static_cast<int>(get_u32(in));
        if (rec.ok) {
            rec.values.assign(n_times, std::vector<Complex>(n_channels));
            for (auto& row : rec.values)
                for (auto& v : row) {
                    const double re = get_f64(in);
                    const double im = get_f64(in);
                    v = Complex(re, im);
                }
        } else {
            rec.fail_time = get_f64(in);
        }
        if (!table.records.emplace(index, std::move(rec)).second)
            throw CheckpointFormatError("duplicate sample index in checkpoint");
    }
    return table;
}

TrajectoryTable merge_tables(const std::vector<TrajectoryTable>& parts) {
    if (parts.empty()) throw InvalidInput("merge_tables: nothing to merge");
    TrajectoryTable out = parts[0];
    for (size_t i = 1; i < parts.size(); ++i) {
        if (!out.header_matches(parts[i]))
            throw CheckpointFormatError("merge: checkpoints come from different runs");
        for (const auto& [index, rec] : parts[i].records)
            if (!out.records.emplace(index, rec).second)
                throw CheckpointFormatError("merge: sample index " + std::to_string(index) +
                                            " appears in more than one checkpoint");
    }
    return out;
}

}  // namespace mctdvp
