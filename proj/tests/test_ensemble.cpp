#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "mctdvp/ensemble.hpp"

using namespace mctdvp;

namespace {

ComplexVector ket_down() { return (ComplexVector(2) << 0, 1).finished(); }

LindbladModel single_qubit_pump() {
    LindbladModel m;
    m.n_sites = 1;
    m.phys_dim = 2;
    m.lindblad_ops = {{pauli::sigma_plus(), 1}};
    return m;
}

InitialStateSpec down_initial() {
    InitialStateSpec spec;
    spec.kind = InitialStateSpec::Kind::Product;
    spec.kets = {ket_down()};
    return spec;
}

TrajectoryConfig pump_cfg(double t_final, double dt, std::uint64_t seed) {
    TrajectoryConfig cfg;
    cfg.dt = dt;
    cfg.t_final = t_final;
    cfg.seed = seed;
    cfg.record_every = 1000000;  // record only t=0 and the end
    cfg.observables = {ObservableSpec::parse("sz_profile")};
    return cfg;
}

bool results_identical(const EnsembleResult& a, const EnsembleResult& b) {
    return a.times == b.times && a.labels == b.labels && a.mean == b.mean &&
           a.std_error == b.std_error &&
           a.n_samples_effective == b.n_samples_effective;
}

std::string temp_path(const char* name) {
    return std::string("/tmp/mctdvp_test_") + name;
}

}  // namespace

TEST_CASE("derive_seed") {
    SUBCASE("pure function") {
        CHECK(derive_seed(123, 45) == derive_seed(123, 45));
    }
    SUBCASE("index 0 and 1 never collide over a million master seeds") {
        RngStream rng(1);
        for (int i = 0; i < 1000000; ++i) {
            const std::uint64_t master = rng.next_u64();
            if (derive_seed(master, 0) == derive_seed(master, 1)) {
                CHECK(false);
                break;
            }
        }
        CHECK(true);
    }
    SUBCASE("injective over a contiguous index range") {
        std::set<std::uint64_t> seen;
        for (std::uint64_t i = 0; i < 100000; ++i) seen.insert(derive_seed(7, i));
        CHECK(seen.size() == 100000);
    }
    SUBCASE("derived streams are pairwise uncorrelated") {
        const int n_streams = 1000, n_draws = 1000;
        std::vector<std::vector<double>> z(static_cast<size_t>(n_streams));
        for (int i = 0; i < n_streams; ++i) {
            RngStream rng(derive_seed(99, static_cast<std::uint64_t>(i)));
            for (int k = 0; k < n_draws / 2; ++k) {
                const auto [a, b] = rng.gaussian_pair();
                z[static_cast<size_t>(i)].push_back(a);
                z[static_cast<size_t>(i)].push_back(b);
            }
        }
        auto correlation = [&](int i, int j) {
            double sum = 0;
            for (int k = 0; k < n_draws; ++k)
                sum += z[static_cast<size_t>(i)][static_cast<size_t>(k)] *
                       z[static_cast<size_t>(j)][static_cast<size_t>(k)];
            return sum / n_draws;
        };
        for (int i = 0; i + 1 < n_streams; ++i)
            CHECK(std::abs(correlation(i, i + 1)) < 0.15);
        for (int j = 1; j < n_streams; ++j)
            CHECK(std::abs(correlation(0, j)) < 0.15);
    }
}

TEST_CASE("run_ensemble basics") {
    const LindbladModel m = single_qubit_pump();
    SUBCASE("single sample: mean is that trajectory, stderr flagged undefined") {
        const EnsembleResult r =
            run_ensemble(m, down_initial(), pump_cfg(0.01, 1e-3, 5), 1, 1);
        CHECK(r.n_samples_effective == 1);
        CHECK(!r.stderr_defined);
        for (const auto& row : r.std_error)
            for (double v : row) CHECK(v == 0.0);
        const ObservableSeries single = run_trajectory(
            down_initial().build(1, 2, 0), m, [] {
                auto c = pump_cfg(0.01, 1e-3, 5);
                c.seed = derive_seed(5, 0);
                return c;
            }());
        CHECK(r.mean.back() == single.values.back());
    }
    SUBCASE("zero-Lindblad dynamics: every trajectory identical, stderr 0") {
        const LindbladModel kxz = build_kxz(3, 1.0);
        InitialStateSpec initial;
        initial.kind = InitialStateSpec::Kind::Random;
        initial.bond_dim = 2;
        initial.seed = 11;
        TrajectoryConfig cfg = pump_cfg(0.02, 1e-3, 3);
        const EnsembleResult r = run_ensemble(kxz, initial, cfg, 8, 2);
        CHECK(r.stderr_defined);
        for (const auto& row : r.std_error)
            for (double v : row) CHECK(v <= 1e-12);
    }
    SUBCASE("scheduler independence: identical result for 1, 2, 8 workers") {
        LindbladModel kxz = build_kxz(2, 1.0);
        kxz.lindblad_ops = dissipation_preset(DissipationKind::HomogeneousPlus, 2);
        InitialStateSpec initial;
        initial.kind = InitialStateSpec::Kind::Random;
        initial.bond_dim = 2;
        initial.seed = 21;
        const TrajectoryConfig cfg = pump_cfg(0.02, 1e-3, 77);
        const EnsembleResult r1 = run_ensemble(kxz, initial, cfg, 12, 1);
        const EnsembleResult r2 = run_ensemble(kxz, initial, cfg, 12, 2);
        const EnsembleResult r8 = run_ensemble(kxz, initial, cfg, 12, 8);
        CHECK(results_identical(r1, r2));
        CHECK(results_identical(r1, r8));
    }
    SUBCASE("per-sample initial states differ between samples") {
        InitialStateSpec initial;
        initial.kind = InitialStateSpec::Kind::Random;
        initial.bond_dim = 1;
        initial.seed = 9;
        initial.per_sample = true;
        CHECK(!initial.build(2, 2, 0).same_data(initial.build(2, 2, 1)));
        initial.per_sample = false;
        CHECK(initial.build(2, 2, 0).same_data(initial.build(2, 2, 1)));
    }
}

TEST_CASE("1/sqrt(N) standard-error scaling") {
    const LindbladModel m = single_qubit_pump();
    const EnsembleResult small =
        run_ensemble(m, down_initial(), pump_cfg(0.2, 2e-3, 31), 100, 2);
    const EnsembleResult large =
        run_ensemble(m, down_initial(), pump_cfg(0.2, 2e-3, 31), 10000, 2);
    const double ratio = small.std_error.back()[0] / large.std_error.back()[0];
    CHECK(ratio > 8.0);
    CHECK(ratio < 12.0);
}

TEST_CASE("aggregate bookkeeping with failures") {
    TrajectoryTable table;
    table.master_seed = 1;
    table.n_samples = 3;
    table.times = {0.0, 1.0};
    table.labels = {"sz[1]"};
    SampleRecord ok1;
    ok1.ok = true;
    ok1.values = {{Complex(1, 0)}, {Complex(0.5, 0)}};
    SampleRecord ok2;
    ok2.ok = true;
    ok2.values = {{Complex(0, 0)}, {Complex(1.5, 0)}};
    SampleRecord bad;
    bad.ok = false;
    bad.fail_time = 0.25;
    table.records[0] = ok1;
    table.records[1] = bad;
    table.records[2] = ok2;

    const EnsembleResult r = aggregate(table);
    CHECK(r.n_samples_effective == 2);
    CHECK(r.failures == std::vector<std::pair<std::uint64_t, double>>{{1, 0.25}});
    CHECK(r.mean[0][0] == Complex(0.5, 0));
    CHECK(r.mean[1][0] == Complex(1.0, 0));
    // Sample std = |x1-x2|/sqrt(2) over 2 samples; stderr = std/sqrt(2).
    CHECK(r.std_error[1][0] == doctest::Approx(0.5));

    SUBCASE("all samples failed") {
        TrajectoryTable dead = table;
        dead.records.clear();
        dead.records[0] = bad;
        CHECK_THROWS_AS(aggregate(dead), EnsembleFailure);
    }
}

TEST_CASE("tomography_ensemble") {
    LindbladModel m = build_kxz(2, 1.0);
    SUBCASE("single pure sample: rank one, unit trace") {
        InitialStateSpec initial;
        initial.kind = InitialStateSpec::Kind::Random;
        initial.bond_dim = 2;
        initial.seed = 5;
        const TomographySeries tomo =
            tomography_ensemble(m, initial, pump_cfg(0.01, 1e-3, 2), 1, 1);
        const DensityMatrix& rho = tomo.states.back();
        CHECK(rho.trace_error() <= 1e-10);
        CHECK(rho.hermiticity_error() <= 1e-10);
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(rho.rho);
        int significant = 0;
        for (int i = 0; i < es.eigenvalues().size(); ++i)
            if (es.eigenvalues()(i) > 1e-10) ++significant;
        CHECK(significant == 1);
    }
    SUBCASE("dissipative ensemble stays Hermitian, unit trace, near-positive") {
        m.lindblad_ops = dissipation_preset(DissipationKind::HomogeneousPlus, 2);
        InitialStateSpec initial;
        initial.kind = InitialStateSpec::Kind::Random;
        initial.bond_dim = 2;
        initial.seed = 6;
        const TomographySeries tomo =
            tomography_ensemble(m, initial, pump_cfg(0.1, 1e-3, 4), 64, 2);
        for (const auto& rho : tomo.states) {
            CHECK(rho.trace_error() <= 1e-10);
            CHECK(rho.hermiticity_error() <= 1e-10);
            CHECK(rho.min_eigenvalue() >= -0.05);  // up to sampling noise
        }
    }
}

TEST_CASE("checkpoints") {
    LindbladModel m = build_kxz(2, 1.0);
    m.lindblad_ops = dissipation_preset(DissipationKind::HomogeneousPlus, 2);
    InitialStateSpec initial;
    initial.kind = InitialStateSpec::Kind::Random;
    initial.bond_dim = 2;
    initial.seed = 77;
    const TrajectoryConfig cfg = pump_cfg(0.02, 1e-3, 55);

    SUBCASE("save / load round trip is exact") {
        const TrajectoryTable table = run_trajectory_table(m, initial, cfg, 6);
        const std::string path = temp_path("roundtrip.bin");
        checkpoint_save(table, path);
        const TrajectoryTable back = checkpoint_load(path);
        CHECK(back.header_matches(table));
        REQUIRE(back.records.size() == table.records.size());
        for (const auto& [index, rec] : table.records) {
            const SampleRecord& other = back.records.at(index);
            CHECK(other.ok == rec.ok);
            CHECK(other.values == rec.values);
        }
        std::remove(path.c_str());
    }
    SUBCASE("interrupted run + resume = uninterrupted run") {
        EnsembleRunOptions first_half;
        first_half.last_sample = 5;
        const TrajectoryTable partial =
            run_trajectory_table(m, initial, cfg, 10, first_half);
        CHECK(partial.records.size() == 5);
        const std::string path = temp_path("partial.bin");
        checkpoint_save(partial, path);
        const TrajectoryTable loaded = checkpoint_load(path);
        const TrajectoryTable resumed =
            run_trajectory_table(m, initial, cfg, 10, {}, &loaded);
        const TrajectoryTable full = run_trajectory_table(m, initial, cfg, 10);
        CHECK(results_identical(aggregate(resumed), aggregate(full)));
        std::remove(path.c_str());
    }
    SUBCASE("merge of disjoint ranges equals the full run") {
        EnsembleRunOptions lo, hi;
        lo.last_sample = 4;
        hi.first_sample = 4;
        const TrajectoryTable a = run_trajectory_table(m, initial, cfg, 8, lo);
        const TrajectoryTable b = run_trajectory_table(m, initial, cfg, 8, hi);
        const TrajectoryTable merged = merge_tables({a, b});
        const TrajectoryTable full = run_trajectory_table(m, initial, cfg, 8);
        CHECK(results_identical(aggregate(merged), aggregate(full)));
        // Overlapping ranges are rejected.
        CHECK_THROWS_AS(merge_tables({a, a}), CheckpointFormatError);
        // Mismatched headers are rejected.
        TrajectoryTable other = b;
        other.master_seed ^= 1;
        CHECK_THROWS_AS(merge_tables({a, other}), CheckpointFormatError);
    }
    SUBCASE("truncated checkpoint file is rejected whole") {
        const TrajectoryTable table = run_trajectory_table(m, initial, cfg, 3);
        const std::string path = temp_path("trunc.bin");
        checkpoint_save(table, path);
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
        in.close();
        const std::string cut_path = temp_path("trunc_cut.bin");
        std::ofstream out(cut_path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() * 2 / 3));
        out.close();
        CHECK_THROWS_AS(checkpoint_load(cut_path), CheckpointFormatError);
        std::remove(path.c_str());
        std::remove(cut_path.c_str());
    }
    SUBCASE("garbage file is not a checkpoint") {
        const std::string path = temp_path("garbage.bin");
        std::ofstream out(path, std::ios::binary);
        out << "not a checkpoint at all";
        out.close();
        CHECK_THROWS_AS(checkpoint_load(path), CheckpointFormatError);
        std::remove(path.c_str());
    }
}
