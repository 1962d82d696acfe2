#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mctdvp/ensemble.hpp"
#include "mctdvp/exact.hpp"
#include "mctdvp/sde.hpp"

using namespace mctdvp;

namespace {

ComplexVector ket_up() { return (ComplexVector(2) << 1, 0).finished(); }
ComplexVector ket_down() { return (ComplexVector(2) << 0, 1).finished(); }

LindbladModel single_qubit_pump() {
    LindbladModel m;
    m.n_sites = 1;
    m.phys_dim = 2;
    m.lindblad_ops = {{pauli::sigma_plus(), 1}};
    return m;
}

}  // namespace

TEST_CASE("sample_wiener statistics (Appendix-style conventions)") {
    RngStream rng(2024);
    const int n_draws = 100000;
    const double dt = 1.0;
    Complex mean1 = 0.0, cross = 0.0, square = 0.0;
    double var_re = 0.0, var_im = 0.0;
    for (int i = 0; i < n_draws; ++i) {
        const WienerIncrementSet w = sample_wiener(2, dt, rng);
        mean1 += w.dw[0];
        cross += w.dw[0] * std::conj(w.dw[1]);
        square += w.dw[0] * w.dw[0];
        var_re += w.dw[0].real() * w.dw[0].real();
        var_im += w.dw[0].imag() * w.dw[0].imag();
    }
    const double n = n_draws;
    // Var(Re dw) = Var(Im dw) = dt/2.
    CHECK(var_re / n == doctest::Approx(0.5).epsilon(0.04));
    CHECK(var_im / n == doctest::Approx(0.5).epsilon(0.04));
    // |E dw| <= 5 sigma with sigma = sqrt(dt / n).
    CHECK(std::abs(mean1 / n) <= 5.0 * std::sqrt(dt / n));
    // E[dw_1 conj(dw_2)] = 0 and E[dw dw] = 0 within 5 standard errors.
    CHECK(std::abs(cross / n) <= 5.0 * std::sqrt(2.0 * dt * dt / n));
    CHECK(std::abs(square / n) <= 5.0 * std::sqrt(2.0 * dt * dt / n));
}

TEST_CASE("sample_wiener determinism and consumption contract") {
    const WienerIncrementSet a = [] {
        RngStream rng(7);
        return sample_wiener(3, 0.01, rng);
    }();
    const WienerIncrementSet b = [] {
        RngStream rng(7);
        return sample_wiener(3, 0.01, rng);
    }();
    CHECK(a.dw == b.dw);
    // Exactly two engine outputs are consumed per channel: skipping 2*k
    // outputs reproduces the tail of the stream.
    RngStream full(7);
    const WienerIncrementSet first = sample_wiener(2, 0.01, full);
    const WienerIncrementSet second = sample_wiener(1, 0.01, full);
    RngStream skipped(7);
    for (int i = 0; i < 4; ++i) skipped.next_u64();
    const WienerIncrementSet tail = sample_wiener(1, 0.01, skipped);
    CHECK(second.dw == tail.dw);
    CHECK(first.dw.size() == 2);
    CHECK_THROWS_AS(([] {
                        RngStream rng(1);
                        return sample_wiener(1, 0.0, rng);
                    }()),
                    InvalidInput);
}

TEST_CASE("euler_step") {
    SUBCASE("pump fixed point: |up> stays |up>") {
        const MpsState psi = product_state(1, 2, {ket_up()});
        RngStream rng(5);
        const MpsState next = euler_step(psi, single_qubit_pump(), 1e-2, rng);
        CHECK((to_dense(next) - to_dense(psi)).norm() <= 1e-12);
    }
    SUBCASE("channel count in the noise set is checked") {
        const MpsState psi = product_state(1, 2, {ket_down()});
        WienerIncrementSet wrong;
        wrong.dt = 1e-3;  // no channels
        CHECK_THROWS_AS(euler_step_with_noise(psi, single_qubit_pump(), wrong),
                        InvalidInput);
    }
    SUBCASE("Hermitian-only evolution: pre-normalization norm error is O(dt^2)") {
        const LindbladModel m = build_kxz(4, 1.0);
        const MpsState psi = random_state(4, 2, 4, 33);
        const WorkspacePtr ws = make_workspace(psi);
        auto norm_defect = [&](double dt) {
            OperatorSum op = OperatorSum::empty(4);
            for (size_t b = 0; b < m.nn_terms.size(); ++b)
                op.bond_terms[b] = Complex(0, -dt) * m.nn_terms[b];
            const TangentVector da = project_operator_sum(ws, op);
            return std::abs(norm(apply_tangent(psi, da, Complex(1, 0))) - 1.0);
        };
        const double coarse = norm_defect(1e-2);
        const double fine = norm_defect(5e-3);
        CHECK(coarse / fine > 3.0);
        CHECK(coarse / fine < 5.0);
    }
    SUBCASE("norm stays exactly 1 after each stochastic step") {
        LindbladModel m = build_kxz(3, 1.0);
        m.lindblad_ops = dissipation_preset(DissipationKind::HomogeneousPlus, 3);
        MpsState state = random_state(3, 2, 2, 44);
        RngStream rng(9);
        for (int step = 0; step < 20; ++step) {
            state = euler_step(state, m, 1e-2, rng);
            CHECK(std::abs(norm(state) - 1.0) <= 1e-12);
            CHECK(right_canonical_defect(state) <= 1e-10);
        }
    }
}

TEST_CASE("full-rank MPS trajectory equals dense QSD under shared noise") {
    LindbladModel m = build_kxz(4, 1.0);
    m.lindblad_ops = dissipation_preset(DissipationKind::HomogeneousPlus, 4);
    const MpsState psi0 = random_state(4, 2, 4, 55);
    REQUIRE(psi0.bond_dims() == std::vector<int>{1, 2, 4, 2, 1});

    const double dt = 1e-3;
    const int n_steps = 100;
    RngStream rng(314);
    std::vector<WienerIncrementSet> noise;
    noise.reserve(n_steps);
    for (int s = 0; s < n_steps; ++s) noise.push_back(sample_wiener(4, dt, rng));

    const DenseQsdResult dense = dense_qsd_trajectory(to_dense(psi0), m, dt, noise);
    MpsState state = psi0;
    for (int s = 0; s < n_steps; ++s) {
        state = euler_step_with_noise(state, m, noise[static_cast<size_t>(s)]);
        const ComplexVector mps_psi = to_dense(state);
        const double fidelity =
            std::abs(mps_psi.dot(dense.states[static_cast<size_t>(s) + 1]));
        CHECK(fidelity >= 1.0 - 1e-8);
    }
}

TEST_CASE("run_trajectory") {
    LindbladModel m = build_kxz(2, 1.0);
    m.lindblad_ops = dissipation_preset(DissipationKind::HomogeneousPlus, 2);
    const MpsState psi0 = random_state(2, 2, 2, 66);
    TrajectoryConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_final = 1e-3;
    cfg.seed = 12;
    cfg.observables = {ObservableSpec::parse("sz_profile")};
    SUBCASE("t_final = dt gives exactly two time points") {
        const ObservableSeries series = run_trajectory(psi0, m, cfg);
        REQUIRE(series.times.size() == 2);
        CHECK(series.times[0] == 0.0);
        CHECK(series.times[1] == doctest::Approx(1e-3));
        CHECK(series.labels == std::vector<std::string>{"sz[1]", "sz[2]"});
    }
    SUBCASE("bit-identical rerun") {
        cfg.t_final = 0.05;
        const ObservableSeries a = run_trajectory(psi0, m, cfg);
        const ObservableSeries b = run_trajectory(psi0, m, cfg);
        REQUIRE(a.times == b.times);
        for (size_t t = 0; t < a.values.size(); ++t)
            CHECK(a.values[t] == b.values[t]);
        TrajectoryConfig other = cfg;
        other.seed = 13;
        const ObservableSeries c = run_trajectory(psi0, m, other);
        CHECK(a.values.back() != c.values.back());
    }
    SUBCASE("record_every keeps step 0, multiples and the final step") {
        cfg.t_final = 10e-3;
        cfg.record_every = 3;
        const ObservableSeries series = run_trajectory(psi0, m, cfg);
        REQUIRE(series.times.size() == 5);
        CHECK(series.times[1] == doctest::Approx(3e-3));
        CHECK(series.times[3] == doctest::Approx(9e-3));
        CHECK(series.times[4] == doctest::Approx(10e-3));
    }
    SUBCASE("config validation") {
        TrajectoryConfig bad = cfg;
        bad.dt = 0.0;
        CHECK_THROWS_AS(bad.validate(), InvalidInput);
        bad = cfg;
        bad.dt = 2.0;
        bad.t_final = 1.0;
        CHECK_THROWS_AS(bad.validate(), InvalidInput);
        bad = cfg;
        bad.record_every = 0;
        CHECK_THROWS_AS(bad.validate(), InvalidInput);
    }
}

TEST_CASE("small pump ensemble approaches the analytic solution") {
    // <<sz>>(t) = 1 - 2 exp(-t) for the single-qubit pump from |down>; the
    // full-size version of this check lives in the acceptance suite.
    const LindbladModel m = single_qubit_pump();
    InitialStateSpec initial;
    initial.kind = InitialStateSpec::Kind::Product;
    initial.kets = {ket_down()};
    TrajectoryConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_final = 0.5;
    cfg.seed = 2718;
    cfg.record_every = 500;
    cfg.observables = {ObservableSpec::parse("sz_profile")};
    const EnsembleResult result = run_ensemble(m, initial, cfg, 2000, 2);
    const double expected = 1.0 - 2.0 * std::exp(-0.5);
    const double got = result.mean.back()[0].real();
    const double se = result.std_error.back()[0];
    CHECK(std::abs(got - expected) <= 4.0 * se + 2e-3);
}
