#include "mctdvp/sde.hpp"

#include <cmath>

namespace mctdvp {

WienerIncrementSet sample_wiener(int n_channels, double dt, RngStream& rng) {
    if (n_channels < 0) throw InvalidInput("sample_wiener: n_channels >= 0 required");
    if (!(dt > 0.0)) throw InvalidInput("sample_wiener: dt > 0 required");
    WienerIncrementSet out;
    out.dt = dt;
    out.dw.reserve(static_cast<size_t>(n_channels));
    const double scale = std::sqrt(dt / 2.0);
    for (int a = 0; a < n_channels; ++a) {
        const auto [du, dv] = rng.gaussian_pair();
        out.dw.emplace_back(scale * du, scale * dv);
    }
    return out;
}

void TrajectoryConfig::validate() const {
    if (!(dt > 0.0)) throw InvalidInput("TrajectoryConfig: dt > 0 required");
    if (!(t_final > 0.0)) throw InvalidInput("TrajectoryConfig: t_final > 0 required");
    if (dt > t_final * (1.0 + 1e-12))
        throw InvalidInput("TrajectoryConfig: dt <= t_final required");
    if (record_every < 1) throw InvalidInput("TrajectoryConfig: record_every >= 1");
    if (!(pinv_cutoff >= 0.0 && pinv_cutoff < 1.0))
        throw InvalidInput("TrajectoryConfig: pinv_cutoff in [0,1) required");
}

int TrajectoryConfig::n_steps() const {
    return static_cast<int>(std::ceil(t_final / dt - 1e-9));
}

MpsState euler_step_with_noise(const MpsState& state, const LindbladModel& model,
                               const WienerIncrementSet& noise, double t,
                               const TrajectoryConfig* cfg) {
    if (static_cast<int>(noise.dw.size()) != model.n_channels())
        throw InvalidInput("euler_step: noise channel count mismatch");
    const double dt = noise.dt;
    const double pinv_cutoff = cfg ? cfg->pinv_cutoff : kDefaultPinvCutoff;
    const int d = state.phys_dim();

    WorkspacePtr ws;
    try {
        ws = make_workspace(state, pinv_cutoff);
    } catch (const InvalidInput& e) {
        throw TrajectoryFailure(std::string("euler_step: ") + e.what(), t);
    }

    // <L_a^dag> on the current normalized state; conj of the per-site <L_a>.
    // One profile sweep per distinct channel matrix keeps this O(n) overall.
    std::vector<Complex> l_bar(static_cast<size_t>(model.n_channels()));
    {
        std::vector<std::pair<ComplexMatrix, std::vector<Complex>>> profiles;
        for (int a = 0; a < model.n_channels(); ++a) {
            const auto& op = model.lindblad_ops[static_cast<size_t>(a)];
            std::vector<Complex>* prof = nullptr;
            for (auto& p : profiles)
                if (p.first == op.matrix) prof = &p.second;
            if (!prof) {
                profiles.push_back({op.matrix, expect_profile(state, op.matrix)});
                prof = &profiles.back().second;
            }
            l_bar[static_cast<size_t>(a)] = std::conj((*prof)[static_cast<size_t>(op.site - 1)]);
        }
    }

    // Single combined projection: T = dt Q + sum_a (<L_a^dag> dt + dw_a) L_a.
    // The projection is linear in the operator, so this equals
    // dt b_Q + sum_a (<L_a^dag> dt + dw_a) b_a computed separately.
    OperatorSum op = OperatorSum::empty(state.n_sites());
    for (size_t b = 0; b < model.nn_terms.size(); ++b)
        op.bond_terms[b] = Complex(0, -dt) * model.nn_terms[b];
    for (int a = 0; a < model.n_channels(); ++a) {
        const auto& l = model.lindblad_ops[static_cast<size_t>(a)];
        auto& site = op.site_terms[static_cast<size_t>(l.site - 1)];
        if (site.size() == 0) site = ComplexMatrix::Zero(d, d);
        site += (-0.5 * dt) * (l.matrix.adjoint() * l.matrix);
        site += (l_bar[static_cast<size_t>(a)] * dt + noise.dw[static_cast<size_t>(a)]) *
                l.matrix;
    }

    const TangentVector da = project_operator_sum(ws, op);

    // Apply the increment by exact state-space addition and truncate back
    // to the manifold's bond profile. A raw parameter update a += da agrees
    // with this only to first order; its cross-site second-order terms are
    // O(|dw|^2) = O(dt) per step and would break the exact full-rank
    // reduction to dense QSD.
    try {
        MpsState chi = normalize(state_plus_tangent(da));
        MpsState out = truncate_to_bond_dims(chi, state.bond_dims());
        if (!cfg || cfg->canonicalize_every_step) return canonicalize_right(out);
        if (cfg->renormalize_every_step) return normalize(out);
        return out;
    } catch (const DegenerateState& e) {
        throw TrajectoryFailure(std::string("euler_step: ") + e.what(), t);
    } catch (const InvalidInput& e) {
        throw TrajectoryFailure(std::string("euler_step: ") + e.what(), t);
    }
}

MpsState euler_step(const MpsState& state, const LindbladModel& model, double dt,
                    RngStream& rng) {
    const WienerIncrementSet noise = sample_wiener(model.n_channels(), dt, rng);
    return euler_step_with_noise(state, model, noise);
}

ObservableSeries run_trajectory(const MpsState& initial, const LindbladModel& model,
                                const TrajectoryConfig& cfg) {
    cfg.validate();
    if (initial.n_sites() != model.n_sites)
        throw InvalidInput("run_trajectory: initial state / model size mismatch");
    const ObservableSet obs(cfg.observables, model);
    const int n_steps = cfg.n_steps();

    ObservableSeries series;
    series.labels = obs.labels();
    RngStream rng(cfg.seed);
    MpsState state = canonicalize_right(initial);
    series.times.push_back(0.0);
    series.values.push_back(obs.evaluate_mps(state));
    for (int step = 1; step <= n_steps; ++step) {
        const double t = (step - 1) * cfg.dt;
        const WienerIncrementSet noise = sample_wiener(model.n_channels(), cfg.dt, rng);
        state = euler_step_with_noise(state, model, noise, t, &cfg);
        if (step % cfg.record_every == 0 || step == n_steps) {
            series.times.push_back(step * cfg.dt);
            series.values.push_back(obs.evaluate_mps(state));
        }
    }
    return series;
}

}  // namespace mctdvp
