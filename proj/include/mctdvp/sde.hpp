#pragma once

#include <cstdint>

#include "mctdvp/observables.hpp"
#include "mctdvp/sde_types.hpp"
#include "mctdvp/tangent.hpp"

namespace mctdvp {

struct TrajectoryConfig {
    double dt = 1e-3;
    double t_final = 1.0;
    std::uint64_t seed = 0;
    std::vector<ObservableSpec> observables;
    int record_every = 1;
    bool renormalize_every_step = true;
    bool canonicalize_every_step = true;
    double pinv_cutoff = kDefaultPinvCutoff;

    void validate() const;
    int n_steps() const;
};

// One Euler-Maruyama step of the parameter SDE
//   da = (b_Q + <L_a^dag> b_a) dt + b_a dw_a
// with supplied increments; all tangent blocks are computed from the same
// pre-step state, and the result is renormalized and brought back to
// right-canonical form. Throws TrajectoryFailure (time = t) on norm
// collapse or non-finite update.
MpsState euler_step_with_noise(const MpsState& state, const LindbladModel& model,
                               const WienerIncrementSet& noise, double t = 0.0,
                               const TrajectoryConfig* cfg = nullptr);

// Draws one WienerIncrementSet from the stream, then steps.
MpsState euler_step(const MpsState& state, const LindbladModel& model, double dt,
                    RngStream& rng);

// Integrates from t = 0 to t_final in ceil(t_final/dt) steps, recording the
// configured observables at step 0, every record_every steps and the final
// step. Deterministic given (initial, model, cfg.seed).
ObservableSeries run_trajectory(const MpsState& initial, const LindbladModel& model,
                                const TrajectoryConfig& cfg);

}  // namespace mctdvp
