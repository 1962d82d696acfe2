#pragma once

#include <vector>

#include "mctdvp/common.hpp"
#include "mctdvp/rng.hpp"

namespace mctdvp {

// One step's worth of complex Wiener increments,
// dw_a = (du_a + i dv_a)/sqrt(2) with du, dv independent N(0, dt), so
// E[dw conj(dw)] = dt and E[dw dw] = 0.
struct WienerIncrementSet {
    double dt = 0.0;
    std::vector<Complex> dw;
};

// Consumes exactly one Gaussian pair (two engine outputs) per channel, in
// channel order: du_a first, dv_a second.
WienerIncrementSet sample_wiener(int n_channels, double dt, RngStream& rng);

}  // namespace mctdvp
