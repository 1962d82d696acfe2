#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace mctdvp {

inline constexpr const char* kVersion = "0.1.0";

using Complex = std::complex<double>;

// Thrown when an argument violates a documented precondition.
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Thrown when a state has (numerically) zero norm and cannot be normalized.
struct DegenerateState : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a dense representation would exceed the configured size cap.
struct CapExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A single SDE sample went bad (norm collapse / non-finite update). Carries
// the simulation time at which integration had to stop.
struct TrajectoryFailure : std::runtime_error {
    TrajectoryFailure(const std::string& what, double time)
        : std::runtime_error(what), time(time) {}
    double time;
};

// Malformed or truncated checkpoint file.
struct CheckpointFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mctdvp
