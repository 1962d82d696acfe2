#pragma once

#include <cstdint>
#include <vector>

#include "mctdvp/model.hpp"
#include "mctdvp/mps.hpp"
#include "mctdvp/sde_types.hpp"

namespace mctdvp {

// Dense density matrices are capped at this dimension (128 = 7 spins).
inline constexpr std::int64_t kDefaultRhoCap = 1 << 7;

struct DensityMatrix {
    ComplexMatrix rho;

    std::int64_t dim() const { return rho.rows(); }
    double trace_error() const { return std::abs(rho.trace() - Complex(1, 0)); }
    double hermiticity_error() const {
        return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    }
    double min_eigenvalue() const;
};

// Dense operator builders (site indices 1-based, site 1 most significant).
ComplexMatrix dense_site_operator(int n_sites, int phys_dim, const SiteOperator& op);
ComplexMatrix dense_hamiltonian(const LindbladModel& model);
// Q = -i K - 1/2 sum_a L_a^dag L_a.
ComplexMatrix dense_q_operator(const LindbladModel& model);
std::vector<ComplexMatrix> dense_lindblad_ops(const LindbladModel& model);

// Right-hand side of the master equation in commutator form:
// -i[K,rho] - 1/2 sum (L^dag L rho + rho L^dag L - 2 L rho L^dag).
ComplexMatrix lindblad_rhs(const DensityMatrix& rho, const LindbladModel& model);

// Same generator written as Q rho + rho Q^dag + sum L rho L^dag; used as an
// independent formula path in tests.
ComplexMatrix lindblad_rhs_q_form(const DensityMatrix& rho, const LindbladModel& model);

struct MasterSeries {
    std::vector<double> times;
    std::vector<DensityMatrix> states;
};

// Classical fixed-step RK4 on the master equation, recording every
// record_every steps (and the final step).
MasterSeries integrate_master(const DensityMatrix& rho0, const LindbladModel& model,
                              double t_final, double dt, int record_every = 1,
                              std::int64_t rho_cap = kDefaultRhoCap);

// Matrix-exponential propagation of the vectorized generator; dim <= 64.
DensityMatrix evolve_master_expm(const DensityMatrix& rho0, const LindbladModel& model,
                                 double t);

struct DenseQsdResult {
    std::vector<double> times;                // every step, t = 0 .. n dt
    std::vector<ComplexVector> states;        // normalized psi at each time
};

// Euler-Maruyama quantum state diffusion on the full Hilbert space:
// d psi = (Q + <L_a^dag> L_a) psi dt + L_a psi dw_a, renormalized each
// step; the noise sequence is supplied by the caller so trajectories can
// share increments with the MPS integrator.
DenseQsdResult dense_qsd_trajectory(const ComplexVector& psi0, const LindbladModel& model,
                                    double dt, const std::vector<WienerIncrementSet>& noise,
                                    std::int64_t dense_cap = kDefaultDenseCap);

struct TangentArgminResult {
    ComplexVector tangent;   // optimal dense tangent vector
    double residual = 0.0;   // || tangent - target ||
    ComplexVector coeffs;    // optimal coefficients over the raw-parameter basis
};

// Brute-force least squares over the finite-difference tangent basis
// { d|Psi>/d a_j } of all raw MPS tensor entries. Solves the normal
// equations with the raw metric g_jk = V^dag V and a pseudo-inverse.
TangentArgminResult brute_force_tangent_argmin(const MpsState& state,
                                               const ComplexVector& target,
                                               double fd_step = 1e-6);

}  // namespace mctdvp
