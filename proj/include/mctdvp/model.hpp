#pragma once

#include <string>
#include <vector>

#include "mctdvp/linalg.hpp"

namespace mctdvp {

// Operator conventions used everywhere: basis order (up, down),
// sigma_z = diag(1, -1), sigma_pm = (sigma_x +- i sigma_y) / 2,
// so sigma_plus |down> = |up>.
namespace pauli {
ComplexMatrix identity2();
ComplexMatrix sigma_x();
ComplexMatrix sigma_y();
ComplexMatrix sigma_z();
ComplexMatrix sigma_plus();
ComplexMatrix sigma_minus();
// Lookup by name: id, sx, sy, sz, sp, sm.
ComplexMatrix by_name(const std::string& name);
}  // namespace pauli

// A single-site operator attached to a 1-based site index.
struct SiteOperator {
    ComplexMatrix matrix;  // d x d
    int site = 1;          // 1-based
};

// Nearest-neighbor Hamiltonian K = sum_n h_{n,n+1} plus a list of on-site
// dissipation channels L_alpha. The effective generator is
// Q = -i K - 1/2 sum_alpha L_alpha^dag L_alpha.
struct LindbladModel {
    int n_sites = 0;
    int phys_dim = 2;
    // nn_terms[b] acts on sites (b+1, b+2) in 1-based labels; d^2 x d^2,
    // basis index s_left * d + s_right, Hermitian.
    std::vector<ComplexMatrix> nn_terms;
    std::vector<SiteOperator> lindblad_ops;

    std::string name;
    double epsilon = 0.0;
    double lambda = 0.0;

    int n_channels() const { return static_cast<int>(lindblad_ops.size()); }
};

// K_XZ = sum_n sigma^x_n sigma^x_{n+1} + lambda sigma^z_n sigma^z_{n+1}.
LindbladModel build_kxz(int n_sites, double lambda);

// XXZ: bond term eps (2 s+ s- + 2 s- s+ + lambda sz sz).
LindbladModel build_xxz(int n_sites, double epsilon, double lambda);

enum class DissipationKind { HomogeneousPlus, Bihomogeneous, EdgeDriving };

DissipationKind dissipation_kind_from_name(const std::string& name);

// homogeneous_plus: sigma^+ on every site. bihomogeneous: sigma^+ on the
// first half, sigma^- on the second (n_sites must be even). edge_driving:
// sigma^+ at site 1, sigma^- at site n.
std::vector<SiteOperator> dissipation_preset(DissipationKind kind, int n_sites);

// Kronecker product with a acting on the left site: index (s_a * d + s_b).
ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

}  // namespace mctdvp
