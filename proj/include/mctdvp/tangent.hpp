#pragma once

#include <memory>
#include <vector>

#include "mctdvp/model.hpp"
#include "mctdvp/mps.hpp"

namespace mctdvp {

// Mixed-gauge data computed once per (right-canonical, normalized) state and
// shared by every tangent-space operation anchored there.
//
// Sweeping left to right, the stored right-canonical tensors A[n] are
// re-expressed through left-orthonormal tensors and bond center matrices,
//   c[n] A[n][s] = a_l[n][s] c[n+1],        c[0] = (1).
// Tangent vectors are parametrized per site as B[n] = v[n] X[n] where the
// columns of v[n] span the orthogonal complement of the left-orthonormal
// site map (so sum_s a_l[n][s]^dag B[n][s] = 0), except at the last site,
// which is left unconstrained. In this parametrization the tangent-space
// Gram matrix is the identity, so least-squares projections reduce to
// inner products and no site-wise metric inversion appears; pseudo-inverses
// enter only through c[n] when converting back to raw parameter updates.
class TangentWorkspace {
public:
    explicit TangentWorkspace(MpsState state, double pinv_cutoff = kDefaultPinvCutoff,
                              double canonical_tol = 1e-6);

    const MpsState& state() const { return state_; }
    int n_sites() const { return state_.n_sites(); }
    int phys_dim() const { return state_.phys_dim(); }
    double pinv_cutoff() const { return pinv_cutoff_; }

    // Left-orthonormal tensor at site n, physical index s.
    const ComplexMatrix& a_l(int n, int s) const {
        return a_l_[static_cast<size_t>(n)][static_cast<size_t>(s)];
    }
    // Center matrix on bond n (0..n_sites).
    const ComplexMatrix& c(int n) const { return c_[static_cast<size_t>(n)]; }
    // Center-gauge site tensor c(n) * A(n, s).
    const ComplexMatrix& a_c(int n, int s) const {
        return a_c_[static_cast<size_t>(n)][static_cast<size_t>(s)];
    }
    // Null-space basis at site n (0..n_sites-2); may have zero columns.
    const ComplexMatrix& v(int n) const { return v_[static_cast<size_t>(n)]; }
    int null_dim(int n) const { return static_cast<int>(v(n).cols()); }

private:
    MpsState state_;
    double pinv_cutoff_;
    std::vector<std::vector<ComplexMatrix>> a_l_;
    std::vector<std::vector<ComplexMatrix>> a_c_;
    std::vector<ComplexMatrix> c_;
    std::vector<ComplexMatrix> v_;
};

using WorkspacePtr = std::shared_ptr<const TangentWorkspace>;

WorkspacePtr make_workspace(const MpsState& state,
                            double pinv_cutoff = kDefaultPinvCutoff);

// Gauge-fixed tangent parameters anchored at a workspace: x[n] (null_dim(n)
// by bond_dim(n+1)) for every site but the last, plus the unconstrained
// stacked block at the last site. The represented vector is
// |Phi> = sum_n a_l(<n) B[n] A(>n) with B[n] = v[n] x[n].
struct TangentVector {
    WorkspacePtr anchor;
    std::vector<ComplexMatrix> x;  // sites 0 .. n_sites-2
    ComplexMatrix b_last;          // (d * bond_dim(n_sites-1)) x 1

    // Euclidean norm of the parameter blocks; equals the Hilbert-space norm
    // of the represented tangent vector.
    double param_norm() const;

    TangentVector& operator*=(Complex scale);
    // this += scale * other (same anchor required).
    void axpy(Complex scale, const TangentVector& other);
};

TangentVector zero_tangent(WorkspacePtr ws);

// A sum of on-site and nearest-neighbor operator terms. Empty (0x0)
// matrices mean "no term here". bond_terms[b] acts on sites (b, b+1),
// 0-based, with basis index s_left * d + s_right.
struct OperatorSum {
    std::vector<ComplexMatrix> site_terms;  // size n_sites
    std::vector<ComplexMatrix> bond_terms;  // size n_sites-1

    static OperatorSum empty(int n_sites);
};

// Orthogonal projection of (sum of terms) |Psi> onto the tangent space at
// the workspace's state. For operators whose action stays in the tangent
// space (any on-site operator) the projection is exact.
TangentVector project_operator_sum(const WorkspacePtr& ws, const OperatorSum& op);

// b_Q for Q = -i K - 1/2 sum_a L_a^dag L_a assembled from the model.
TangentVector compute_b_q(const WorkspacePtr& ws, const LindbladModel& model);
TangentVector compute_b_q(const MpsState& state, const LindbladModel& model,
                          double pinv_cutoff = kDefaultPinvCutoff);

// b_alpha for one on-site Lindblad operator; exact, not merely optimal.
TangentVector compute_b_alpha(const WorkspacePtr& ws, const SiteOperator& l_op);
TangentVector compute_b_alpha(const MpsState& state, const SiteOperator& l_op,
                              double pinv_cutoff = kDefaultPinvCutoff);

// First-order raw-parameter update a -> a + scale * b on the anchor state:
// site n receives scale * pinv(c[n]) B[n]. The caller renormalizes and
// recanonicalizes afterwards.
MpsState apply_tangent(const MpsState& state, const TangentVector& tangent,
                       Complex scale);

// Dense representation of the tangent vector (test/oracle bridge, small n).
ComplexVector tangent_to_dense(const TangentVector& tangent,
                               std::int64_t dense_cap = kDefaultDenseCap);

// The exact MPS form of |Psi> + |Phi(b)>, built with block tensors on
// doubled bonds. Unlike apply_tangent this has no second-order cross-site
// error, which is what makes the full-rank trajectory reduce to dense QSD
// exactly; the integrator truncates the result back to the original bond
// profile.
MpsState state_plus_tangent(const TangentVector& tangent);

}  // namespace mctdvp
