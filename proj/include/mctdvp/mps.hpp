#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "mctdvp/linalg.hpp"
#include "mctdvp/model.hpp"

namespace mctdvp {

// Amplitudes whose dense representation exceeds this many entries are
// refused by to_dense and friends unless the caller raises the cap.
inline constexpr std::int64_t kDefaultDenseCap = 1 << 14;

// Open-boundary matrix product state. Site n (0-based) holds phys_dim
// matrices A[n][s] of shape bond_dim(n) x bond_dim(n+1), with
// bond_dim(0) = bond_dim(n_sites) = 1. Treated as an immutable value by
// all free functions below: they return updated copies.
class MpsState {
public:
    MpsState(int n_sites, int phys_dim,
             std::vector<std::vector<ComplexMatrix>> tensors);

    int n_sites() const { return n_sites_; }
    int phys_dim() const { return phys_dim_; }
    // bond b, 0..n_sites; bond b sits to the left of site b.
    int bond_dim(int b) const { return bond_dims_[static_cast<size_t>(b)]; }
    const std::vector<int>& bond_dims() const { return bond_dims_; }
    int max_bond_dim() const;

    const ComplexMatrix& tensor(int site, int s) const {
        return tensors_[static_cast<size_t>(site)][static_cast<size_t>(s)];
    }
    const std::vector<ComplexMatrix>& site_tensors(int site) const {
        return tensors_[static_cast<size_t>(site)];
    }
    std::vector<std::vector<ComplexMatrix>>& mutable_tensors() { return tensors_; }
    const std::vector<std::vector<ComplexMatrix>>& tensors() const { return tensors_; }

    bool same_shape(const MpsState& other) const;
    bool same_data(const MpsState& other) const;

private:
    int n_sites_;
    int phys_dim_;
    std::vector<int> bond_dims_;
    std::vector<std::vector<ComplexMatrix>> tensors_;
};

// Product state from per-site local kets (each of length d, normalized).
MpsState product_state(int n_sites, int phys_dim,
                       const std::vector<ComplexVector>& local_kets);

// Convenience: the same ket on every site.
MpsState uniform_product_state(int n_sites, int phys_dim, const ComplexVector& ket);

// Random normalized right-canonical state. Bond dims are capped both by
// max_bond_dim and by the exact rank profile min(d^k, d^(n-k)).
// Deterministic for a fixed seed.
MpsState random_state(int n_sites, int phys_dim, int max_bond_dim, std::uint64_t seed);

// Exact rank-profile bond dimensions for the given cap.
std::vector<int> rank_profile(int n_sites, int phys_dim, int max_bond_dim);

double norm(const MpsState& state);

// Rescale so <Psi|Psi> = 1. The physical ray is unchanged.
MpsState normalize(const MpsState& state);

// Restore the right-canonical gauge: at every site,
// sum_s A^s (A^s)^dag = identity; the represented (normalized) state is
// unchanged. R-factor diagonals are made real-positive so the result is
// unique and reproducible.
MpsState canonicalize_right(const MpsState& state);

// Max over sites of || sum_s A^s A^s^dag - I ||_max; 0 for a canonical state.
double right_canonical_defect(const MpsState& state);

// Optimal SVD truncation of a right-canonical state down to the target
// bond profile (left-to-right sweep, keeping the largest Schmidt values at
// every bond). The result is left-canonical with the remaining norm on the
// last site; callers usually recanonicalize afterwards.
MpsState truncate_to_bond_dims(const MpsState& state, const std::vector<int>& target);

Complex expect_local(const MpsState& state, const SiteOperator& op);

// <O_a O_b>; sites may coincide (matrices are multiplied on-site).
Complex expect_two_point(const MpsState& state, const SiteOperator& op_a,
                         const SiteOperator& op_b);

// <op> at every site in one pair of sweeps; index i is site i+1.
std::vector<Complex> expect_profile(const MpsState& state, const ComplexMatrix& op);

// <K> = sum_bonds <h_{n,n+1}>.
double expect_nn_hamiltonian(const MpsState& state, const LindbladModel& model);

// Amplitudes <s_1 ... s_n | Psi> in lexicographic order (site 1 most
// significant digit).
ComplexVector to_dense(const MpsState& state, std::int64_t dense_cap = kDefaultDenseCap);

// Binary checkpoint encoding: little-endian 64-bit header
// (n_sites, phys_dim, bond_dims[0..n]) followed by tensor entries as
// interleaved re/im doubles, site-major, then s-index, row-major.
void save_state(const MpsState& state, std::ostream& out);
MpsState load_state(std::istream& in);
void save_state_file(const MpsState& state, const std::string& path);
MpsState load_state_file(const std::string& path);

}  // namespace mctdvp
