#pragma once

#include <Eigen/Dense>

#include "mctdvp/common.hpp"

namespace mctdvp {

// Dense complex matrices, double precision throughout.
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

// Relative singular-value cutoff used by every pseudo-inversion unless a
// caller overrides it.
inline constexpr double kDefaultPinvCutoff = 1e-12;

struct SvdResult {
    ComplexMatrix u;      // rows(m) x k, orthonormal columns
    RealVector values;    // k nonincreasing nonnegative singular values
    ComplexMatrix v;      // cols(m) x k, orthonormal columns; m = u diag(s) v^H
};

struct QrResult {
    ComplexMatrix q;  // orthonormal columns
    ComplexMatrix r;  // upper triangular, real nonnegative diagonal
};

// Thin SVD m = u diag(s) v^H with s sorted nonincreasing.
SvdResult svd(const ComplexMatrix& m);

// Thin QR with the diagonal of r rotated to be real and nonnegative, which
// makes the factorization unique for full-rank input.
QrResult qr_positive(const ComplexMatrix& m);

// Moore-Penrose pseudo-inverse via SVD. Singular values below
// rel_cutoff * s_max are treated as exactly zero.
ComplexMatrix pseudo_inverse(const ComplexMatrix& m,
                             double rel_cutoff = kDefaultPinvCutoff);

}  // namespace mctdvp
