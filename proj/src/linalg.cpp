#include "mctdvp/linalg.hpp"

#include <cmath>

namespace mctdvp {

namespace {

void require_finite(const ComplexMatrix& m, const char* who) {
    if (!m.allFinite())
        throw InvalidInput(std::string(who) + ": matrix has non-finite entries");
    if (m.rows() < 1 || m.cols() < 1)
        throw InvalidInput(std::string(who) + ": empty matrix");
}

}  // namespace

SvdResult svd(const ComplexMatrix& m) {
    require_finite(m, "svd");
    // Bidiagonal divide-and-conquer; falls back to Jacobi internally for
    // small blocks and is much faster at the bond dimensions the sum-state
    // truncation produces.
    Eigen::BDCSVD<ComplexMatrix> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

QrResult qr_positive(const ComplexMatrix& m) {
    require_finite(m, "qr_positive");
    if (m.rows() < m.cols())
        throw InvalidInput("qr_positive: requires rows >= cols");
    Eigen::HouseholderQR<ComplexMatrix> dec(m);
    const Eigen::Index k = m.cols();
    ComplexMatrix q = dec.householderQ() * ComplexMatrix::Identity(m.rows(), k);
    ComplexMatrix r = dec.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    // Rotate each column phase so diag(r) is real and nonnegative.
    for (Eigen::Index i = 0; i < k; ++i) {
        const Complex d = r(i, i);
        const double a = std::abs(d);
        if (a > 0.0) {
            const Complex phase = d / a;
            q.col(i) *= phase;
            r.row(i) *= std::conj(phase);
        }
    }
    return {std::move(q), std::move(r)};
}

ComplexMatrix pseudo_inverse(const ComplexMatrix& m, double rel_cutoff) {
    require_finite(m, "pseudo_inverse");
    if (!(rel_cutoff >= 0.0 && rel_cutoff < 1.0))
        throw InvalidInput("pseudo_inverse: rel_cutoff must lie in [0, 1)");
    SvdResult dec = svd(m);
    const double s_max = dec.values.size() > 0 ? dec.values(0) : 0.0;
    const double cut = rel_cutoff * s_max;
    RealVector inv = RealVector::Zero(dec.values.size());
    for (Eigen::Index i = 0; i < dec.values.size(); ++i) {
        const double s = dec.values(i);
        if (s > 0.0 && s >= cut) inv(i) = 1.0 / s;
    }
    return dec.v * inv.asDiagonal() * dec.u.adjoint();
}

}  // namespace mctdvp
