#include "mctdvp/tangent.hpp"

#include <cmath>

namespace mctdvp {

namespace {

void check_model(const LindbladModel& model, int n_sites, int d, const char* who) {
    if (model.n_sites != n_sites)
        throw InvalidInput(std::string(who) + ": model/state size mismatch");
    if (!model.nn_terms.empty() &&
        model.nn_terms.size() != static_cast<size_t>(n_sites - 1))
        throw InvalidInput(std::string(who) + ": model must have n_sites-1 bond terms");
    for (const auto& h : model.nn_terms) {
        if (h.rows() != d * d || h.cols() != d * d)
            throw InvalidInput(std::string(who) + ": bond term has wrong dimension");
        if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
            throw InvalidInput(std::string(who) + ": bond term is not Hermitian");
    }
    for (const auto& l : model.lindblad_ops) {
        if (l.site < 1 || l.site > n_sites)
            throw InvalidInput(std::string(who) + ": Lindblad site out of range");
        if (l.matrix.rows() != d || l.matrix.cols() != d)
            throw InvalidInput(std::string(who) + ": Lindblad operator has wrong dimension");
    }
}

void check_same_anchor(const TangentVector& a, const TangentVector& b) {
    if (a.anchor.get() != b.anchor.get())
        throw InvalidInput("tangent vectors are anchored at different states");
}

}  // namespace

TangentWorkspace::TangentWorkspace(MpsState state, double pinv_cutoff,
                                   double canonical_tol)
    : state_(std::move(state)), pinv_cutoff_(pinv_cutoff) {
    const double defect = right_canonical_defect(state_);
    if (defect > canonical_tol)
        throw InvalidInput("TangentWorkspace: state is not right-canonical (defect " +
                           std::to_string(defect) + ")");
    const int n_sites = state_.n_sites();
    const int d = state_.phys_dim();
    a_l_.resize(static_cast<size_t>(n_sites));
    a_c_.resize(static_cast<size_t>(n_sites));
    c_.resize(static_cast<size_t>(n_sites) + 1);
    v_.resize(static_cast<size_t>(n_sites > 1 ? n_sites - 1 : 0));
    c_[0] = ComplexMatrix::Identity(1, 1);
    for (int n = 0; n < n_sites; ++n) {
        const int dl = state_.bond_dim(n);
        const int dr = state_.bond_dim(n + 1);
        auto& center_site = a_c_[static_cast<size_t>(n)];
        center_site.resize(static_cast<size_t>(d));
        ComplexMatrix m(static_cast<Eigen::Index>(d) * dl, dr);
        for (int s = 0; s < d; ++s) {
            center_site[static_cast<size_t>(s)] =
                c_[static_cast<size_t>(n)] * state_.tensor(n, s);
            m.block(static_cast<Eigen::Index>(s) * dl, 0, dl, dr) =
                center_site[static_cast<size_t>(s)];
        }
        Eigen::HouseholderQR<ComplexMatrix> dec(m);
        ComplexMatrix full_q =
            dec.householderQ() * ComplexMatrix::Identity(m.rows(), m.rows());
        ComplexMatrix r = dec.matrixQR().topRows(dr).triangularView<Eigen::Upper>();
        // Positive-diagonal convention on the thin factor keeps the whole
        // decomposition reproducible; the complement columns are unaffected.
        for (int i = 0; i < dr; ++i) {
            const Complex diag = r(i, i);
            const double a = std::abs(diag);
            if (a > 0.0) {
                const Complex phase = diag / a;
                full_q.col(i) *= phase;
                r.row(i) *= std::conj(phase);
            }
        }
        auto& site = a_l_[static_cast<size_t>(n)];
        site.resize(static_cast<size_t>(d));
        for (int s = 0; s < d; ++s)
            site[static_cast<size_t>(s)] =
                full_q.block(static_cast<Eigen::Index>(s) * dl, 0, dl, dr);
        c_[static_cast<size_t>(n) + 1] = std::move(r);
        if (n < n_sites - 1)
            v_[static_cast<size_t>(n)] = full_q.rightCols(m.rows() - dr);
    }
}

WorkspacePtr make_workspace(const MpsState& state, double pinv_cutoff) {
    return std::make_shared<const TangentWorkspace>(state, pinv_cutoff);
}

double TangentVector::param_norm() const {
    double sum = b_last.squaredNorm();
    for (const auto& m : x) sum += m.squaredNorm();
    return std::sqrt(sum);
}

TangentVector& TangentVector::operator*=(Complex scale) {
    for (auto& m : x) m *= scale;
    b_last *= scale;
    return *this;
}

void TangentVector::axpy(Complex scale, const TangentVector& other) {
    check_same_anchor(*this, other);
    for (size_t n = 0; n < x.size(); ++n) x[n] += scale * other.x[n];
    b_last += scale * other.b_last;
}

TangentVector zero_tangent(WorkspacePtr ws) {
    TangentVector tv;
    const int n_sites = ws->n_sites();
    tv.x.resize(static_cast<size_t>(n_sites > 1 ? n_sites - 1 : 0));
    for (int n = 0; n + 1 < n_sites; ++n)
        tv.x[static_cast<size_t>(n)] =
            ComplexMatrix::Zero(ws->null_dim(n), ws->state().bond_dim(n + 1));
    tv.b_last = ComplexMatrix::Zero(
        static_cast<Eigen::Index>(ws->phys_dim()) * ws->state().bond_dim(n_sites - 1), 1);
    tv.anchor = std::move(ws);
    return tv;
}

OperatorSum OperatorSum::empty(int n_sites) {
    OperatorSum op;
    op.site_terms.resize(static_cast<size_t>(n_sites));
    op.bond_terms.resize(static_cast<size_t>(n_sites > 1 ? n_sites - 1 : 0));
    return op;
}

TangentVector project_operator_sum(const WorkspacePtr& ws, const OperatorSum& op) {
    const MpsState& psi = ws->state();
    const int n_sites = psi.n_sites();
    const int d = psi.phys_dim();
    if (op.site_terms.size() != static_cast<size_t>(n_sites) ||
        op.bond_terms.size() != static_cast<size_t>(n_sites > 1 ? n_sites - 1 : 0))
        throw InvalidInput("project_operator_sum: term lists have wrong length");

    auto has = [](const ComplexMatrix& m) { return m.size() > 0; };
    auto site_term = [&](int n) -> const ComplexMatrix& {
        return op.site_terms[static_cast<size_t>(n)];
    };
    auto bond_term = [&](int b) -> const ComplexMatrix& {
        return op.bond_terms[static_cast<size_t>(b)];
    };

    // Coefficient-weighted sums over the ket physical index; grouping these
    // first turns the d^4 bond loops into d^3 matrix products.
    auto ket_mix = [&](const ComplexMatrix& weights, int row, int n,
                       bool center) -> ComplexMatrix {
        ComplexMatrix w = ComplexMatrix::Zero(psi.bond_dim(n), psi.bond_dim(n + 1));
        for (int sp = 0; sp < d; ++sp) {
            const Complex coeff = weights(row, sp);
            if (coeff != Complex(0, 0))
                w += coeff * (center ? ws->a_c(n, sp) : psi.tensor(n, sp));
        }
        return w;
    };

    // Left environments with the accumulated operator terms inside. Bra side
    // runs over left-orthonormal tensors, ket side over the state tensors;
    // the plain version of this environment is the center matrix c[n].
    std::vector<ComplexMatrix> elq(static_cast<size_t>(n_sites) + 1);
    elq[0] = ComplexMatrix::Zero(1, 1);
    for (int n = 0; n < n_sites; ++n) {
        const int dr = psi.bond_dim(n + 1);
        ComplexMatrix next = ComplexMatrix::Zero(dr, dr);
        for (int s = 0; s < d; ++s)
            next += ws->a_l(n, s).adjoint() * elq[static_cast<size_t>(n)] * psi.tensor(n, s);
        if (has(site_term(n))) {
            const ComplexMatrix& q = site_term(n);
            for (int s = 0; s < d; ++s)
                next += ws->a_l(n, s).adjoint() * ket_mix(q, s, n, true);
        }
        if (n >= 1 && has(bond_term(n - 1))) {
            const ComplexMatrix& h = bond_term(n - 1);
            for (int u = 0; u < d; ++u)
                for (int up = 0; up < d; ++up) {
                    const ComplexMatrix half =
                        ws->a_l(n - 1, u).adjoint() * ws->a_c(n - 1, up);
                    for (int s = 0; s < d; ++s) {
                        ComplexMatrix w =
                            ComplexMatrix::Zero(psi.bond_dim(n), psi.bond_dim(n + 1));
                        bool any = false;
                        for (int sp = 0; sp < d; ++sp) {
                            const Complex coeff = h(u * d + s, up * d + sp);
                            if (coeff != Complex(0, 0)) {
                                w += coeff * psi.tensor(n, sp);
                                any = true;
                            }
                        }
                        if (any) next += ws->a_l(n, s).adjoint() * (half * w);
                    }
                }
        }
        elq[static_cast<size_t>(n) + 1] = std::move(next);
    }

    // Right environments (rows index the ket bond) with terms inside; the
    // plain right environment of a right-canonical chain is the identity.
    std::vector<ComplexMatrix> erq(static_cast<size_t>(n_sites) + 1);
    erq[static_cast<size_t>(n_sites)] = ComplexMatrix::Zero(1, 1);
    for (int n = n_sites - 1; n >= 0; --n) {
        const int dl = psi.bond_dim(n);
        ComplexMatrix prev = ComplexMatrix::Zero(dl, dl);
        for (int s = 0; s < d; ++s)
            prev += psi.tensor(n, s) * erq[static_cast<size_t>(n) + 1] *
                    psi.tensor(n, s).adjoint();
        if (has(site_term(n))) {
            const ComplexMatrix& q = site_term(n);
            for (int s = 0; s < d; ++s)
                prev += ket_mix(q, s, n, false) * psi.tensor(n, s).adjoint();
        }
        if (n + 1 < n_sites && has(bond_term(n))) {
            const ComplexMatrix& h = bond_term(n);
            for (int u = 0; u < d; ++u)
                for (int up = 0; up < d; ++up) {
                    const ComplexMatrix rb =
                        psi.tensor(n + 1, up) * psi.tensor(n + 1, u).adjoint();
                    for (int s = 0; s < d; ++s) {
                        ComplexMatrix w = ComplexMatrix::Zero(dl, psi.bond_dim(n + 1));
                        bool any = false;
                        for (int sp = 0; sp < d; ++sp) {
                            const Complex coeff = h(s * d + u, sp * d + up);
                            if (coeff != Complex(0, 0)) {
                                w += coeff * psi.tensor(n, sp);
                                any = true;
                            }
                        }
                        if (any) prev += (w * rb) * psi.tensor(n, s).adjoint();
                    }
                }
        }
        erq[static_cast<size_t>(n)] = std::move(prev);
    }

    // Per-site overlap blocks F[n][s] with the single-site derivative slots,
    // then the optimal parameters are plain inner products with the basis.
    TangentVector tv = zero_tangent(ws);
    for (int n = 0; n < n_sites; ++n) {
        const int dl = psi.bond_dim(n);
        const int dr = psi.bond_dim(n + 1);
        std::vector<ComplexMatrix> half, rb;
        if (n >= 1 && has(bond_term(n - 1))) {
            half.resize(static_cast<size_t>(d) * d);
            for (int u = 0; u < d; ++u)
                for (int up = 0; up < d; ++up)
                    half[static_cast<size_t>(u) * d + up] =
                        ws->a_l(n - 1, u).adjoint() * ws->a_c(n - 1, up);
        }
        if (n + 1 < n_sites && has(bond_term(n))) {
            rb.resize(static_cast<size_t>(d) * d);
            for (int u = 0; u < d; ++u)
                for (int up = 0; up < d; ++up)
                    rb[static_cast<size_t>(u) * d + up] =
                        psi.tensor(n + 1, up) * psi.tensor(n + 1, u).adjoint();
        }
        ComplexMatrix f(static_cast<Eigen::Index>(d) * dl, dr);
        for (int s = 0; s < d; ++s) {
            ComplexMatrix fs = elq[static_cast<size_t>(n)] * psi.tensor(n, s) +
                               ws->a_c(n, s) * erq[static_cast<size_t>(n) + 1];
            if (has(site_term(n))) fs += ket_mix(site_term(n), s, n, true);
            if (!half.empty()) {
                const ComplexMatrix& h = bond_term(n - 1);
                for (int u = 0; u < d; ++u)
                    for (int up = 0; up < d; ++up) {
                        ComplexMatrix w = ComplexMatrix::Zero(dl, dr);
                        bool any = false;
                        for (int sp = 0; sp < d; ++sp) {
                            const Complex coeff = h(u * d + s, up * d + sp);
                            if (coeff != Complex(0, 0)) {
                                w += coeff * psi.tensor(n, sp);
                                any = true;
                            }
                        }
                        if (any) fs += half[static_cast<size_t>(u) * d + up] * w;
                    }
            }
            if (!rb.empty()) {
                const ComplexMatrix& h = bond_term(n);
                for (int u = 0; u < d; ++u)
                    for (int up = 0; up < d; ++up) {
                        ComplexMatrix w = ComplexMatrix::Zero(dl, dr);
                        bool any = false;
                        for (int sp = 0; sp < d; ++sp) {
                            const Complex coeff = h(s * d + u, sp * d + up);
                            if (coeff != Complex(0, 0)) {
                                w += coeff * ws->a_c(n, sp);
                                any = true;
                            }
                        }
                        if (any) fs += w * rb[static_cast<size_t>(u) * d + up];
                    }
            }
            f.block(static_cast<Eigen::Index>(s) * dl, 0, dl, dr) = fs;
        }
        if (n < n_sites - 1)
            tv.x[static_cast<size_t>(n)] = ws->v(n).adjoint() * f;
        else
            tv.b_last = f;
    }
    return tv;
}

namespace {

OperatorSum q_operator_sum(const TangentWorkspace& ws, const LindbladModel& model) {
    const int n_sites = ws.n_sites();
    const int d = ws.phys_dim();
    check_model(model, n_sites, d, "compute_b_q");
    OperatorSum op = OperatorSum::empty(n_sites);
    for (size_t b = 0; b < model.nn_terms.size(); ++b)
        op.bond_terms[b] = Complex(0, -1) * model.nn_terms[b];
    for (const auto& l : model.lindblad_ops) {
        auto& site = op.site_terms[static_cast<size_t>(l.site - 1)];
        if (site.size() == 0) site = ComplexMatrix::Zero(d, d);
        site -= 0.5 * l.matrix.adjoint() * l.matrix;
    }
    return op;
}

}  // namespace

TangentVector compute_b_q(const WorkspacePtr& ws, const LindbladModel& model) {
    return project_operator_sum(ws, q_operator_sum(*ws, model));
}

TangentVector compute_b_q(const MpsState& state, const LindbladModel& model,
                          double pinv_cutoff) {
    return compute_b_q(make_workspace(state, pinv_cutoff), model);
}

TangentVector compute_b_alpha(const WorkspacePtr& ws, const SiteOperator& l_op) {
    if (l_op.site < 1 || l_op.site > ws->n_sites())
        throw InvalidInput("compute_b_alpha: site out of range");
    if (l_op.matrix.rows() != ws->phys_dim() || l_op.matrix.cols() != ws->phys_dim())
        throw InvalidInput("compute_b_alpha: operator dimension mismatch");
    OperatorSum op = OperatorSum::empty(ws->n_sites());
    op.site_terms[static_cast<size_t>(l_op.site - 1)] = l_op.matrix;
    return project_operator_sum(ws, op);
}

TangentVector compute_b_alpha(const MpsState& state, const SiteOperator& l_op,
                              double pinv_cutoff) {
    return compute_b_alpha(make_workspace(state, pinv_cutoff), l_op);
}

MpsState apply_tangent(const MpsState& state, const TangentVector& tangent,
                       Complex scale) {
    const TangentWorkspace& ws = *tangent.anchor;
    if (!ws.state().same_data(state))
        throw InvalidInput("apply_tangent: tangent is not anchored at this state");
    if (scale == Complex(0, 0)) return state;
    const int n_sites = state.n_sites();
    const int d = state.phys_dim();
    MpsState out = state;
    for (int n = 0; n < n_sites; ++n) {
        const int dl = state.bond_dim(n);
        const int dr = state.bond_dim(n + 1);
        ComplexMatrix b;
        if (n < n_sites - 1) {
            if (ws.null_dim(n) == 0) continue;
            b = ws.v(n) * tangent.x[static_cast<size_t>(n)];
        } else {
            b = tangent.b_last;
        }
        // Back to the raw right-canonical parameters through the bond factor.
        const ComplexMatrix cinv =
            n == 0 ? ComplexMatrix::Identity(1, 1)
                   : pseudo_inverse(ws.c(n), ws.pinv_cutoff());
        for (int s = 0; s < d; ++s)
            out.mutable_tensors()[static_cast<size_t>(n)][static_cast<size_t>(s)] +=
                scale * (cinv * b.block(static_cast<Eigen::Index>(s) * dl, 0, dl, dr));
    }
    return out;
}

MpsState state_plus_tangent(const TangentVector& tangent) {
    const TangentWorkspace& ws = *tangent.anchor;
    const MpsState& psi = ws.state();
    const int n_sites = psi.n_sites();
    const int d = psi.phys_dim();

    auto b_block = [&](int n) -> ComplexMatrix {
        if (n < n_sites - 1) {
            if (ws.null_dim(n) == 0)
                return ComplexMatrix::Zero(
                    static_cast<Eigen::Index>(d) * psi.bond_dim(n), psi.bond_dim(n + 1));
            return ws.v(n) * tangent.x[static_cast<size_t>(n)];
        }
        return tangent.b_last;
    };

    if (n_sites == 1) {
        const ComplexMatrix b = b_block(0);
        std::vector<ComplexMatrix> site;
        for (int s = 0; s < d; ++s)
            site.push_back(psi.tensor(0, s) + b.block(s, 0, 1, 1));
        return MpsState(1, d, {site});
    }

    // Block chain on doubled bonds: the upper rail carries the
    // left-orthonormal prefix, the lower rail the right-canonical suffix,
    // and B makes the single crossing.
    std::vector<std::vector<ComplexMatrix>> raw(static_cast<size_t>(n_sites));
    {
        const int dr = psi.bond_dim(1);
        const ComplexMatrix b = b_block(0);
        for (int s = 0; s < d; ++s) {
            ComplexMatrix t(1, 2 * dr);
            t.block(0, 0, 1, dr) = ws.a_l(0, s);
            t.block(0, dr, 1, dr) = psi.tensor(0, s) + b.block(s, 0, 1, dr);
            raw[0].push_back(std::move(t));
        }
    }
    for (int n = 1; n < n_sites - 1; ++n) {
        const int dl = psi.bond_dim(n);
        const int dr = psi.bond_dim(n + 1);
        const ComplexMatrix b = b_block(n);
        for (int s = 0; s < d; ++s) {
            ComplexMatrix t = ComplexMatrix::Zero(2 * dl, 2 * dr);
            t.block(0, 0, dl, dr) = ws.a_l(n, s);
            t.block(0, dr, dl, dr) = b.block(static_cast<Eigen::Index>(s) * dl, 0, dl, dr);
            t.block(dl, dr, dl, dr) = psi.tensor(n, s);
            raw[static_cast<size_t>(n)].push_back(std::move(t));
        }
    }
    {
        const int n = n_sites - 1;
        const int dl = psi.bond_dim(n);
        const ComplexMatrix b = b_block(n);
        for (int s = 0; s < d; ++s) {
            ComplexMatrix t(2 * dl, 1);
            t.block(0, 0, dl, 1) = b.block(static_cast<Eigen::Index>(s) * dl, 0, dl, 1);
            t.block(dl, 0, dl, 1) = psi.tensor(n, s);
            raw[static_cast<size_t>(n)].push_back(std::move(t));
        }
    }

    // Doubled bonds overshoot the exponential rank caps near both edges.
    // Two lossless QR passes trim every bond to a realizable size; after
    // the second pass the chain is right-canonical with the norm carried
    // by site 0.
    ComplexMatrix carry = ComplexMatrix::Identity(1, 1);
    for (int n = 0; n < n_sites - 1; ++n) {
        const Eigen::Index rows = carry.rows();
        const Eigen::Index cols = raw[static_cast<size_t>(n)][0].cols();
        ComplexMatrix m(static_cast<Eigen::Index>(d) * rows, cols);
        for (int s = 0; s < d; ++s)
            m.block(static_cast<Eigen::Index>(s) * rows, 0, rows, cols) =
                carry * raw[static_cast<size_t>(n)][static_cast<size_t>(s)];
        const Eigen::Index k = std::min(m.rows(), m.cols());
        Eigen::HouseholderQR<ComplexMatrix> dec(m);
        const ComplexMatrix q = dec.householderQ() * ComplexMatrix::Identity(m.rows(), k);
        for (int s = 0; s < d; ++s)
            raw[static_cast<size_t>(n)][static_cast<size_t>(s)] =
                q.block(static_cast<Eigen::Index>(s) * rows, 0, rows, k);
        carry = dec.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    }
    for (int s = 0; s < d; ++s)
        raw[static_cast<size_t>(n_sites) - 1][static_cast<size_t>(s)] =
            carry * raw[static_cast<size_t>(n_sites) - 1][static_cast<size_t>(s)];

    carry = ComplexMatrix::Identity(1, 1);
    for (int n = n_sites - 1; n >= 1; --n) {
        const Eigen::Index rows = raw[static_cast<size_t>(n)][0].rows();
        const Eigen::Index cols = carry.cols();
        ComplexMatrix m(rows, static_cast<Eigen::Index>(d) * cols);
        for (int s = 0; s < d; ++s)
            m.block(0, static_cast<Eigen::Index>(s) * cols, rows, cols) =
                raw[static_cast<size_t>(n)][static_cast<size_t>(s)] * carry;
        const Eigen::Index k = std::min(m.rows(), m.cols());
        Eigen::HouseholderQR<ComplexMatrix> dec(m.adjoint());
        const ComplexMatrix q =
            (dec.householderQ() * ComplexMatrix::Identity(m.cols(), k)).adjoint();
        for (int s = 0; s < d; ++s)
            raw[static_cast<size_t>(n)][static_cast<size_t>(s)] =
                q.block(0, static_cast<Eigen::Index>(s) * cols, k, cols);
        carry = ComplexMatrix(dec.matrixQR().topRows(k).triangularView<Eigen::Upper>())
                    .adjoint();
    }
    for (int s = 0; s < d; ++s) raw[0][static_cast<size_t>(s)] = raw[0][static_cast<size_t>(s)] * carry;
    return MpsState(n_sites, d, std::move(raw));
}

ComplexVector tangent_to_dense(const TangentVector& tangent, std::int64_t dense_cap) {
    const TangentWorkspace& ws = *tangent.anchor;
    const MpsState& psi = ws.state();
    const int n_sites = psi.n_sites();
    const int d = psi.phys_dim();
    ComplexVector total;
    for (int n = 0; n < n_sites; ++n) {
        const int dl = psi.bond_dim(n);
        const int dr = psi.bond_dim(n + 1);
        ComplexMatrix b;
        if (n < n_sites - 1) {
            if (ws.null_dim(n) == 0) continue;
            b = ws.v(n) * tangent.x[static_cast<size_t>(n)];
        } else {
            b = tangent.b_last;
        }
        auto tensors = psi.tensors();
        for (int m = 0; m < n; ++m)
            for (int s = 0; s < d; ++s)
                tensors[static_cast<size_t>(m)][static_cast<size_t>(s)] = ws.a_l(m, s);
        for (int s = 0; s < d; ++s)
            tensors[static_cast<size_t>(n)][static_cast<size_t>(s)] =
                b.block(static_cast<Eigen::Index>(s) * dl, 0, dl, dr);
        const ComplexVector term =
            to_dense(MpsState(n_sites, d, std::move(tensors)), dense_cap);
        if (total.size() == 0)
            total = term;
        else
            total += term;
    }
    if (total.size() == 0) {
        std::int64_t dim = 1;
        for (int i = 0; i < n_sites; ++i) dim *= d;
        total = ComplexVector::Zero(dim);
    }
    return total;
}

}  // namespace mctdvp
