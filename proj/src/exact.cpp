#include "mctdvp/exact.hpp"

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

namespace mctdvp {

double DensityMatrix::min_eigenvalue() const {
    ComplexMatrix h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
    return es.eigenvalues().minCoeff();
}

namespace {

std::int64_t hilbert_dim(const LindbladModel& model) {
    std::int64_t dim = 1;
    for (int i = 0; i < model.n_sites; ++i) dim *= model.phys_dim;
    return dim;
}

ComplexMatrix dense_identity(std::int64_t dim) { return ComplexMatrix::Identity(dim, dim); }

void check_dims(const DensityMatrix& rho, const LindbladModel& model, const char* who) {
    if (rho.rho.rows() != rho.rho.cols())
        throw InvalidInput(std::string(who) + ": density matrix must be square");
    if (rho.rho.rows() != hilbert_dim(model))
        throw InvalidInput(std::string(who) + ": density matrix dimension mismatch");
}

}  // namespace

ComplexMatrix dense_site_operator(int n_sites, int phys_dim, const SiteOperator& op) {
    if (op.site < 1 || op.site > n_sites)
        throw InvalidInput("dense_site_operator: site out of range");
    std::int64_t left = 1, right = 1;
    for (int i = 1; i < op.site; ++i) left *= phys_dim;
    for (int i = op.site; i < n_sites; ++i) right *= phys_dim;
    return kron(kron(dense_identity(left), op.matrix), dense_identity(right));
}

ComplexMatrix dense_hamiltonian(const LindbladModel& model) {
    const std::int64_t dim = hilbert_dim(model);
    ComplexMatrix k = ComplexMatrix::Zero(dim, dim);
    const int d = model.phys_dim;
    for (size_t b = 0; b < model.nn_terms.size(); ++b) {
        std::int64_t left = 1, right = 1;
        for (size_t i = 0; i < b; ++i) left *= d;
        for (size_t i = b + 2; i < static_cast<size_t>(model.n_sites); ++i) right *= d;
        k += kron(kron(dense_identity(left), model.nn_terms[b]), dense_identity(right));
    }
    return k;
}

std::vector<ComplexMatrix> dense_lindblad_ops(const LindbladModel& model) {
    std::vector<ComplexMatrix> ops;
    ops.reserve(model.lindblad_ops.size());
    for (const auto& l : model.lindblad_ops)
        ops.push_back(dense_site_operator(model.n_sites, model.phys_dim, l));
    return ops;
}

ComplexMatrix dense_q_operator(const LindbladModel& model) {
    const std::int64_t dim = hilbert_dim(model);
    ComplexMatrix q = Complex(0, -1) * dense_hamiltonian(model);
    for (const auto& l : dense_lindblad_ops(model)) q -= 0.5 * l.adjoint() * l;
    (void)dim;
    return q;
}

ComplexMatrix lindblad_rhs(const DensityMatrix& rho, const LindbladModel& model) {
    check_dims(rho, model, "lindblad_rhs");
    const ComplexMatrix k = dense_hamiltonian(model);
    ComplexMatrix out = Complex(0, -1) * (k * rho.rho - rho.rho * k);
    for (const auto& l : dense_lindblad_ops(model)) {
        const ComplexMatrix ldl = l.adjoint() * l;
        out -= 0.5 * (ldl * rho.rho + rho.rho * ldl - 2.0 * l * rho.rho * l.adjoint());
    }
    return out;
}

ComplexMatrix lindblad_rhs_q_form(const DensityMatrix& rho, const LindbladModel& model) {
    check_dims(rho, model, "lindblad_rhs_q_form");
    const ComplexMatrix q = dense_q_operator(model);
    ComplexMatrix out = q * rho.rho + rho.rho * q.adjoint();
    for (const auto& l : dense_lindblad_ops(model)) out += l * rho.rho * l.adjoint();
    return out;
}

MasterSeries integrate_master(const DensityMatrix& rho0, const LindbladModel& model,
                              double t_final, double dt, int record_every,
                              std::int64_t rho_cap) {
    check_dims(rho0, model, "integrate_master");
    if (rho0.rho.rows() > rho_cap)
        throw CapExceeded("integrate_master: dimension " + std::to_string(rho0.rho.rows()) +
                          " exceeds dense cap " + std::to_string(rho_cap));
    if (!(dt > 0.0) || !(t_final > 0.0) || dt > t_final + 1e-15)
        throw InvalidInput("integrate_master: need 0 < dt <= t_final");
    if (record_every < 1) throw InvalidInput("integrate_master: record_every >= 1");

    const ComplexMatrix k = dense_hamiltonian(model);
    const std::vector<ComplexMatrix> ls = dense_lindblad_ops(model);
    auto rhs = [&](const ComplexMatrix& r) {
        ComplexMatrix out = Complex(0, -1) * (k * r - r * k);
        for (const auto& l : ls) {
            const ComplexMatrix ldl = l.adjoint() * l;
            out -= 0.5 * (ldl * r + r * ldl - 2.0 * l * r * l.adjoint());
        }
        return out;
    };

    const int n_steps = static_cast<int>(std::ceil(t_final / dt - 1e-9));
    MasterSeries series;
    ComplexMatrix r = rho0.rho;
    series.times.push_back(0.0);
    series.states.push_back({r});
    for (int step = 1; step <= n_steps; ++step) {
        const ComplexMatrix k1 = rhs(r);
        const ComplexMatrix k2 = rhs(r + 0.5 * dt * k1);
        const ComplexMatrix k3 = rhs(r + 0.5 * dt * k2);
        const ComplexMatrix k4 = rhs(r + dt * k3);
        r += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (step % record_every == 0 || step == n_steps) {
            series.times.push_back(step * dt);
            series.states.push_back({r});
        }
    }
    return series;
}

DensityMatrix evolve_master_expm(const DensityMatrix& rho0, const LindbladModel& model,
                                 double t) {
    check_dims(rho0, model, "evolve_master_expm");
    const std::int64_t dim = rho0.rho.rows();
    if (dim > 64) throw CapExceeded("evolve_master_expm: dimension > 64");
    const ComplexMatrix k = dense_hamiltonian(model);
    const ComplexMatrix id = dense_identity(dim);
    // Column-stacking convention: vec(A X B) = (B^T kron A) vec(X).
    ComplexMatrix super = Complex(0, -1) * (kron(id, k) - kron(k.transpose(), id));
    for (const auto& l : dense_lindblad_ops(model)) {
        const ComplexMatrix ldl = l.adjoint() * l;
        super += kron(l.conjugate(), l) -
                 0.5 * (kron(id, ldl) + kron(ldl.transpose(), id));
    }
    const ComplexMatrix prop = (t * super).exp();
    ComplexVector v = Eigen::Map<const ComplexVector>(rho0.rho.data(), dim * dim);
    ComplexVector w = prop * v;
    DensityMatrix out;
    out.rho = Eigen::Map<const ComplexMatrix>(w.data(), dim, dim);
    return out;
}

DenseQsdResult dense_qsd_trajectory(const ComplexVector& psi0, const LindbladModel& model,
                                    double dt, const std::vector<WienerIncrementSet>& noise,
                                    std::int64_t dense_cap) {
    if (psi0.size() != hilbert_dim(model))
        throw InvalidInput("dense_qsd_trajectory: psi0 dimension mismatch");
    if (psi0.size() > dense_cap)
        throw CapExceeded("dense_qsd_trajectory: dimension exceeds dense cap");
    if (!(dt > 0.0)) throw InvalidInput("dense_qsd_trajectory: dt > 0 required");
    const ComplexMatrix q = dense_q_operator(model);
    const std::vector<ComplexMatrix> ls = dense_lindblad_ops(model);

    DenseQsdResult out;
    ComplexVector psi = psi0.normalized();
    out.times.push_back(0.0);
    out.states.push_back(psi);
    for (size_t step = 0; step < noise.size(); ++step) {
        const WienerIncrementSet& w = noise[step];
        if (static_cast<int>(w.dw.size()) != model.n_channels())
            throw InvalidInput("dense_qsd_trajectory: noise channel count mismatch");
        ComplexVector dpsi = q * psi * dt;
        for (size_t a = 0; a < ls.size(); ++a) {
            const ComplexVector lpsi = ls[a] * psi;
            const Complex l_bar = std::conj(psi.dot(lpsi));  // <psi|L^dag|psi>
            dpsi += l_bar * lpsi * dt + lpsi * w.dw[a];
        }
        psi += dpsi;
        const double nrm = psi.norm();
        if (!std::isfinite(nrm) || nrm < 1e-300)
            throw TrajectoryFailure("dense_qsd_trajectory: norm collapse",
                                    static_cast<double>(step) * dt);
        psi /= nrm;
        out.times.push_back(static_cast<double>(step + 1) * dt);
        out.states.push_back(psi);
    }
    return out;
}

TangentArgminResult brute_force_tangent_argmin(const MpsState& state,
                                               const ComplexVector& target,
                                               double fd_step) {
    std::int64_t n_params = 0;
    for (int n = 0; n < state.n_sites(); ++n)
        n_params += static_cast<std::int64_t>(state.phys_dim()) * state.bond_dim(n) *
                    state.bond_dim(n + 1);
    if (n_params > 1024)
        throw InvalidInput("brute_force_tangent_argmin: too many raw parameters (" +
                           std::to_string(n_params) + ")");
    const ComplexVector psi = to_dense(state);
    if (target.size() != psi.size())
        throw InvalidInput("brute_force_tangent_argmin: target dimension mismatch");

    // Central finite differences over every raw tensor entry. The state is
    // multilinear in each entry, so these derivatives are exact to roundoff.
    ComplexMatrix basis(psi.size(), n_params);
    std::int64_t col = 0;
    for (int n = 0; n < state.n_sites(); ++n)
        for (int s = 0; s < state.phys_dim(); ++s)
            for (int i = 0; i < state.bond_dim(n); ++i)
                for (int j = 0; j < state.bond_dim(n + 1); ++j) {
                    MpsState plus = state;
                    plus.mutable_tensors()[static_cast<size_t>(n)][static_cast<size_t>(s)](i, j) +=
                        fd_step;
                    MpsState minus = state;
                    minus.mutable_tensors()[static_cast<size_t>(n)][static_cast<size_t>(s)](i, j) -=
                        fd_step;
                    basis.col(col++) =
                        (to_dense(plus) - to_dense(minus)) / (2.0 * fd_step);
                }

    const ComplexMatrix metric = basis.adjoint() * basis;  // raw g_jk
    const ComplexVector rhs = basis.adjoint() * target;
    TangentArgminResult res;
    res.coeffs = pseudo_inverse(metric) * rhs;
    res.tangent = basis * res.coeffs;
    res.residual = (res.tangent - target).norm();
    return res;
}

}  // namespace mctdvp
