#include "mctdvp/model.hpp"

namespace mctdvp {

namespace pauli {

ComplexMatrix identity2() { return ComplexMatrix::Identity(2, 2); }

ComplexMatrix sigma_x() {
    ComplexMatrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

ComplexMatrix sigma_y() {
    ComplexMatrix m(2, 2);
    m << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
    return m;
}

ComplexMatrix sigma_z() {
    ComplexMatrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

ComplexMatrix sigma_plus() {
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    m(0, 1) = 1;  // |up><down|
    return m;
}

ComplexMatrix sigma_minus() {
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    m(1, 0) = 1;
    return m;
}

ComplexMatrix by_name(const std::string& name) {
    if (name == "id") return identity2();
    if (name == "sx") return sigma_x();
    if (name == "sy") return sigma_y();
    if (name == "sz") return sigma_z();
    if (name == "sp") return sigma_plus();
    if (name == "sm") return sigma_minus();
    throw InvalidInput("unknown operator name '" + name + "'");
}

}  // namespace pauli

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

namespace {

LindbladModel uniform_nn_model(int n_sites, const ComplexMatrix& bond) {
    if (n_sites < 2) throw InvalidInput("nearest-neighbor model needs n_sites >= 2");
    LindbladModel m;
    m.n_sites = n_sites;
    m.phys_dim = 2;
    m.nn_terms.assign(static_cast<size_t>(n_sites - 1), bond);
    return m;
}

}  // namespace

LindbladModel build_kxz(int n_sites, double lambda) {
    const ComplexMatrix bond = kron(pauli::sigma_x(), pauli::sigma_x()) +
                               lambda * kron(pauli::sigma_z(), pauli::sigma_z());
    LindbladModel m = uniform_nn_model(n_sites, bond);
    m.name = "kxz";
    m.lambda = lambda;
    return m;
}

LindbladModel build_xxz(int n_sites, double epsilon, double lambda) {
    const ComplexMatrix bond =
        epsilon * (2.0 * kron(pauli::sigma_plus(), pauli::sigma_minus()) +
                   2.0 * kron(pauli::sigma_minus(), pauli::sigma_plus()) +
                   lambda * kron(pauli::sigma_z(), pauli::sigma_z()));
    LindbladModel m = uniform_nn_model(n_sites, bond);
    m.name = "xxz";
    m.epsilon = epsilon;
    m.lambda = lambda;
    return m;
}

DissipationKind dissipation_kind_from_name(const std::string& name) {
    if (name == "homogeneous_plus") return DissipationKind::HomogeneousPlus;
    if (name == "bihomogeneous") return DissipationKind::Bihomogeneous;
    if (name == "edge_driving") return DissipationKind::EdgeDriving;
    throw InvalidInput("unknown dissipation preset '" + name + "'");
}

std::vector<SiteOperator> dissipation_preset(DissipationKind kind, int n_sites) {
    if (n_sites < 2) throw InvalidInput("dissipation_preset: n_sites >= 2 required");
    std::vector<SiteOperator> ops;
    switch (kind) {
        case DissipationKind::HomogeneousPlus:
            for (int i = 1; i <= n_sites; ++i) ops.push_back({pauli::sigma_plus(), i});
            break;
        case DissipationKind::Bihomogeneous:
            if (n_sites % 2 != 0)
                throw InvalidInput("bihomogeneous dissipation requires even n_sites");
            for (int i = 1; i <= n_sites / 2; ++i) ops.push_back({pauli::sigma_plus(), i});
            for (int i = n_sites / 2 + 1; i <= n_sites; ++i)
                ops.push_back({pauli::sigma_minus(), i});
            break;
        case DissipationKind::EdgeDriving:
            ops.push_back({pauli::sigma_plus(), 1});
            ops.push_back({pauli::sigma_minus(), n_sites});
            break;
    }
    return ops;
}

}  // namespace mctdvp
