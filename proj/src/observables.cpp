#include "mctdvp/observables.hpp"

#include "mctdvp/exact.hpp"

namespace mctdvp {

ObservableSpec ObservableSpec::parse(const std::string& text) {
    ObservableSpec spec;
    if (text == "sz_profile") {
        spec.kind = ObservableKind::SzProfile;
    } else if (text == "sx_profile") {
        spec.kind = ObservableKind::SxProfile;
    } else if (text == "energy") {
        spec.kind = ObservableKind::Energy;
    } else if (text == "tomography") {
        spec.kind = ObservableKind::Tomography;
    } else if (text.rfind("two_point:", 0) == 0) {
        spec.kind = ObservableKind::TwoPoint;
        const std::string rest = text.substr(10);
        const auto at = rest.find('@');
        if (at == std::string::npos)
            throw InvalidInput("observable '" + text + "': expected two_point:<op>@<site>");
        spec.op_name = rest.substr(0, at);
        if (spec.op_name != "sx" && spec.op_name != "sy" && spec.op_name != "sz")
            throw InvalidInput("observable '" + text + "': op must be sx, sy or sz");
        try {
            spec.ref_site = std::stoi(rest.substr(at + 1));
        } catch (const std::exception&) {
            throw InvalidInput("observable '" + text + "': bad site number");
        }
    } else {
        throw InvalidInput("unknown observable '" + text + "'");
    }
    return spec;
}

std::string ObservableSpec::to_string() const {
    switch (kind) {
        case ObservableKind::SzProfile: return "sz_profile";
        case ObservableKind::SxProfile: return "sx_profile";
        case ObservableKind::Energy: return "energy";
        case ObservableKind::Tomography: return "tomography";
        case ObservableKind::TwoPoint:
            return "two_point:" + op_name + "@" + std::to_string(ref_site);
    }
    return "?";
}

std::string ObservableSpec::file_stem() const {
    if (kind == ObservableKind::TwoPoint)
        return "two_point_" + op_name + "_" + std::to_string(ref_site);
    return to_string();
}

ObservableSet::ObservableSet(std::vector<ObservableSpec> specs, const LindbladModel& model,
                             std::int64_t dense_cap)
    : specs_(std::move(specs)), model_(model), dense_cap_(dense_cap) {
    const int n = model_.n_sites;
    spec_offsets_.push_back(0);
    for (const auto& spec : specs_) {
        switch (spec.kind) {
            case ObservableKind::SzProfile:
                for (int i = 1; i <= n; ++i) labels_.push_back("sz[" + std::to_string(i) + "]");
                break;
            case ObservableKind::SxProfile:
                for (int i = 1; i <= n; ++i) labels_.push_back("sx[" + std::to_string(i) + "]");
                break;
            case ObservableKind::Energy:
                labels_.push_back("energy");
                break;
            case ObservableKind::TwoPoint: {
                if (spec.ref_site < 1 || spec.ref_site > n)
                    throw InvalidInput("two_point reference site out of range");
                for (int m = 1; m <= n; ++m) {
                    if (m == spec.ref_site) continue;
                    labels_.push_back(spec.op_name + spec.op_name + "[" +
                                      std::to_string(spec.ref_site) + "," +
                                      std::to_string(m) + "]");
                }
                break;
            }
            case ObservableKind::Tomography: {
                std::int64_t dim = 1;
                for (int i = 0; i < n; ++i) {
                    dim *= model_.phys_dim;
                    if (dim > kDefaultRhoCap)
                        throw CapExceeded("tomography: d^n exceeds density-matrix cap " +
                                          std::to_string(kDefaultRhoCap));
                }
                for (std::int64_t i = 0; i < dim; ++i)
                    for (std::int64_t j = 0; j < dim; ++j)
                        labels_.push_back("rho[" + std::to_string(i) + "," +
                                          std::to_string(j) + "]");
                break;
            }
        }
        spec_offsets_.push_back(static_cast<int>(labels_.size()));
    }
}

std::pair<int, int> ObservableSet::channel_range(int spec_index) const {
    return {spec_offsets_[static_cast<size_t>(spec_index)],
            spec_offsets_[static_cast<size_t>(spec_index) + 1]};
}

std::vector<Complex> ObservableSet::evaluate_mps(const MpsState& state) const {
    std::vector<Complex> out;
    out.reserve(labels_.size());
    for (const auto& spec : specs_) {
        switch (spec.kind) {
            case ObservableKind::SzProfile: {
                for (const Complex v : expect_profile(state, pauli::sigma_z()))
                    out.push_back(v);
                break;
            }
            case ObservableKind::SxProfile: {
                for (const Complex v : expect_profile(state, pauli::sigma_x()))
                    out.push_back(v);
                break;
            }
            case ObservableKind::Energy:
                out.push_back(expect_nn_hamiltonian(state, model_));
                break;
            case ObservableKind::TwoPoint: {
                const ComplexMatrix op = pauli::by_name(spec.op_name);
                for (int m = 1; m <= state.n_sites(); ++m) {
                    if (m == spec.ref_site) continue;
                    out.push_back(expect_two_point(state, {op, spec.ref_site}, {op, m}));
                }
                break;
            }
            case ObservableKind::Tomography: {
                const ComplexVector psi = to_dense(state, dense_cap_);
                for (Eigen::Index i = 0; i < psi.size(); ++i)
                    for (Eigen::Index j = 0; j < psi.size(); ++j)
                        out.push_back(psi(i) * std::conj(psi(j)));
                break;
            }
        }
    }
    return out;
}

void ObservableSet::build_dense_ops() const {
    if (!dense_ops_.empty()) return;
    const int n = model_.n_sites;
    for (const auto& spec : specs_) {
        switch (spec.kind) {
            case ObservableKind::SzProfile:
                for (int i = 1; i <= n; ++i)
                    dense_ops_.push_back(dense_site_operator(n, model_.phys_dim,
                                                             {pauli::sigma_z(), i}));
                break;
            case ObservableKind::SxProfile:
                for (int i = 1; i <= n; ++i)
                    dense_ops_.push_back(dense_site_operator(n, model_.phys_dim,
                                                             {pauli::sigma_x(), i}));
                break;
            case ObservableKind::Energy:
                dense_ops_.push_back(dense_hamiltonian(model_));
                break;
            case ObservableKind::TwoPoint: {
                const ComplexMatrix op = pauli::by_name(spec.op_name);
                const ComplexMatrix ref =
                    dense_site_operator(n, model_.phys_dim, {op, spec.ref_site});
                for (int m = 1; m <= n; ++m) {
                    if (m == spec.ref_site) continue;
                    dense_ops_.push_back(
                        ref * dense_site_operator(n, model_.phys_dim, {op, m}));
                }
                break;
            }
            case ObservableKind::Tomography:
                // Read off rho directly; no operators needed.
                break;
        }
    }
}

std::vector<Complex> ObservableSet::evaluate_rho(const ComplexMatrix& rho) const {
    build_dense_ops();
    std::vector<Complex> out;
    out.reserve(labels_.size());
    size_t op_index = 0;
    for (const auto& spec : specs_) {
        if (spec.kind == ObservableKind::Tomography) {
            if (rho.rows() * rho.cols() == 0)
                throw InvalidInput("evaluate_rho: empty density matrix");
            for (Eigen::Index i = 0; i < rho.rows(); ++i)
                for (Eigen::Index j = 0; j < rho.cols(); ++j) out.push_back(rho(i, j));
            continue;
        }
        int count = 0;
        switch (spec.kind) {
            case ObservableKind::SzProfile:
            case ObservableKind::SxProfile: count = model_.n_sites; break;
            case ObservableKind::Energy: count = 1; break;
            case ObservableKind::TwoPoint: count = model_.n_sites - 1; break;
            default: break;
        }
        for (int k = 0; k < count; ++k)
            out.push_back((dense_ops_[op_index++] * rho).trace());
    }
    return out;
}

}  // namespace mctdvp
