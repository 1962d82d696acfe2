#include "mctdvp/mps.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "mctdvp/rng.hpp"

namespace mctdvp {

namespace {

constexpr double kZeroNormFloor = 1e-300;

void check_site_range(const MpsState& state, int site_1based, const char* who) {
    if (site_1based < 1 || site_1based > state.n_sites())
        throw InvalidInput(std::string(who) + ": site " + std::to_string(site_1based) +
                           " out of range 1.." + std::to_string(state.n_sites()));
}

// E' = sum_s bra[s]^dag E ket[s]; E rows index the bra-side virtual bond.
ComplexMatrix advance_plain(const ComplexMatrix& env,
                            const std::vector<ComplexMatrix>& bra,
                            const std::vector<ComplexMatrix>& ket) {
    ComplexMatrix out = ComplexMatrix::Zero(bra[0].cols(), ket[0].cols());
    for (size_t s = 0; s < bra.size(); ++s) out += bra[s].adjoint() * env * ket[s];
    return out;
}

// E' = sum_{s,s'} op(s,s') bra[s]^dag E ket[s'].
ComplexMatrix advance_op(const ComplexMatrix& env,
                         const std::vector<ComplexMatrix>& bra,
                         const std::vector<ComplexMatrix>& ket,
                         const ComplexMatrix& op) {
    ComplexMatrix out = ComplexMatrix::Zero(bra[0].cols(), ket[0].cols());
    for (Eigen::Index s = 0; s < op.rows(); ++s)
        for (Eigen::Index sp = 0; sp < op.cols(); ++sp) {
            const Complex c = op(s, sp);
            if (c != Complex(0, 0))
                out += c * bra[static_cast<size_t>(s)].adjoint() * env *
                       ket[static_cast<size_t>(sp)];
        }
    return out;
}

// Full <Psi|O|Psi> with on-site insertions given as (0-based site, matrix).
Complex contract_with_insertions(
    const MpsState& state,
    const std::vector<std::pair<int, ComplexMatrix>>& insertions) {
    ComplexMatrix env = ComplexMatrix::Identity(1, 1);
    for (int n = 0; n < state.n_sites(); ++n) {
        const ComplexMatrix* op = nullptr;
        for (const auto& ins : insertions)
            if (ins.first == n) op = &ins.second;
        env = op ? advance_op(env, state.site_tensors(n), state.site_tensors(n), *op)
                 : advance_plain(env, state.site_tensors(n), state.site_tensors(n));
    }
    return env(0, 0);
}

}  // namespace

MpsState::MpsState(int n_sites, int phys_dim,
                   std::vector<std::vector<ComplexMatrix>> tensors)
    : n_sites_(n_sites), phys_dim_(phys_dim), tensors_(std::move(tensors)) {
    if (n_sites_ < 1) throw InvalidInput("MpsState: n_sites >= 1 required");
    if (phys_dim_ < 2) throw InvalidInput("MpsState: phys_dim >= 2 required");
    if (tensors_.size() != static_cast<size_t>(n_sites_))
        throw InvalidInput("MpsState: tensor count != n_sites");
    bond_dims_.assign(static_cast<size_t>(n_sites_) + 1, 0);
    bond_dims_[0] = 1;
    for (int n = 0; n < n_sites_; ++n) {
        const auto& site = tensors_[static_cast<size_t>(n)];
        if (site.size() != static_cast<size_t>(phys_dim_))
            throw InvalidInput("MpsState: site " + std::to_string(n + 1) +
                               " does not hold phys_dim matrices");
        const Eigen::Index rows = site[0].rows(), cols = site[0].cols();
        for (const auto& m : site) {
            if (m.rows() != rows || m.cols() != cols)
                throw InvalidInput("MpsState: inconsistent matrix shapes within a site");
            if (!m.allFinite())
                throw InvalidInput("MpsState: non-finite tensor entries");
        }
        if (rows != bond_dims_[static_cast<size_t>(n)])
            throw InvalidInput("MpsState: bond dimension mismatch at site " +
                               std::to_string(n + 1));
        if (rows < 1 || cols < 1) throw InvalidInput("MpsState: bond dims must be >= 1");
        bond_dims_[static_cast<size_t>(n) + 1] = static_cast<int>(cols);
    }
    if (bond_dims_.back() != 1) throw InvalidInput("MpsState: right boundary bond must be 1");
    for (int n = 0; n < n_sites_; ++n) {
        const long dl = bond_dims_[static_cast<size_t>(n)];
        const long dr = bond_dims_[static_cast<size_t>(n) + 1];
        if (dr > phys_dim_ * dl || dl > phys_dim_ * dr)
            throw InvalidInput("MpsState: bond profile not realizable for an MPS");
    }
}

int MpsState::max_bond_dim() const {
    return *std::max_element(bond_dims_.begin(), bond_dims_.end());
}

bool MpsState::same_shape(const MpsState& other) const {
    return n_sites_ == other.n_sites_ && phys_dim_ == other.phys_dim_ &&
           bond_dims_ == other.bond_dims_;
}

bool MpsState::same_data(const MpsState& other) const {
    if (!same_shape(other)) return false;
    for (int n = 0; n < n_sites_; ++n)
        for (int s = 0; s < phys_dim_; ++s)
            if (tensor(n, s) != other.tensor(n, s)) return false;
    return true;
}

MpsState product_state(int n_sites, int phys_dim,
                       const std::vector<ComplexVector>& local_kets) {
    if (static_cast<int>(local_kets.size()) != n_sites)
        throw InvalidInput("product_state: need one local ket per site");
    std::vector<std::vector<ComplexMatrix>> tensors;
    tensors.reserve(static_cast<size_t>(n_sites));
    for (const auto& ket : local_kets) {
        if (ket.size() != phys_dim)
            throw InvalidInput("product_state: local ket has wrong dimension");
        if (std::abs(ket.norm() - 1.0) > 1e-12)
            throw InvalidInput("product_state: local ket is not normalized");
        std::vector<ComplexMatrix> site;
        for (int s = 0; s < phys_dim; ++s)
            site.push_back(ComplexMatrix::Constant(1, 1, ket(s)));
        tensors.push_back(std::move(site));
    }
    return MpsState(n_sites, phys_dim, std::move(tensors));
}

MpsState uniform_product_state(int n_sites, int phys_dim, const ComplexVector& ket) {
    return product_state(n_sites, phys_dim,
                         std::vector<ComplexVector>(static_cast<size_t>(n_sites), ket));
}

std::vector<int> rank_profile(int n_sites, int phys_dim, int max_bond_dim) {
    if (max_bond_dim < 1) throw InvalidInput("rank_profile: max_bond_dim >= 1 required");
    std::vector<int> dims(static_cast<size_t>(n_sites) + 1, 1);
    for (int b = 1; b < n_sites; ++b) {
        long from_left = 1, from_right = 1;
        for (int k = 0; k < std::min(b, 63); ++k) {
            from_left = std::min<long>(from_left * phys_dim, max_bond_dim);
        }
        for (int k = 0; k < std::min(n_sites - b, 63); ++k) {
            from_right = std::min<long>(from_right * phys_dim, max_bond_dim);
        }
        dims[static_cast<size_t>(b)] =
            static_cast<int>(std::min({from_left, from_right, static_cast<long>(max_bond_dim)}));
    }
    return dims;
}

MpsState random_state(int n_sites, int phys_dim, int max_bond_dim, std::uint64_t seed) {
    const std::vector<int> dims = rank_profile(n_sites, phys_dim, max_bond_dim);
    RngStream rng(seed);
    std::vector<std::vector<ComplexMatrix>> tensors;
    tensors.reserve(static_cast<size_t>(n_sites));
    // Entries drawn site-major, then s-index, row-major; one Gaussian pair
    // per complex entry.
    for (int n = 0; n < n_sites; ++n) {
        std::vector<ComplexMatrix> site;
        for (int s = 0; s < phys_dim; ++s) {
            ComplexMatrix m(dims[static_cast<size_t>(n)], dims[static_cast<size_t>(n) + 1]);
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                for (Eigen::Index j = 0; j < m.cols(); ++j) {
                    const auto [re, im] = rng.gaussian_pair();
                    m(i, j) = Complex(re, im);
                }
            site.push_back(std::move(m));
        }
        tensors.push_back(std::move(site));
    }
    return canonicalize_right(MpsState(n_sites, phys_dim, std::move(tensors)));
}

double norm(const MpsState& state) {
    const Complex n2 = contract_with_insertions(state, {});
    return std::sqrt(std::max(0.0, n2.real()));
}

MpsState normalize(const MpsState& state) {
    const double nrm = norm(state);
    if (!std::isfinite(nrm) || nrm < kZeroNormFloor)
        throw DegenerateState("normalize: state has zero norm");
    MpsState out = state;
    for (int s = 0; s < out.phys_dim(); ++s)
        out.mutable_tensors()[0][static_cast<size_t>(s)] /= nrm;
    return out;
}

MpsState canonicalize_right(const MpsState& state) {
    const int n_sites = state.n_sites();
    const int d = state.phys_dim();
    auto tensors = state.tensors();
    // Sweep right to left: factor the row-stacked site matrix M = L Q with
    // Q row-orthonormal, keep Q, absorb L into the left neighbor.
    for (int n = n_sites - 1; n >= 1; --n) {
        const int dl = static_cast<int>(tensors[static_cast<size_t>(n)][0].rows());
        const int dr = static_cast<int>(tensors[static_cast<size_t>(n)][0].cols());
        ComplexMatrix m(dl, static_cast<Eigen::Index>(d) * dr);
        for (int s = 0; s < d; ++s)
            m.block(0, static_cast<Eigen::Index>(s) * dr, dl, dr) =
                tensors[static_cast<size_t>(n)][static_cast<size_t>(s)];
        if (!m.allFinite())
            throw DegenerateState("canonicalize_right: non-finite tensor entries");
        QrResult qr = qr_positive(m.adjoint());
        const ComplexMatrix q = qr.q.adjoint();  // dl x d*dr, orthonormal rows
        const ComplexMatrix l = qr.r.adjoint();  // dl x dl
        for (int s = 0; s < d; ++s)
            tensors[static_cast<size_t>(n)][static_cast<size_t>(s)] =
                q.block(0, static_cast<Eigen::Index>(s) * dr, dl, dr);
        for (int s = 0; s < d; ++s)
            tensors[static_cast<size_t>(n) - 1][static_cast<size_t>(s)] *= l;
    }
    // Site 0 carries the remaining norm.
    double nrm2 = 0.0;
    for (int s = 0; s < d; ++s) nrm2 += tensors[0][static_cast<size_t>(s)].squaredNorm();
    const double nrm = std::sqrt(nrm2);
    if (!std::isfinite(nrm) || nrm < kZeroNormFloor)
        throw DegenerateState("canonicalize_right: state has zero norm");
    for (int s = 0; s < d; ++s) tensors[0][static_cast<size_t>(s)] /= nrm;
    return MpsState(n_sites, d, std::move(tensors));
}

MpsState truncate_to_bond_dims(const MpsState& state, const std::vector<int>& target) {
    const int n_sites = state.n_sites();
    const int d = state.phys_dim();
    if (target.size() != static_cast<size_t>(n_sites) + 1)
        throw InvalidInput("truncate_to_bond_dims: target profile has wrong length");
    if (target.front() != 1 || target.back() != 1)
        throw InvalidInput("truncate_to_bond_dims: boundary bonds must be 1");
    if (right_canonical_defect(state) > 1e-6)
        throw InvalidInput("truncate_to_bond_dims: state must be right-canonical");

    std::vector<std::vector<ComplexMatrix>> out(static_cast<size_t>(n_sites));
    ComplexMatrix carry = ComplexMatrix::Identity(1, 1);
    for (int n = 0; n < n_sites - 1; ++n) {
        const Eigen::Index rows = carry.rows();
        const Eigen::Index cols = state.tensor(n, 0).cols();
        ComplexMatrix m(static_cast<Eigen::Index>(d) * rows, cols);
        for (int s = 0; s < d; ++s)
            m.block(static_cast<Eigen::Index>(s) * rows, 0, rows, cols) =
                carry * state.tensor(n, s);
        const SvdResult dec = svd(m);
        const Eigen::Index keep =
            std::min<Eigen::Index>(target[static_cast<size_t>(n) + 1], dec.values.size());
        if (keep < target[static_cast<size_t>(n) + 1])
            throw InvalidInput("truncate_to_bond_dims: target bond exceeds available rank");
        for (int s = 0; s < d; ++s)
            out[static_cast<size_t>(n)].push_back(
                dec.u.block(static_cast<Eigen::Index>(s) * rows, 0, rows, keep));
        carry = dec.values.head(keep).asDiagonal() *
                ComplexMatrix(dec.v.leftCols(keep).adjoint());
    }
    for (int s = 0; s < d; ++s)
        out[static_cast<size_t>(n_sites) - 1].push_back(carry *
                                                        state.tensor(n_sites - 1, s));
    return MpsState(n_sites, d, std::move(out));
}

double right_canonical_defect(const MpsState& state) {
    double worst = 0.0;
    for (int n = 0; n < state.n_sites(); ++n) {
        const auto& site = state.site_tensors(n);
        ComplexMatrix g = ComplexMatrix::Zero(site[0].rows(), site[0].rows());
        for (const auto& a : site) g += a * a.adjoint();
        g -= ComplexMatrix::Identity(g.rows(), g.cols());
        worst = std::max(worst, g.cwiseAbs().maxCoeff());
    }
    return worst;
}

Complex expect_local(const MpsState& state, const SiteOperator& op) {
    check_site_range(state, op.site, "expect_local");
    if (op.matrix.rows() != state.phys_dim() || op.matrix.cols() != state.phys_dim())
        throw InvalidInput("expect_local: operator dimension != phys_dim");
    const Complex num = contract_with_insertions(state, {{op.site - 1, op.matrix}});
    const Complex den = contract_with_insertions(state, {});
    return num / den;
}

Complex expect_two_point(const MpsState& state, const SiteOperator& op_a,
                         const SiteOperator& op_b) {
    check_site_range(state, op_a.site, "expect_two_point");
    check_site_range(state, op_b.site, "expect_two_point");
    std::vector<std::pair<int, ComplexMatrix>> ins;
    if (op_a.site == op_b.site) {
        ins.push_back({op_a.site - 1, op_a.matrix * op_b.matrix});
    } else {
        ins.push_back({op_a.site - 1, op_a.matrix});
        ins.push_back({op_b.site - 1, op_b.matrix});
    }
    const Complex num = contract_with_insertions(state, ins);
    const Complex den = contract_with_insertions(state, {});
    return num / den;
}

std::vector<Complex> expect_profile(const MpsState& state, const ComplexMatrix& op) {
    const int n_sites = state.n_sites();
    // Left plain environments before each site, right environments after.
    std::vector<ComplexMatrix> left(static_cast<size_t>(n_sites) + 1);
    left[0] = ComplexMatrix::Identity(1, 1);
    for (int n = 0; n < n_sites; ++n)
        left[static_cast<size_t>(n) + 1] =
            advance_plain(left[static_cast<size_t>(n)], state.site_tensors(n),
                          state.site_tensors(n));
    std::vector<ComplexMatrix> right(static_cast<size_t>(n_sites) + 1);
    right[static_cast<size_t>(n_sites)] = ComplexMatrix::Identity(1, 1);
    for (int n = n_sites - 1; n >= 0; --n) {
        const auto& site = state.site_tensors(n);
        ComplexMatrix r = ComplexMatrix::Zero(site[0].rows(), site[0].rows());
        for (const auto& a : site)
            r += a * right[static_cast<size_t>(n) + 1] * a.adjoint();
        right[static_cast<size_t>(n)] = std::move(r);
    }
    const Complex den = left[static_cast<size_t>(n_sites)](0, 0);
    std::vector<Complex> out(static_cast<size_t>(n_sites));
    for (int n = 0; n < n_sites; ++n) {
        const ComplexMatrix e = advance_op(left[static_cast<size_t>(n)],
                                           state.site_tensors(n), state.site_tensors(n), op);
        out[static_cast<size_t>(n)] =
            (e * right[static_cast<size_t>(n) + 1]).trace() / den;
    }
    return out;
}

double expect_nn_hamiltonian(const MpsState& state, const LindbladModel& model) {
    if (model.n_sites != state.n_sites())
        throw InvalidInput("expect_nn_hamiltonian: model/state size mismatch");
    const int d = state.phys_dim();
    Complex total = 0.0;
    const Complex den = contract_with_insertions(state, {});
    for (int b = 0; b + 1 < state.n_sites(); ++b) {
        const ComplexMatrix& h = model.nn_terms[static_cast<size_t>(b)];
        ComplexMatrix env = ComplexMatrix::Identity(1, 1);
        for (int n = 0; n < b; ++n)
            env = advance_plain(env, state.site_tensors(n), state.site_tensors(n));
        // Two-site insertion: resolve the left site into d^2 partial envs.
        std::vector<ComplexMatrix> partial(static_cast<size_t>(d) * d);
        for (int s = 0; s < d; ++s)
            for (int sp = 0; sp < d; ++sp)
                partial[static_cast<size_t>(s) * d + sp] =
                    state.tensor(b, s).adjoint() * env * state.tensor(b, sp);
        ComplexMatrix env2 = ComplexMatrix::Zero(state.bond_dim(b + 2), state.bond_dim(b + 2));
        for (int s = 0; s < d; ++s)
            for (int u = 0; u < d; ++u)
                for (int sp = 0; sp < d; ++sp)
                    for (int up = 0; up < d; ++up) {
                        const Complex c = h(s * d + u, sp * d + up);
                        if (c != Complex(0, 0))
                            env2 += c * state.tensor(b + 1, u).adjoint() *
                                    partial[static_cast<size_t>(s) * d + sp] *
                                    state.tensor(b + 1, up);
                    }
        for (int n = b + 2; n < state.n_sites(); ++n)
            env2 = advance_plain(env2, state.site_tensors(n), state.site_tensors(n));
        total += env2(0, 0);
    }
    return (total / den).real();
}

ComplexVector to_dense(const MpsState& state, std::int64_t dense_cap) {
    const int d = state.phys_dim();
    std::int64_t dim = 1;
    for (int n = 0; n < state.n_sites(); ++n) {
        dim *= d;
        if (dim > dense_cap)
            throw CapExceeded("to_dense: d^n exceeds dense cap of " +
                              std::to_string(dense_cap) + " amplitudes");
    }
    ComplexMatrix acc = ComplexMatrix::Identity(1, 1);
    for (int n = 0; n < state.n_sites(); ++n) {
        ComplexMatrix next(acc.rows() * d, state.bond_dim(n + 1));
        for (Eigen::Index i = 0; i < acc.rows(); ++i)
            for (int s = 0; s < d; ++s)
                next.row(i * d + s) = acc.row(i) * state.tensor(n, s);
        acc = std::move(next);
    }
    return ComplexVector(acc.col(0));
}

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw CheckpointFormatError("state file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& in) {
    const std::uint64_t bits = get_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void save_state(const MpsState& state, std::ostream& out) {
    put_u64(out, static_cast<std::uint64_t>(state.n_sites()));
    put_u64(out, static_cast<std::uint64_t>(state.phys_dim()));
    for (int b = 0; b <= state.n_sites(); ++b)
        put_u64(out, static_cast<std::uint64_t>(state.bond_dim(b)));
    for (int n = 0; n < state.n_sites(); ++n)
        for (int s = 0; s < state.phys_dim(); ++s) {
            const ComplexMatrix& m = state.tensor(n, s);
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                for (Eigen::Index j = 0; j < m.cols(); ++j) {
                    put_f64(out, m(i, j).real());
                    put_f64(out, m(i, j).imag());
                }
        }
}

MpsState load_state(std::istream& in) {
    const std::uint64_t n_sites = get_u64(in);
    const std::uint64_t d = get_u64(in);
    if (n_sites < 1 || n_sites > 1'000'000 || d < 2 || d > 4096)
        throw CheckpointFormatError("state file header is implausible");
    std::vector<std::uint64_t> dims(n_sites + 1);
    for (auto& v : dims) {
        v = get_u64(in);
        if (v < 1 || v > (1u << 20)) throw CheckpointFormatError("bad bond dimension");
    }
    std::vector<std::vector<ComplexMatrix>> tensors;
    for (std::uint64_t n = 0; n < n_sites; ++n) {
        std::vector<ComplexMatrix> site;
        for (std::uint64_t s = 0; s < d; ++s) {
            ComplexMatrix m(dims[n], dims[n + 1]);
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                for (Eigen::Index j = 0; j < m.cols(); ++j) {
                    const double re = get_f64(in);
                    const double im = get_f64(in);
                    m(i, j) = Complex(re, im);
                }
            site.push_back(std::move(m));
        }
        tensors.push_back(std::move(site));
    }
    return MpsState(static_cast<int>(n_sites), static_cast<int>(d), std::move(tensors));
}

void save_state_file(const MpsState& state, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointFormatError("cannot open '" + path + "' for writing");
    save_state(state, out);
}

MpsState load_state_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointFormatError("cannot open '" + path + "'");
    return load_state(in);
}

}  // namespace mctdvp
