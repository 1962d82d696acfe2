#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mctdvp/exact.hpp"
#include "mctdvp/tangent.hpp"

using namespace mctdvp;

namespace {

ComplexVector ket_up() { return (ComplexVector(2) << 1, 0).finished(); }

LindbladModel dissipative_kxz(int n, double lambda) {
    LindbladModel m = build_kxz(n, lambda);
    m.lindblad_ops = dissipation_preset(DissipationKind::HomogeneousPlus, n);
    return m;
}

TangentVector random_tangent(const WorkspacePtr& ws, std::uint64_t seed) {
    RngStream rng(seed);
    TangentVector tv = zero_tangent(ws);
    for (auto& block : tv.x)
        for (Eigen::Index i = 0; i < block.rows(); ++i)
            for (Eigen::Index j = 0; j < block.cols(); ++j) {
                const auto [re, im] = rng.gaussian_pair();
                block(i, j) = Complex(re, im);
            }
    for (Eigen::Index i = 0; i < tv.b_last.rows(); ++i) {
        const auto [re, im] = rng.gaussian_pair();
        tv.b_last(i, 0) = Complex(re, im);
    }
    return tv;
}

}  // namespace

TEST_CASE("workspace gauge structure") {
    const MpsState psi = random_state(4, 2, 4, 11);
    const WorkspacePtr ws = make_workspace(psi);
    const int d = psi.phys_dim();
    for (int n = 0; n < 4; ++n) {
        // Left orthonormality of a_l.
        ComplexMatrix gram =
            ComplexMatrix::Zero(psi.bond_dim(n + 1), psi.bond_dim(n + 1));
        for (int s = 0; s < d; ++s) gram += ws->a_l(n, s).adjoint() * ws->a_l(n, s);
        CHECK((gram - ComplexMatrix::Identity(gram.rows(), gram.cols())).norm() <= 1e-12);
        // Center relation c[n] A[n] = a_l[n] c[n+1].
        for (int s = 0; s < d; ++s)
            CHECK((ws->c(n) * psi.tensor(n, s) - ws->a_l(n, s) * ws->c(n + 1)).norm() <=
                  1e-12);
        // Null space is orthonormal and orthogonal to the site map.
        if (n < 3) {
            const ComplexMatrix& v = ws->v(n);
            CHECK(v.cols() == d * psi.bond_dim(n) - psi.bond_dim(n + 1));
            CHECK((v.adjoint() * v -
                   ComplexMatrix::Identity(v.cols(), v.cols())).norm() <= 1e-12);
            ComplexMatrix stacked(d * psi.bond_dim(n), psi.bond_dim(n + 1));
            for (int s = 0; s < d; ++s)
                stacked.block(s * psi.bond_dim(n), 0, psi.bond_dim(n), psi.bond_dim(n + 1)) =
                    ws->a_l(n, s);
            CHECK((v.adjoint() * stacked).norm() <= 1e-12);
        }
    }
    // The overall norm sits in c[n_sites].
    CHECK(std::abs(ws->c(4)(0, 0)) == doctest::Approx(1.0).epsilon(1e-12));
    SUBCASE("non-canonical input is a precondition violation") {
        MpsState scaled = psi;
        scaled.mutable_tensors()[2][0] *= 2.0;
        CHECK_THROWS_AS(make_workspace(scaled), InvalidInput);
    }
}

TEST_CASE("tangent metric is the identity") {
    const MpsState psi = random_state(4, 2, 4, 21);
    const WorkspacePtr ws = make_workspace(psi);
    for (int trial = 0; trial < 5; ++trial) {
        const TangentVector a = random_tangent(ws, 100 + static_cast<std::uint64_t>(trial));
        const TangentVector b = random_tangent(ws, 200 + static_cast<std::uint64_t>(trial));
        const ComplexVector da = tangent_to_dense(a);
        const ComplexVector db = tangent_to_dense(b);
        // <Phi(a)|Phi(b)> equals the Euclidean parameter inner product.
        Complex param_inner = (a.b_last.adjoint() * b.b_last)(0, 0);
        for (size_t n = 0; n < a.x.size(); ++n)
            param_inner += (a.x[n].adjoint() * b.x[n]).trace();
        CHECK(std::abs(da.dot(db) - param_inner) <= 1e-10 * (1.0 + std::abs(param_inner)));
        CHECK(da.norm() == doctest::Approx(a.param_norm()).epsilon(1e-10));
    }
}

TEST_CASE("compute_b_alpha is exact for on-site operators") {
    SUBCASE("identity operator gives the state itself") {
        const MpsState psi = random_state(3, 2, 2, 31);
        const TangentVector tv = compute_b_alpha(psi, {pauli::identity2(), 2});
        CHECK((tangent_to_dense(tv) - to_dense(psi)).norm() <= 1e-10);
    }
    SUBCASE("sigma_plus on |up> is the zero tangent vector") {
        const MpsState psi = product_state(1, 2, {ket_up()});
        const TangentVector tv = compute_b_alpha(psi, {pauli::sigma_plus(), 1});
        CHECK(tv.param_norm() <= 1e-14);
    }
    SUBCASE("sigma_x mid-chain matches the dense application") {
        const MpsState psi = random_state(3, 2, 2, 37);
        const TangentVector tv = compute_b_alpha(psi, {pauli::sigma_x(), 2});
        const ComplexVector expected =
            dense_site_operator(3, 2, {pauli::sigma_x(), 2}) * to_dense(psi);
        CHECK((tangent_to_dense(tv) - expected).norm() <= 1e-10);
    }
    SUBCASE("every preset channel, several sizes") {
        for (int n = 2; n <= 4; ++n) {
            const MpsState psi = random_state(n, 2, 4, 41 + static_cast<std::uint64_t>(n));
            const WorkspacePtr ws = make_workspace(psi);
            for (const auto& l : dissipation_preset(DissipationKind::Bihomogeneous,
                                                    n % 2 == 0 ? n : n + 1)) {
                if (l.site > n) continue;
                const TangentVector tv = compute_b_alpha(ws, l);
                const ComplexVector expected =
                    dense_site_operator(n, 2, l) * to_dense(psi);
                CHECK((tangent_to_dense(tv) - expected).norm() <= 1e-10);
            }
        }
    }
}

TEST_CASE("compute_b_q") {
    SUBCASE("no terms at all gives the zero tangent") {
        LindbladModel empty;
        empty.n_sites = 3;
        empty.phys_dim = 2;
        const MpsState psi = random_state(3, 2, 2, 51);
        const TangentVector tv = compute_b_q(psi, empty);
        CHECK(tv.param_norm() <= 1e-14);
    }
    SUBCASE("full-rank manifold represents Q|Psi> exactly") {
        // Bond dims (1,2,1) saturate the rank profile: the tangent space is
        // the full Hilbert space and the residual must vanish.
        const MpsState psi = random_state(2, 2, 2, 53);
        const LindbladModel m = dissipative_kxz(2, 1.0);
        const TangentVector tv = compute_b_q(psi, m);
        const ComplexVector target = dense_q_operator(m) * to_dense(psi);
        CHECK((tangent_to_dense(tv) - target).norm() <= 1e-8);
    }
    SUBCASE("full-rank reduction at n=4, bond dims (1,2,4,2,1)") {
        const MpsState psi = random_state(4, 2, 4, 59);
        CHECK(psi.bond_dims() == std::vector<int>{1, 2, 4, 2, 1});
        const LindbladModel m = dissipative_kxz(4, 1.0);
        const TangentVector tv = compute_b_q(psi, m);
        const ComplexVector target = dense_q_operator(m) * to_dense(psi);
        CHECK((tangent_to_dense(tv) - target).norm() <= 1e-8);
    }
    SUBCASE("rank-deficient manifold: projection beats 100 random competitors") {
        const MpsState psi = random_state(4, 2, 2, 61);
        const LindbladModel m = dissipative_kxz(4, 1.0);
        const WorkspacePtr ws = make_workspace(psi);
        const TangentVector b_q = compute_b_q(ws, m);
        const ComplexVector target = dense_q_operator(m) * to_dense(psi);
        const double opt_residual = (tangent_to_dense(b_q) - target).norm();
        CHECK(opt_residual > 1e-6);  // genuinely rank-deficient
        for (int trial = 0; trial < 100; ++trial) {
            TangentVector competitor = random_tangent(ws, 300 + static_cast<std::uint64_t>(trial));
            // Both raw random vectors and perturbations of the optimum.
            if (trial % 2 == 0) {
                competitor *= Complex(0.05, 0.0);
                competitor.axpy(Complex(1, 0), b_q);
            }
            const double residual = (tangent_to_dense(competitor) - target).norm();
            CHECK(opt_residual <= residual + 1e-12);
        }
    }
    SUBCASE("projection property: residual orthogonal to the tangent space") {
        const MpsState psi = random_state(4, 2, 2, 67);
        const LindbladModel m = dissipative_kxz(4, 1.0);
        const WorkspacePtr ws = make_workspace(psi);
        const TangentVector b_q = compute_b_q(ws, m);
        const ComplexVector residual =
            dense_q_operator(m) * to_dense(psi) - tangent_to_dense(b_q);
        for (int trial = 0; trial < 20; ++trial) {
            const TangentVector probe = random_tangent(ws, 500 + static_cast<std::uint64_t>(trial));
            const ComplexVector dv = tangent_to_dense(probe);
            CHECK(std::abs(dv.dot(residual)) <= 1e-8 * dv.norm() * (1.0 + residual.norm()));
        }
    }
    SUBCASE("agrees with the brute-force argmin") {
        for (std::uint64_t seed : {71u, 73u, 79u}) {
            const MpsState psi = random_state(4, 2, 2, seed);
            const LindbladModel m = dissipative_kxz(4, 1.0);
            const ComplexVector target = dense_q_operator(m) * to_dense(psi);
            const TangentVector tv = compute_b_q(psi, m);
            const double residual_mps = (tangent_to_dense(tv) - target).norm();
            const auto brute = brute_force_tangent_argmin(psi, target);
            CHECK(residual_mps == doctest::Approx(brute.residual).epsilon(1e-4));
        }
    }
    SUBCASE("gauge consistency across recanonicalization") {
        const MpsState psi = random_state(3, 2, 2, 83);
        const LindbladModel m = dissipative_kxz(3, 1.0);
        const ComplexVector a = tangent_to_dense(compute_b_q(psi, m));
        const ComplexVector b =
            tangent_to_dense(compute_b_q(canonicalize_right(psi), m));
        CHECK((a - b).norm() <= 1e-8);
    }
}

TEST_CASE("apply_tangent") {
    const MpsState psi = random_state(3, 2, 2, 91);
    const WorkspacePtr ws = make_workspace(psi);
    const LindbladModel m = dissipative_kxz(3, 1.0);
    const TangentVector tv = compute_b_q(ws, m);
    SUBCASE("zero scale is the identity, bit for bit") {
        const MpsState same = apply_tangent(psi, tv, Complex(0, 0));
        CHECK(same.same_data(psi));
    }
    SUBCASE("first-order tangency: error scales as epsilon^2") {
        const ComplexVector psi0 = to_dense(psi);
        const ComplexVector phi = tangent_to_dense(tv);
        auto error_at = [&](double eps) {
            const MpsState moved = apply_tangent(psi, tv, Complex(eps, 0));
            return (to_dense(moved) - psi0 - eps * phi).norm();
        };
        const double e3 = error_at(1e-3);
        const double e4 = error_at(1e-4);
        CHECK(e3 / e4 > 50.0);
        CHECK(e3 / e4 < 200.0);
    }
    SUBCASE("anchor mismatch is rejected") {
        const MpsState other = random_state(3, 2, 2, 92);
        CHECK_THROWS_AS(apply_tangent(other, tv, Complex(1, 0)), InvalidInput);
    }
}

TEST_CASE("projection is linear in the operator (combined-step contract)") {
    const MpsState psi = random_state(3, 2, 2, 95);
    const WorkspacePtr ws = make_workspace(psi);
    const LindbladModel m = dissipative_kxz(3, 1.0);

    const TangentVector b_q = compute_b_q(ws, m);
    std::vector<TangentVector> b_alpha;
    for (const auto& l : m.lindblad_ops) b_alpha.push_back(compute_b_alpha(ws, l));

    // Combined operator: dt Q + sum_a c_a L_a, as assembled by the stepper.
    const double dt = 1e-3;
    std::vector<Complex> coeff = {Complex(0.3, 0.1), Complex(-0.2, 0.4), Complex(0.0, -0.7)};
    OperatorSum combined = OperatorSum::empty(3);
    for (size_t b = 0; b < m.nn_terms.size(); ++b)
        combined.bond_terms[b] = Complex(0, -dt) * m.nn_terms[b];
    for (size_t a = 0; a < m.lindblad_ops.size(); ++a) {
        const auto& l = m.lindblad_ops[a];
        auto& site = combined.site_terms[static_cast<size_t>(l.site - 1)];
        if (site.size() == 0) site = ComplexMatrix::Zero(2, 2);
        site += (-0.5 * dt) * (l.matrix.adjoint() * l.matrix);
        site += coeff[a] * l.matrix;
    }
    const TangentVector direct = project_operator_sum(ws, combined);

    TangentVector assembled = zero_tangent(ws);
    assembled.axpy(Complex(dt, 0), b_q);
    for (size_t a = 0; a < b_alpha.size(); ++a) assembled.axpy(coeff[a], b_alpha[a]);

    CHECK((tangent_to_dense(direct) - tangent_to_dense(assembled)).norm() <= 1e-12);
}
