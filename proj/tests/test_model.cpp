#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mctdvp/exact.hpp"
#include "mctdvp/model.hpp"
#include "mctdvp/rng.hpp"

using namespace mctdvp;

namespace {

// Random Hermitian positive unit-trace matrix.
ComplexMatrix random_density(int dim, RngStream& rng) {
    ComplexMatrix g(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            const auto [re, im] = rng.gaussian_pair();
            g(i, j) = Complex(re, im);
        }
    ComplexMatrix rho = g * g.adjoint();
    return rho / rho.trace();
}

}  // namespace

TEST_CASE("pauli conventions") {
    CHECK(pauli::sigma_z()(0, 0) == Complex(1, 0));
    CHECK(pauli::sigma_z()(1, 1) == Complex(-1, 0));
    // sigma_plus |down> = |up>
    ComplexVector down(2);
    down << 0, 1;
    CHECK((pauli::sigma_plus() * down - (ComplexVector(2) << 1, 0).finished()).norm() == 0.0);
    CHECK((pauli::sigma_plus() -
           0.5 * (pauli::sigma_x() + Complex(0, 1) * pauli::sigma_y()))
              .norm() <= 1e-15);
    CHECK_THROWS_AS(pauli::by_name("bogus"), InvalidInput);
}

TEST_CASE("build_kxz") {
    SUBCASE("n=2, lambda=0: single sxsx bond with eigenvalues +-1") {
        const LindbladModel m = build_kxz(2, 0.0);
        REQUIRE(m.nn_terms.size() == 1);
        CHECK((m.nn_terms[0] - kron(pauli::sigma_x(), pauli::sigma_x())).norm() <= 1e-15);
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m.nn_terms[0]);
        RealVector ev = es.eigenvalues();
        CHECK(ev(0) == doctest::Approx(-1.0));
        CHECK(ev(1) == doctest::Approx(-1.0));
        CHECK(ev(2) == doctest::Approx(1.0));
        CHECK(ev(3) == doctest::Approx(1.0));
    }
    SUBCASE("n=2, lambda=1: <upup|K|upup> = 1") {
        const LindbladModel m = build_kxz(2, 1.0);
        const ComplexMatrix k = dense_hamiltonian(m);
        CHECK(k(0, 0).real() == doctest::Approx(1.0));
    }
    SUBCASE("n=3, lambda=2: dense K matches the explicit 8x8 sum") {
        const LindbladModel m = build_kxz(3, 2.0);
        const ComplexMatrix id = ComplexMatrix::Identity(2, 2);
        const ComplexMatrix expected =
            kron(kron(pauli::sigma_x(), pauli::sigma_x()), id) +
            2.0 * kron(kron(pauli::sigma_z(), pauli::sigma_z()), id) +
            kron(id, kron(pauli::sigma_x(), pauli::sigma_x())) +
            2.0 * kron(id, kron(pauli::sigma_z(), pauli::sigma_z()));
        CHECK((dense_hamiltonian(m) - expected).norm() <= 1e-14);
    }
    SUBCASE("bond terms are Hermitian") {
        const LindbladModel m = build_kxz(4, 0.7);
        for (const auto& h : m.nn_terms)
            CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
    }
    CHECK_THROWS_AS(build_kxz(1, 1.0), InvalidInput);
}

TEST_CASE("build_xxz") {
    SUBCASE("matrix element of the hopping term") {
        const LindbladModel m = build_xxz(2, 1.0, 1.0);
        // <up down| K |down up> = 2 from 2 s+ s-.
        const ComplexMatrix k = dense_hamiltonian(m);
        CHECK(k(1, 2).real() == doctest::Approx(2.0));
        CHECK((k - k.adjoint()).norm() <= 1e-14);
    }
    SUBCASE("epsilon = 0 turns the Hamiltonian off") {
        const LindbladModel m = build_xxz(3, 0.0, 1.0);
        CHECK(dense_hamiltonian(m).norm() == 0.0);
    }
    SUBCASE("epsilon scales the bond term linearly") {
        const LindbladModel weak = build_xxz(2, 1e-3, 1.0);
        const LindbladModel ref = build_xxz(2, 1.0, 1.0);
        CHECK((weak.nn_terms[0] - 1e-3 * ref.nn_terms[0]).norm() <= 1e-16);
    }
}

TEST_CASE("dissipation presets") {
    SUBCASE("edge driving puts channels at sites 1 and n only") {
        const auto ops = dissipation_preset(DissipationKind::EdgeDriving, 16);
        REQUIRE(ops.size() == 2);
        CHECK(ops[0].site == 1);
        CHECK((ops[0].matrix - pauli::sigma_plus()).norm() == 0.0);
        CHECK(ops[1].site == 16);
        CHECK((ops[1].matrix - pauli::sigma_minus()).norm() == 0.0);
    }
    SUBCASE("bihomogeneous splits the chain in half") {
        const auto ops = dissipation_preset(DissipationKind::Bihomogeneous, 4);
        REQUIRE(ops.size() == 4);
        CHECK((ops[0].matrix - pauli::sigma_plus()).norm() == 0.0);
        CHECK((ops[1].matrix - pauli::sigma_plus()).norm() == 0.0);
        CHECK((ops[2].matrix - pauli::sigma_minus()).norm() == 0.0);
        CHECK((ops[3].matrix - pauli::sigma_minus()).norm() == 0.0);
        for (int i = 0; i < 4; ++i) CHECK(ops[static_cast<size_t>(i)].site == i + 1);
        CHECK_THROWS_AS(dissipation_preset(DissipationKind::Bihomogeneous, 5), InvalidInput);
    }
    SUBCASE("homogeneous matches the two-qubit setup") {
        const auto ops = dissipation_preset(DissipationKind::HomogeneousPlus, 2);
        REQUIRE(ops.size() == 2);
        for (const auto& op : ops) CHECK((op.matrix - pauli::sigma_plus()).norm() == 0.0);
    }
    CHECK(dissipation_kind_from_name("edge_driving") == DissipationKind::EdgeDriving);
    CHECK_THROWS_AS(dissipation_kind_from_name("nope"), InvalidInput);
}

TEST_CASE("Q-form consistency: commutator form equals Q rho + rho Q^dag + sum L rho L^dag") {
    RngStream rng(3);
    SUBCASE("2-site K_XZ with homogeneous dissipation") {
        LindbladModel m = build_kxz(2, 1.0);
        m.lindblad_ops = dissipation_preset(DissipationKind::HomogeneousPlus, 2);
        for (int trial = 0; trial < 5; ++trial) {
            DensityMatrix rho{random_density(4, rng)};
            CHECK((lindblad_rhs(rho, m) - lindblad_rhs_q_form(rho, m)).cwiseAbs().maxCoeff() <=
                  1e-12);
        }
    }
    SUBCASE("3-site XXZ with edge driving") {
        LindbladModel m = build_xxz(3, 0.7, 1.3);
        m.lindblad_ops = dissipation_preset(DissipationKind::EdgeDriving, 3);
        for (int trial = 0; trial < 5; ++trial) {
            DensityMatrix rho{random_density(8, rng)};
            CHECK((lindblad_rhs(rho, m) - lindblad_rhs_q_form(rho, m)).cwiseAbs().maxCoeff() <=
                  1e-12);
        }
    }
}
