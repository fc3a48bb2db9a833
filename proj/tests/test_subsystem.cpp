#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unsupported/Eigen/KroneckerProduct>

#include "kssh/model.hpp"
#include "kssh/subsystem.hpp"

using namespace kssh;

namespace {

ModelParams params(double gamma, int cells, Boundary b = Boundary::open) {
    ModelParams p;
    p.w = 1.5;
    p.v = 0.5;
    p.gamma = gamma;
    p.cells = cells;
    p.boundary = b;
    return p;
}

Vector localized(int dim, int site) {
    Vector v = Vector::Zero(dim);
    v(site - 1) = 1.0;
    return v;
}

Matrix localized_rho(int k) {
    Matrix rho = Matrix::Zero(k, k);
    rho(0, 0) = 1.0;
    return rho;
}

} // namespace

TEST_CASE("reduce keeps the leading block and tracks the leaked weight") {
    const ReducedDensity triv = reduce(localized_rho(8), 2);
    CHECK(triv.subsystem_dim == 4);
    CHECK(triv.block(0, 0) == cplx(1.0, 0.0));
    CHECK(triv.vacuum_weight == doctest::Approx(0.0).scale(1.0));

    // pure uniform state over K = 4, keep half
    Vector psi = Vector::Constant(4, 0.5);
    const Matrix rho = psi * psi.adjoint();
    const ReducedDensity half = reduce(rho, 1);
    CHECK(half.subsystem_dim == 2);
    CHECK(half.block.trace().real() == doctest::Approx(0.5));
    CHECK(half.vacuum_weight == doctest::Approx(0.5));

    CHECK_THROWS_AS(reduce(rho, 0), std::invalid_argument);
    CHECK_THROWS_AS(reduce(rho, 3), std::invalid_argument);
}

TEST_CASE("block trace grows with the subsystem size") {
    const Hamiltonian h = build_hamiltonian(params(1.2, 6));
    const KrylovBasis basis = state_bilanczos(h, localized(12, 5));
    const auto states = krylov_wavefunctions(basis, TimeGrid{3.0, 3.0});
    const Matrix rho = krylov_density_matrix(states.back());
    double prev = 0.0;
    for (int ell = 1; 2 * ell <= basis.dim; ++ell) {
        const double trace = reduce(rho, ell).block.trace().real();
        CHECK(trace >= prev - 1e-12);
        prev = trace;
    }
}

TEST_CASE("purify: pure, maximally mixed, and rank-2 blocks") {
    ReducedDensity pure;
    pure.block = localized_rho(3);
    pure.subsystem_dim = 3;
    const PurifiedState ps = purify(pure);
    CHECK(std::abs(ps.vector(0) - cplx(1.0, 0.0)) < 1e-12);
    CHECK(ps.vector.tail(8).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(ps.schmidt.size() == 1);

    ReducedDensity mixed;
    mixed.block = 0.5 * Matrix::Identity(2, 2);
    mixed.subsystem_dim = 2;
    const PurifiedState ms = purify(mixed);
    // (|00> + |11>)/sqrt(2) in the doubled space
    CHECK(std::abs(ms.vector(0)) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(std::abs(ms.vector(3)) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(std::abs(ms.vector(1)) < 1e-12);
    CHECK(std::abs(ms.vector(2)) < 1e-12);

    ReducedDensity rank2;
    rank2.block = Matrix::Zero(2, 2);
    rank2.block(0, 0) = 0.8;
    rank2.block(1, 1) = 0.2;
    rank2.subsystem_dim = 2;
    const PurifiedState rs = purify(rank2);
    CHECK(rs.schmidt(0) == doctest::Approx(0.8 / std::sqrt(0.68)).epsilon(1e-10));
    CHECK(rs.schmidt(1) == doctest::Approx(0.2 / std::sqrt(0.68)).epsilon(1e-10));
    CHECK(rs.schmidt(0) == doctest::Approx(0.9701).epsilon(1e-4));
    CHECK(rs.schmidt(1) == doctest::Approx(0.2425).epsilon(1e-4));
    CHECK(rs.vector.norm() == doctest::Approx(1.0).epsilon(1e-12));

    ReducedDensity zero;
    zero.block = Matrix::Zero(2, 2);
    zero.subsystem_dim = 2;
    CHECK_THROWS_AS(purify(zero), std::invalid_argument);
}

TEST_CASE("purify of a rank-1 block is the normalized vectorized block") {
    // complex eigenvector: the second Schmidt factor must carry the conjugate
    Vector v(2);
    v << cplx(0.6, 0.3), cplx(-0.2, 0.7);
    v.normalize();
    ReducedDensity red;
    red.block = 0.37 * (v * v.adjoint());
    red.subsystem_dim = 2;
    const PurifiedState ps = purify(red);

    Vector expected(4);
    expected << red.block(0, 0), red.block(0, 1), red.block(1, 0), red.block(1, 1);
    expected /= expected.norm();
    // global phase is free; align via the largest component
    int pivot = 0;
    expected.cwiseAbs().maxCoeff(&pivot);
    const cplx phase = ps.vector(pivot) / expected(pivot);
    CHECK(std::abs(std::abs(phase) - 1.0) < 1e-12);
    CHECK((ps.vector - phase * expected).norm() < 1e-12);
}

TEST_CASE("purify is trace-faithful on reduced pipeline states") {
    const Hamiltonian h = build_hamiltonian(params(1.2, 6));
    const KrylovBasis basis = state_bilanczos(h, localized(12, 5));
    const auto states = krylov_wavefunctions(basis, TimeGrid{10.0, 10.0});
    const Matrix rho = krylov_density_matrix(states.back());
    const ReducedDensity red = reduce(rho, 3);

    Eigen::SelfAdjointEigenSolver<Matrix> es(red.block);
    std::vector<double> lambdas;
    double sum_sq = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        const double l = es.eigenvalues()(i);
        CHECK(l > -1e-12); // PSD
        if (l > 1e-14) {
            lambdas.push_back(l);
            sum_sq += l * l;
        }
    }
    std::sort(lambdas.rbegin(), lambdas.rend());
    const PurifiedState ps = purify(red);
    REQUIRE(static_cast<std::size_t>(ps.schmidt.size()) == lambdas.size());
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        CHECK(ps.schmidt(static_cast<int>(i)) ==
              doctest::Approx(lambdas[i] / std::sqrt(sum_sq)).epsilon(1e-12));
    }
    CHECK(std::abs(ps.schmidt.squaredNorm() - 1.0) < 1e-12);
}

TEST_CASE("doubled basis: trivial and Hermitian limits") {
    const Hamiltonian h0 = build_hamiltonian(params(0.0, 4));
    const KrylovBasis base0 = state_bilanczos(h0, localized(8, 3));
    const KrylovBasis d1 = doubled_basis(base0, 1);
    CHECK(d1.dim == 1);

    const KrylovBasis d0 = doubled_basis(base0, 4);
    CHECK((d0.b - d0.c).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(d0.a.imag().cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("doubled generator equals the vectorized block flow") {
    const Hamiltonian h = build_hamiltonian(params(1.3, 4));
    const KrylovBasis basis = state_bilanczos(h, localized(8, 3));
    const int ell_k = 2;
    const KrylovBasis doubled = doubled_basis(basis, ell_k);

    const Matrix t_block = basis.tridiagonal().topLeftCorner(ell_k, ell_k);
    const Matrix eye = Matrix::Identity(ell_k, ell_k);
    const Matrix gen = Eigen::kroneckerProduct(t_block, eye).eval() -
                       Eigen::kroneckerProduct(eye, t_block.conjugate()).eval();
    const Matrix projected = doubled.left_basis.adjoint() * gen * doubled.right_basis;
    CHECK((projected - doubled.tridiagonal()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(biorthogonality_report(doubled) < 1e-10);
}

TEST_CASE("kcop pipeline starts at zero and stays in range") {
    const Hamiltonian h = build_hamiltonian(params(1.4, 6));
    const KrylovBasis basis = state_bilanczos(h, localized(12, 5));
    const SubsystemDynamics dyn = subsystem_dynamics(basis, TimeGrid{10.0, 0.5}, 2);

    CHECK(dyn.ell_k == 4);
    CHECK(dyn.kcop.values(0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
    CHECK(dyn.kipr_purified.values(0) == doctest::Approx(1.0).epsilon(1e-10));
    for (int i = 0; i < dyn.kcop.values.size(); ++i) {
        CHECK(dyn.kcop.values(i) >= -1e-10);
        CHECK(dyn.kcop.values(i) <= dyn.ell_k * dyn.ell_k - 1 + 1e-10);
        CHECK(dyn.kipr_purified.values(i) <= 1.0 + 1e-10);
    }
    CHECK(std::isfinite(dyn.max_expansion_leakage));
    CHECK(dyn.max_tail_weight >= 0.0);
    CHECK(dyn.max_tail_weight <= 1.0 + 1e-12);
    // uncapped chain: termination is the natural orbit end, not the cap
    CHECK(dyn.doubled_stop != LanczosStop::cap_reached);
}

TEST_CASE("broken-phase reduced block stays Hermitian PSD") {
    const Hamiltonian h = build_hamiltonian(params(1.2, 20));
    Vector psi0 = Vector::Zero(40);
    psi0(site_index_from_chain_position(15, 20)) = 1.0;
    const KrylovBasis basis = state_bilanczos(h, psi0);
    const auto states = krylov_wavefunctions(basis, TimeGrid{10.0, 10.0});
    const ReducedDensity red = reduce(krylov_density_matrix(states.back()), 5);
    CHECK((red.block - red.block.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> es(red.block);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);
    CHECK(red.block.trace().real() + red.vacuum_weight == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gamma = 0 keeps the reduced block physical at all times") {
    const Hamiltonian h = build_hamiltonian(params(0.0, 5));
    const KrylovBasis basis = state_bilanczos(h, localized(10, 4));
    const auto states = krylov_wavefunctions(basis, TimeGrid{10.0, 1.0});
    for (const auto& s : states) {
        const ReducedDensity red = reduce(krylov_density_matrix(s), 2);
        CHECK(red.vacuum_weight >= -1e-12);
        CHECK(red.vacuum_weight <= 1.0 + 1e-12);
        Eigen::SelfAdjointEigenSolver<Matrix> es(red.block);
        CHECK(es.eigenvalues().minCoeff() > -1e-12);
    }
}

TEST_CASE("subsystem errors propagate") {
    const Hamiltonian h = build_hamiltonian(params(1.0, 4));
    const KrylovBasis basis = state_bilanczos(h, localized(8, 3));
    CHECK_THROWS_AS(subsystem_dynamics(basis, TimeGrid{5.0, 0.5}, 5), std::invalid_argument);
    CHECK_THROWS_AS(doubled_basis(basis, 0), std::invalid_argument);
}

TEST_CASE("default doubled cap policy") {
    CHECK(default_doubled_cap(10) == 0);               // 100 <= 400: uncapped
    CHECK(default_doubled_cap(40) == 400);             // 1600 -> 400
    CHECK(default_doubled_cap(200) == 800);            // 40000 -> 4*200
}
