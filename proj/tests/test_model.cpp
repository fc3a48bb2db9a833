#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "kssh/model.hpp"

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

double max_imag(const std::vector<cplx>& evals) {
    double m = 0.0;
    for (const auto& e : evals) m = std::max(m, std::abs(e.imag()));
    return m;
}

} // namespace

TEST_CASE("single-cell Hamiltonian matches the analytic matrix") {
    const Hamiltonian h = build_hamiltonian(params(0.5, 1));
    REQUIRE(h.matrix.rows() == 2);
    CHECK(h.matrix(0, 0) == cplx(0.0, -0.5));
    CHECK(h.matrix(0, 1) == cplx(-1.5, 0.0));
    CHECK(h.matrix(1, 0) == cplx(-1.5, 0.0));
    CHECK(h.matrix(1, 1) == cplx(0.0, 0.5));
}

TEST_CASE("gamma = 0 gives a Hermitian matrix") {
    for (Boundary b : {Boundary::open, Boundary::periodic}) {
        const Hamiltonian h = build_hamiltonian(params(0.0, 7, b));
        CHECK((h.matrix - h.matrix.adjoint()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("anti-Hermitian part is the staggered measurement term") {
    const double gamma = 0.8;
    const Hamiltonian h = build_hamiltonian(params(gamma, 5, Boundary::periodic));
    const Matrix anti = 0.5 * (h.matrix - h.matrix.adjoint());
    for (int i = 0; i < h.matrix.rows(); ++i) {
        for (int j = 0; j < h.matrix.cols(); ++j) {
            const cplx expected = (i == j) ? cplx(0.0, i % 2 == 0 ? -gamma : gamma) : cplx(0.0);
            CHECK(anti(i, j) == expected);
        }
    }
}

TEST_CASE("chain position mapping") {
    CHECK(site_index_from_chain_position(1, 4) == 1);  // B1
    CHECK(site_index_from_chain_position(2, 4) == 0);  // A1
    CHECK(site_index_from_chain_position(15, 20) == 15); // B8
    CHECK(site_index_from_chain_position(16, 20) == 14); // A8
    CHECK(site_index_from_chain_position(8, 4) == 6);  // A4: right end of the open chain
    CHECK_THROWS_AS(site_index_from_chain_position(0, 4), std::invalid_argument);
    CHECK_THROWS_AS(site_index_from_chain_position(9, 4), std::invalid_argument);
}

TEST_CASE("open-boundary spectrum is real in the PT-symmetric phase") {
    const Hamiltonian h = build_hamiltonian(params(0.5, 20));
    CHECK(max_imag(full_spectrum(h)) < 1e-10);
}

TEST_CASE("periodic chain has exactly 4L nonzero off-diagonal entries") {
    for (int cells : {3, 5, 8}) {
        const Hamiltonian h = build_hamiltonian(params(0.7, cells, Boundary::periodic));
        int nonzero = 0;
        for (int i = 0; i < h.matrix.rows(); ++i) {
            for (int j = 0; j < h.matrix.cols(); ++j) {
                if (i != j && std::abs(h.matrix(i, j)) > 0.0) ++nonzero;
            }
        }
        CHECK(nonzero == 4 * cells);
    }
}

TEST_CASE("parameter validation") {
    ModelParams p = params(0.5, 1);
    p.cells = 0;
    CHECK_THROWS_AS(build_hamiltonian(p), std::invalid_argument);
    p = params(-0.1, 1);
    CHECK_THROWS_AS(build_hamiltonian(p), std::invalid_argument);
    p = params(0.5, 1);
    p.w = std::nan("");
    CHECK_THROWS_AS(build_hamiltonian(p), std::invalid_argument);
}

TEST_CASE("dispersion values") {
    CHECK(dispersion(params(0.0, 1), 0.0).eps_plus.real() == doctest::Approx(2.0).epsilon(1e-12));
    // direct formula evaluation: sqrt(w^2 + v^2 - g^2 - 2 w v)
    const double expected = std::sqrt(1.5 * 1.5 + 0.25 - 0.25 - 1.5);
    CHECK(dispersion(params(0.5, 1), M_PI).eps_plus.real() ==
          doctest::Approx(expected).epsilon(1e-10));
    CHECK(expected == doctest::Approx(0.8660254).epsilon(1e-6));
    CHECK(std::abs(dispersion(params(1.0, 1), M_PI).eps_plus) < 1e-12);

    const SpectrumPoint sp = dispersion(params(2.4, 1), 0.3);
    CHECK(sp.eps_minus == -sp.eps_plus);
    CHECK(sp.eps_plus.imag() > 0.0); // principal branch of a negative radicand
}

TEST_CASE("dispersion agrees with the Bloch matrix eigenvalues") {
    const ModelParams p = params(1.3, 1);
    for (int i = 0; i < 100; ++i) {
        const double k = -M_PI + 2.0 * M_PI * i / 99.0;
        const Eigen::Matrix2cd hk = bloch_matrix(p, k);
        const cplx tr_half = 0.5 * (hk(0, 0) + hk(1, 1));
        const cplx det = hk(0, 0) * hk(1, 1) - hk(0, 1) * hk(1, 0);
        const cplx disc = std::sqrt(tr_half * tr_half - det);
        const SpectrumPoint sp = dispersion(p, k);
        const double err = std::min(std::abs(disc - sp.eps_plus), std::abs(disc - sp.eps_minus));
        CHECK(err < 1e-12);
    }
}

TEST_CASE("PT phase classification") {
    CHECK(classify_pt_phase(params(0.5, 1)) == PhaseLabel::pt_symmetric);
    CHECK(classify_pt_phase(params(1.0, 1)) == PhaseLabel::pt_critical);
    CHECK(classify_pt_phase(params(1.4, 1)) == PhaseLabel::pt_broken);
    CHECK(classify_pt_phase(params(1.0 + 1e-13, 1)) == PhaseLabel::pt_critical);
}

TEST_CASE("exceptional momentum") {
    const auto at_pi = exceptional_momentum(params(1.0, 1));
    REQUIRE(at_pi.k.has_value());
    CHECK(*at_pi.k == doctest::Approx(M_PI).epsilon(1e-15));

    const auto at_zero = exceptional_momentum(params(2.0, 1));
    REQUIRE(at_zero.k.has_value());
    CHECK(*at_zero.k == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));

    const auto mid = exceptional_momentum(params(1.5, 1));
    REQUIRE(mid.k.has_value());
    CHECK(*mid.k == doctest::Approx(1.737).epsilon(1e-3));

    const auto below = exceptional_momentum(params(0.5, 1));
    CHECK(!below.k.has_value());
    CHECK(below.regime == ExceptionalMomentum::Regime::below_transition);

    const auto beyond = exceptional_momentum(params(2.5, 1));
    CHECK(!beyond.k.has_value());
    CHECK(beyond.regime == ExceptionalMomentum::Regime::beyond_band);
}

TEST_CASE("measurement operators") {
    Matrix expected(2, 2);
    expected << 1.0, 0.0, 0.0, 0.0;
    CHECK(measurement_operator(params(0.5, 1), MeasurementKind::n_a) == expected);
    // I - P_B coincides with the A-site projector in the single-particle sector
    CHECK(measurement_operator(params(0.5, 1), MeasurementKind::one_minus_n_b) == expected);

    const Matrix na2 = measurement_operator(params(0.5, 2), MeasurementKind::n_a);
    Matrix expected2 = Matrix::Zero(4, 4);
    expected2(0, 0) = 1.0;
    expected2(2, 2) = 1.0;
    CHECK(na2 == expected2);
}

TEST_CASE("full spectrum") {
    const auto evals0 = full_spectrum(build_hamiltonian(params(0.0, 1)));
    CHECK(evals0[0].real() == doctest::Approx(-1.5).epsilon(1e-12));
    CHECK(evals0[1].real() == doctest::Approx(1.5).epsilon(1e-12));

    const auto evals1 = full_spectrum(build_hamiltonian(params(0.5, 1)));
    const double expected = std::sqrt(1.5 * 1.5 - 0.5 * 0.5);
    CHECK(std::abs(evals1[1] - cplx(expected, 0)) < 1e-10);
    CHECK(expected == doctest::Approx(1.4142).epsilon(1e-4));

    const auto broken = full_spectrum(build_hamiltonian(params(2.4, 20)));
    CHECK(max_imag(broken) > 0.0);
}

TEST_CASE("spectral chiral pairing: eigenvalues come in +-eps pairs") {
    for (double gamma : {0.0, 0.5, 1.4, 2.4}) {
        const auto evals = full_spectrum(build_hamiltonian(params(gamma, 6)));
        for (const auto& e : evals) {
            double best = 1e9;
            for (const auto& f : evals) best = std::min(best, std::abs(f + e));
            CHECK(best < 1e-8);
        }
    }
}

TEST_CASE("PT reality of the periodic numerical spectrum below the transition") {
    for (double gamma : {0.3, 0.9}) {
        const auto evals = full_spectrum(build_hamiltonian(params(gamma, 20, Boundary::periodic)));
        CHECK(max_imag(evals) < 1e-10);
    }
}
