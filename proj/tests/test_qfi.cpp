#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "kssh/bilanczos.hpp"
#include "kssh/model.hpp"
#include "kssh/qfi.hpp"

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

// Brute-force operator-picture QFI: the Heisenberg operator is evolved with
// the vectorized Liouvillian (kron representation + matrix exponential), the
// wavefunctions are trace projections with explicit i^m phases, and the
// double sum is assembled literally term by term.
double dense_operator_qfi(const Hamiltonian& h, const Vector& psi0, const Matrix& op,
                          const OperatorKrylovBasis& basis, double t) {
    using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const int n = static_cast<int>(h.matrix.rows());
    const Matrix eye = Matrix::Identity(n, n);
    const Matrix liouville = Eigen::kroneckerProduct(h.matrix.adjoint(), eye).eval() -
                             Eigen::kroneckerProduct(eye, h.matrix.transpose()).eval();
    RowMat op_row = op;
    const Vector op_vec = Eigen::Map<const Vector>(op_row.data(), op_row.size());
    const Vector evolved = (kI * t * liouville).exp() * op_vec;
    const Matrix op_t = Eigen::Map<const RowMat>(evolved.data(), n, n);

    const Vector psi_t = (-kI * t * h.matrix).exp() * psi0;
    const double n2 = psi_t.squaredNorm();
    const int k = basis.dim;

    auto ipow = [](int m) { return std::pow(kI, static_cast<double>(m)); };
    std::vector<cplx> phi_r(k), phi_l(k);
    for (int m = 0; m < k; ++m) {
        const Matrix rm = basis.right_op(m);
        const Matrix lm = basis.left_op(m);
        phi_r[m] = basis.ip_scale * (lm.adjoint() * op_t).trace() / ipow(m);
        phi_l[m] = basis.ip_scale * (rm.adjoint() * op_t).trace() / ipow(m);
    }
    cplx sym = 0.0, mean_dag = 0.0, mean = 0.0;
    for (int m = 0; m < k; ++m) {
        const Matrix rm = basis.right_op(m);
        mean_dag += std::conj(ipow(m) * phi_r[m]) * (psi0.adjoint() * rm.adjoint() * psi0)(0);
        mean += ipow(m) * phi_l[m] * (psi0.adjoint() * basis.left_op(m) * psi0)(0);
        for (int nn = 0; nn < k; ++nn) {
            const Matrix ln = basis.left_op(nn);
            const cplx g1 = (psi0.adjoint() * rm.adjoint() * ln * psi0)(0);
            const cplx g2 = (psi0.adjoint() * rm * ln.adjoint() * psi0)(0);
            const cplx phase = ipow(m + nn);
            sym += 0.5 * phase *
                   (std::pow(-1.0, m) * std::conj(phi_r[m]) * phi_l[nn] * g1 +
                    std::pow(-1.0, nn) * phi_r[m] * std::conj(phi_l[nn]) * g2);
        }
    }
    const cplx value = 4.0 * (sym / n2 - mean_dag * mean / (n2 * n2));
    return value.real();
}

} // namespace

TEST_CASE("state picture at t = 0") {
    const ModelParams p = params(0.7, 3);
    const Hamiltonian h = build_hamiltonian(p);
    const Matrix na = measurement_operator(p, MeasurementKind::n_a);

    // eigenstate of the operator: zero variance at t = 0
    const QfiSeries from_a = qfi_state(h, localized(6, 1), na, TimeGrid{1.0, 1.0});
    CHECK(from_a.values(0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

    // equal superposition of eigenvalue-1 and eigenvalue-0 sites: F = 1
    Vector pair = Vector::Zero(6);
    pair(0) = 1.0 / std::sqrt(2.0);
    pair(1) = 1.0 / std::sqrt(2.0);
    const QfiSeries from_pair = qfi_state(h, pair, na, TimeGrid{1.0, 1.0});
    CHECK(from_pair.values(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("state picture rejects non-Hermitian operators") {
    const ModelParams p = params(0.7, 2);
    const Hamiltonian h = build_hamiltonian(p);
    Matrix op = Matrix::Zero(4, 4);
    op(0, 1) = 1.0;
    CHECK_THROWS_AS(qfi_state(h, localized(4, 1), op, TimeGrid{1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("state picture is non-negative and matches a Krylov-expanded evaluation") {
    const ModelParams p = params(1.2, 4);
    const Hamiltonian h = build_hamiltonian(p);
    const Vector psi0 = localized(8, 3);
    const Matrix na = measurement_operator(p, MeasurementKind::n_a);
    const TimeGrid grid{5.0, 0.5};
    const QfiSeries series = qfi_state(h, psi0, na, grid);

    const KrylovBasis basis = state_bilanczos(h, psi0);
    const Matrix op_lr = basis.left_basis.adjoint() * na * basis.right_basis;
    const Matrix op2_lr = basis.left_basis.adjoint() * na * na * basis.right_basis;
    const Propagator prop(h.matrix);
    for (int i = 0; i < grid.samples(); ++i) {
        CHECK(series.values(i) >= -1e-10);
        // expectation assembled from bi-orthogonal Krylov amplitudes of the
        // unit-norm evolved state
        const Vector psi_t = prop.apply(psi0, grid.time(i)).normalized();
        const Vector right = basis.left_basis.adjoint() * psi_t; // Psi^r of psi_t
        const Vector left = basis.right_basis.adjoint() * psi_t; // Psi^l of psi_t
        const double first = (left.adjoint() * op_lr * right)(0).real();
        const double second = (left.adjoint() * op2_lr * right)(0).real();
        const double fq = 4.0 * (second - first * first);
        CHECK(series.values(i) == doctest::Approx(fq).epsilon(1e-8).scale(1.0));
    }
}

TEST_CASE("unitary limit: operator picture equals the state picture") {
    const ModelParams p = params(0.0, 4);
    const Hamiltonian h = build_hamiltonian(p);
    const Vector psi0 = localized(8, 3);
    const Matrix na = measurement_operator(p, MeasurementKind::n_a);
    const TimeGrid grid{8.0, 0.4};

    const QfiSeries state = qfi_state(h, psi0, na, grid);
    const OperatorQfi op = qfi_operator_suite(h, psi0, na, grid);
    for (int i = 0; i < grid.samples(); ++i) {
        CHECK(op.full.values(i) == doctest::Approx(state.values(i)).epsilon(1e-8).scale(1.0));
    }
}

TEST_CASE("operator picture matches the dense super-operator oracle") {
    const ModelParams p = params(1.2, 2);
    const Hamiltonian h = build_hamiltonian(p);
    const Vector psi0 = localized(4, 2);
    const Matrix na = measurement_operator(p, MeasurementKind::n_a);
    const TimeGrid grid{2.0, 0.25};
    const OperatorQfi suite = qfi_operator_suite(h, psi0, na, grid);

    const double scale = 1.0 / 2.0;
    const OperatorKrylovBasis basis = operator_bilanczos(h, normalize_operator(na, scale));
    for (int i = 0; i < grid.samples(); ++i) {
        const double oracle = dense_operator_qfi(h, psi0, na, basis, grid.time(i));
        CHECK(suite.full.values(i) == doctest::Approx(oracle).epsilon(1e-7).scale(1.0));
    }
}

TEST_CASE("operator wavefunction pair products are real") {
    const ModelParams p = params(1.2, 2);
    const Hamiltonian h = build_hamiltonian(p);
    const Vector psi0 = localized(4, 2);
    const Matrix na = measurement_operator(p, MeasurementKind::n_a);
    const OperatorQfi suite = qfi_operator_suite(h, psi0, na, TimeGrid{5.0, 0.5});
    CHECK(suite.max_pair_imag < 1e-8);

    // full (m, n) pair check: i^{m-n} conj(pl_m) pr_n must be real
    const double scale = 1.0 / 2.0;
    const OperatorKrylovBasis basis = operator_bilanczos(h, normalize_operator(na, scale));
    const Propagator prop(h.matrix);
    using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    for (double t : {0.5, 2.0, 5.0}) {
        const Matrix evolve = prop.matrix(t);
        RowMat op_t = evolve.adjoint() * na * evolve;
        const Eigen::Map<const Vector> op_t_vec(op_t.data(), op_t.size());
        const Vector pl = scale * (basis.left_ops.adjoint() * op_t_vec);
        const Vector pr = scale * (basis.right_ops.adjoint() * op_t_vec);
        for (int m = 0; m < basis.dim; ++m) {
            for (int n = 0; n < basis.dim; ++n) {
                const cplx prod = std::pow(kI, m - n) * std::conj(pl(m)) * pr(n);
                CHECK(std::abs(prod.imag()) < 1e-8);
            }
        }
    }
}

TEST_CASE("diagonal part: f_n profile smoke checks") {
    const ModelParams p = params(1.0, 4);
    const Hamiltonian h = build_hamiltonian(p);
    const auto [diag, fn] = qfi_diagonal(h, localized(8, 3),
                                         measurement_operator(p, MeasurementKind::n_a),
                                         TimeGrid{5.0, 0.5});
    CHECK(fn.f.rows() == diag.times.size());
    CHECK(fn.f.allFinite());
    CHECK(fn.max_imag < 1e-8);
    for (int i = 0; i < diag.values.size(); ++i) CHECK(std::isfinite(diag.values(i)));
}

TEST_CASE("averaged QFI") {
    QfiSeries constant;
    constant.times = RealVector::LinSpaced(11, 0.0, 10.0);
    constant.values = RealVector::Constant(11, 2.5);
    CHECK(averaged_qfi(constant, 4.0) == doctest::Approx(2.5).epsilon(1e-14));

    // zero-coupling chain: a site state is stationary and an n_A eigenstate
    ModelParams p = params(0.0, 2);
    p.w = 0.0;
    p.v = 0.0;
    const Hamiltonian h = build_hamiltonian(p);
    const QfiSeries series = qfi_state(h, localized(4, 1),
                                       measurement_operator(p, MeasurementKind::n_a),
                                       TimeGrid{10.0, 0.5});
    CHECK(averaged_qfi(series, 6.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}
