#include "kssh/qfi.hpp"

#include <cmath>
#include <stdexcept>

namespace kssh {

namespace {

using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_hermitian(const Matrix& op, const char* where) {
    if ((op - op.adjoint()).cwiseAbs().maxCoeff() > 1e-12) {
        throw std::invalid_argument(std::string(where) + ": operator must be Hermitian");
    }
}

} // namespace

QfiSeries qfi_state(const Hamiltonian& h, const Vector& psi0, const Matrix& op,
                    const TimeGrid& grid) {
    grid.validate();
    require_hermitian(op, "qfi_state");
    if (std::abs(psi0.norm() - 1.0) > 1e-8) {
        throw std::invalid_argument("qfi_state: psi0 must be unit norm");
    }
    const Propagator prop(h.matrix);
    const Matrix op_sq = op * op;

    QfiSeries series;
    series.picture = QfiPicture::state;
    series.times.resize(grid.samples());
    series.values.resize(grid.samples());
    for (int i = 0; i < grid.samples(); ++i) {
        const Vector psi = prop.apply(psi0, grid.time(i)).normalized();
        const double first = (psi.adjoint() * op * psi)(0).real();
        const double second = (psi.adjoint() * op_sq * psi)(0).real();
        series.times(i) = grid.time(i);
        series.values(i) = 4.0 * (second - first * first);
    }
    return series;
}

OperatorQfi qfi_operator_suite(const Hamiltonian& h, const Vector& psi0, const Matrix& op,
                               const TimeGrid& grid, double tol, int max_dim) {
    grid.validate();
    if (std::abs(psi0.norm() - 1.0) > 1e-8) {
        throw std::invalid_argument("qfi_operator: psi0 must be unit norm");
    }
    const int n = static_cast<int>(h.matrix.rows());
    const double ip_scale = 1.0 / std::sqrt(static_cast<double>(n));
    const OperatorKrylovBasis basis =
        operator_bilanczos(h, normalize_operator(op, ip_scale), tol, ip_scale, max_dim);
    if (basis.stop == LanczosStop::serious_breakdown) {
        throw std::runtime_error("qfi_operator: operator basis hit a serious breakdown");
    }
    const int k = basis.dim;

    // psi0-expectation tables of the basis operators.
    Matrix x(n, k), y(n, k), u(n, k), w(n, k);
    for (int m = 0; m < k; ++m) {
        Eigen::Map<const RowMat> rm(basis.right_ops.col(m).data(), n, n);
        Eigen::Map<const RowMat> lm(basis.left_ops.col(m).data(), n, n);
        x.col(m) = rm * psi0;            // O_{r_m} psi0
        y.col(m) = lm * psi0;            // O_{l_m} psi0
        u.col(m) = rm.adjoint() * psi0;  // O_{r_m}^dag psi0
        w.col(m) = lm.adjoint() * psi0;  // O_{l_m}^dag psi0
    }
    const Matrix g1 = x.adjoint() * y; // <O_{r_m}^dag O_{l_n}>
    const Matrix g2 = u.adjoint() * w; // <O_{r_m} O_{l_n}^dag>
    const Vector s1 = x.adjoint() * psi0; // <O_{r_m}^dag>
    const Vector s2 = y.transpose() * psi0.conjugate(); // <O_{l_n}> = psi0^dag y_n

    const Propagator prop(h.matrix);
    const int samples = grid.samples();

    OperatorQfi out;
    out.full.picture = QfiPicture::operator_full;
    out.full.times.resize(samples);
    out.full.values.resize(samples);
    out.diagonal.picture = QfiPicture::operator_diagonal;
    out.diagonal.times.resize(samples);
    out.diagonal.values.resize(samples);
    out.fn.times.resize(samples);
    out.fn.f.resize(samples, k);

    for (int i = 0; i < samples; ++i) {
        const double t = grid.time(i);
        const Matrix evolve = prop.matrix(t);
        const double n2 = (evolve * psi0).squaredNorm();
        const double n4 = n2 * n2;

        RowMat op_t = evolve.adjoint() * op * evolve;
        const Eigen::Map<const Vector> op_t_vec(op_t.data(), op_t.size());
        // pl_m = i^m phi_R_m and pr_n = i^n phi_L_n; the i^m factors cancel
        // in every contraction below, so the raw projections are enough.
        const Vector pl = basis.ip_scale * (basis.left_ops.adjoint() * op_t_vec);
        const Vector pr = basis.ip_scale * (basis.right_ops.adjoint() * op_t_vec);

        const cplx sum1 = pl.dot(g1 * pr);               // <O(t)^dag O(t)>
        const cplx sum2 = pr.dot(g2.transpose() * pl);   // <O(t) O(t)^dag>
        const cplx mean_dag = pl.dot(s1);                // <O(t)^dag>
        const cplx mean = pr.cwiseProduct(s2).sum();     // <O(t)>

        const cplx full = 4.0 * (0.5 * (sum1 + sum2) / n2 - mean_dag * mean / n4);
        out.full.times(i) = t;
        out.full.values(i) = full.real();

        cplx diag_val = 0.0;
        for (int m = 0; m < k; ++m) {
            const cplx pair = std::conj(pl(m)) * pr(m); // = phi_R_m^* phi_L_m
            out.max_pair_imag = std::max(out.max_pair_imag, std::abs(pair.imag()));
            const cplx fn = 4.0 * (0.5 * (g1(m, m) + g2(m, m)) / n2 - s1(m) * s2(m) / n4);
            out.fn.f(i, m) = fn.real();
            out.fn.max_imag = std::max(out.fn.max_imag, std::abs(fn.imag()));
            diag_val += 0.5 * (pair * g1(m, m) + std::conj(pair) * g2(m, m)) * (4.0 / n2) -
                        pair * s1(m) * s2(m) * (4.0 / n4);
        }
        out.diagonal.times(i) = t;
        out.diagonal.values(i) = diag_val.real();
        out.fn.times(i) = t;
    }
    return out;
}

QfiSeries qfi_operator(const Hamiltonian& h, const Vector& psi0, const Matrix& op,
                       const TimeGrid& grid, double tol) {
    return qfi_operator_suite(h, psi0, op, grid, tol).full;
}

std::pair<QfiSeries, FnProfile> qfi_diagonal(const Hamiltonian& h, const Vector& psi0,
                                             const Matrix& op, const TimeGrid& grid,
                                             double tol) {
    OperatorQfi suite = qfi_operator_suite(h, psi0, op, grid, tol);
    return {std::move(suite.diagonal), std::move(suite.fn)};
}

double averaged_qfi(const QfiSeries& series, double t_ref) {
    ObservableSeries tmp;
    tmp.times = series.times;
    tmp.values = series.values;
    tmp.kind = ObservableKind::qfi;
    return time_average(tmp, t_ref);
}

} // namespace kssh
