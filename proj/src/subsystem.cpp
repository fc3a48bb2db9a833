#include "kssh/subsystem.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace kssh {

namespace {

using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

} // namespace

ReducedDensity reduce(const Matrix& rho, int subsystem_cells) {
    const int k = static_cast<int>(rho.rows());
    const int ell_k = 2 * subsystem_cells;
    if (subsystem_cells < 1 || ell_k > k) {
        throw std::invalid_argument("reduce: need 1 <= 2*cells <= Krylov dimension");
    }
    ReducedDensity out;
    out.block = rho.topLeftCorner(ell_k, ell_k);
    out.subsystem_dim = ell_k;
    out.vacuum_weight = 1.0 - out.block.trace().real();
    return out;
}

PurifiedState purify(const ReducedDensity& rho_a, double eigen_cutoff) {
    const int m = rho_a.subsystem_dim;
    const Matrix sym = 0.5 * (rho_a.block + rho_a.block.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("purify: eigensolver failed");
    }

    std::vector<int> kept; // descending eigenvalue order
    for (int i = m - 1; i >= 0; --i) {
        if (solver.eigenvalues()(i) > eigen_cutoff) kept.push_back(i);
    }
    if (kept.empty()) throw std::invalid_argument("purify: block has no weight");

    double sum_sq = 0.0;
    for (int i : kept) sum_sq += solver.eigenvalues()(i) * solver.eigenvalues()(i);
    const double scale = 1.0 / std::sqrt(sum_sq);

    PurifiedState out;
    out.vector = Vector::Zero(static_cast<Eigen::Index>(m) * m);
    out.schmidt.resize(static_cast<int>(kept.size()));
    int slot = 0;
    for (int i : kept) {
        const Vector v = solver.eigenvectors().col(i);
        const double weight = solver.eigenvalues()(i) * scale;
        out.schmidt(slot++) = weight;
        // component form of sum_i lambda_i |lambda_i> (x) |lambda_i>: the
        // vectorized operator, so the second factor carries the conjugate
        Eigen::Map<RowMat> chi(out.vector.data(), m, m);
        chi.noalias() += weight * (v * v.adjoint());
    }
    return out;
}

KrylovBasis doubled_basis(const KrylovBasis& basis, int ell_k, double tol, int max_dim) {
    if (ell_k < 1 || ell_k > basis.dim) {
        throw std::invalid_argument("doubled_basis: ell_k out of range");
    }
    const Matrix t_block = basis.tridiagonal().topLeftCorner(ell_k, ell_k);
    const Matrix t_block_adj = t_block.adjoint();

    auto apply_right = [&](const Vector& x) -> Vector {
        Eigen::Map<const RowMat> xm(x.data(), ell_k, ell_k);
        RowMat y = t_block * xm - xm * t_block_adj;
        return Eigen::Map<const Vector>(y.data(), y.size());
    };
    auto apply_left = [&](const Vector& x) -> Vector {
        Eigen::Map<const RowMat> xm(x.data(), ell_k, ell_k);
        RowMat y = t_block_adj * xm - xm * t_block;
        return Eigen::Map<const Vector>(y.data(), y.size());
    };

    Vector seed = Vector::Zero(static_cast<Eigen::Index>(ell_k) * ell_k);
    seed(0) = 1.0;
    return bilanczos_core(apply_right, apply_left, seed, 1.0, tol, max_dim, ell_k * ell_k);
}

int default_doubled_cap(int ell_k) {
    const int full = ell_k * ell_k;
    if (full <= 400) return 0; // no cap
    return std::min(full, std::max(400, 4 * ell_k));
}

SubsystemDynamics subsystem_dynamics(const KrylovBasis& basis, const TimeGrid& grid,
                                     int subsystem_cells, int doubled_cap) {
    grid.validate();
    const int ell_k = 2 * subsystem_cells;
    if (subsystem_cells < 1 || ell_k > basis.dim) {
        throw std::invalid_argument("subsystem_dynamics: need 1 <= 2*cells <= Krylov dimension");
    }
    if (doubled_cap < 0) doubled_cap = default_doubled_cap(ell_k);
    const KrylovBasis doubled = doubled_basis(basis, ell_k, 1e-10, doubled_cap);

    const auto states = krylov_wavefunctions(basis, grid);
    const int samples = grid.samples();

    SubsystemDynamics out;
    out.ell_k = ell_k;
    out.doubled_dim = doubled.dim;
    out.doubled_stop = doubled.stop;
    out.kcop.kind = ObservableKind::kcop;
    out.kcop.times.resize(samples);
    out.kcop.values.resize(samples);
    out.kipr_purified.kind = ObservableKind::kipr_purified;
    out.kipr_purified.times.resize(samples);
    out.kipr_purified.values.resize(samples);

    for (int i = 0; i < samples; ++i) {
        const Matrix rho = krylov_density_matrix(states[i]);
        const PurifiedState pure = purify(reduce(rho, subsystem_cells));

        const Vector coeff_r = doubled.left_basis.adjoint() * pure.vector;
        const Vector coeff_l = doubled.right_basis.adjoint() * pure.vector;
        const double leak =
            (pure.vector - doubled.right_basis * coeff_r).norm() / pure.vector.norm();
        out.max_expansion_leakage = std::max(out.max_expansion_leakage, leak);

        const RealVector pair = (coeff_r.conjugate().array() * coeff_l.array()).abs().matrix();
        const double pair_sum = pair.sum();
        if (!(pair_sum > 0.0)) {
            throw std::runtime_error("subsystem_dynamics: vanishing pair normalization");
        }
        double kcop = 0.0;
        for (int n = 0; n < pair.size(); ++n) kcop += n * pair(n);
        kcop /= pair_sum;

        const int tail = std::max(1, doubled.dim / 10);
        out.max_tail_weight =
            std::max(out.max_tail_weight, pair.tail(tail).sum() / pair_sum);

        const Vector u = coeff_r.normalized();
        const double kipr_p = u.array().abs().pow(4).sum();

        out.kcop.times(i) = grid.time(i);
        out.kcop.values(i) = kcop;
        out.kipr_purified.times(i) = grid.time(i);
        out.kipr_purified.values(i) = kipr_p;
    }
    return out;
}

ObservableSeries kcop_series(const KrylovBasis& basis, const TimeGrid& grid,
                             int subsystem_cells, int doubled_cap) {
    return subsystem_dynamics(basis, grid, subsystem_cells, doubled_cap).kcop;
}

ObservableSeries purified_kipr_series(const KrylovBasis& basis, const TimeGrid& grid,
                                      int subsystem_cells, int doubled_cap) {
    return subsystem_dynamics(basis, grid, subsystem_cells, doubled_cap).kipr_purified;
}

} // namespace kssh
