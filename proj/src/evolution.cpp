#include "kssh/evolution.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <unsupported/Eigen/MatrixFunctions>

namespace kssh {

int TimeGrid::samples() const {
    return static_cast<int>(std::round((t_max - t_start) / dt)) + 1;
}

void TimeGrid::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("TimeGrid: dt must be > 0");
    if (!(t_start >= 0.0)) throw std::invalid_argument("TimeGrid: t_start must be >= 0");
    if (!(t_max >= t_start + dt)) {
        throw std::invalid_argument("TimeGrid: t_max must be >= t_start + dt");
    }
}

Propagator::Propagator(const Matrix& m, double cond_threshold) : m_(m) {
    Eigen::ComplexEigenSolver<Matrix> solver(m);
    if (solver.info() != Eigen::Success) {
        use_expm_ = true;
        cond_ = std::numeric_limits<double>::infinity();
        return;
    }
    vecs_ = solver.eigenvectors();
    evals_ = solver.eigenvalues();
    Eigen::PartialPivLU<Matrix> lu(vecs_);
    vecs_inv_ = lu.inverse();
    cond_ = vecs_.cwiseAbs().colwise().sum().maxCoeff() *
            vecs_inv_.cwiseAbs().colwise().sum().maxCoeff();
    use_expm_ = !(cond_ < cond_threshold);
}

Vector Propagator::apply(const Vector& x, double t) const {
    if (use_expm_) {
        Matrix e = (-kI * t * m_).exp();
        return e * x;
    }
    Vector coeffs = vecs_inv_ * x;
    coeffs.array() *= (-kI * t * evals_.array()).exp();
    return vecs_ * coeffs;
}

Vector Propagator::apply_adjoint_generator(const Vector& x, double t) const {
    if (use_expm_) {
        Matrix e = (kI * t * m_).exp(); // e^{-iM^dag t} = (e^{iMt})^dag
        return e.adjoint() * x;
    }
    // M^dag = (V^{-1})^dag conj(Lambda) V^dag
    Vector coeffs = vecs_.adjoint() * x;
    coeffs.array() *= (-kI * t * evals_.array().conjugate()).exp();
    return vecs_inv_.adjoint() * coeffs;
}

Matrix Propagator::matrix(double t) const {
    if (use_expm_) return (-kI * t * m_).exp();
    return vecs_ * (-kI * t * evals_.array()).exp().matrix().asDiagonal() * vecs_inv_;
}

Vector Propagator::apply_rescaled(const Vector& x, double t, double& log_scale) const {
    if (use_expm_) {
        Vector y = apply(x, t);
        const double norm = y.norm();
        log_scale = std::log(norm);
        return y / norm;
    }
    const double mu = std::max(evals_.imag().maxCoeff(), 0.0);
    log_scale = mu * t;
    Vector coeffs = vecs_inv_ * x;
    coeffs.array() *= (-kI * t * (evals_.array() - kI * mu)).exp();
    return vecs_ * coeffs;
}

Vector Propagator::apply_adjoint_rescaled(const Vector& x, double t, double& log_scale) const {
    if (use_expm_) {
        Vector y = apply_adjoint_generator(x, t);
        const double norm = y.norm();
        log_scale = std::log(norm);
        return y / norm;
    }
    const double mu = std::max(-evals_.imag().minCoeff(), 0.0);
    log_scale = mu * t;
    Vector coeffs = vecs_.adjoint() * x;
    coeffs.array() *= (-kI * t * (evals_.array().conjugate() - kI * mu)).exp();
    return vecs_inv_.adjoint() * coeffs;
}

Vector propagate_exact(const Hamiltonian& h, const Vector& psi0, double t) {
    if (std::abs(psi0.norm() - 1.0) > 1e-8) {
        throw std::invalid_argument("propagate_exact: psi0 must be unit norm");
    }
    const Propagator prop(h.matrix);
    return prop.apply(psi0, t).normalized();
}

RealVector KrylovState::probabilities() const {
    return (psi_r.conjugate().array() * psi_l.array()).abs().matrix();
}

std::vector<KrylovState> krylov_wavefunctions(const KrylovBasis& basis, const TimeGrid& grid) {
    grid.validate();
    const Matrix t_mat = basis.tridiagonal();
    const Propagator prop(t_mat);
    Vector e1 = Vector::Zero(basis.dim);
    e1(0) = 1.0;

    std::vector<KrylovState> states;
    states.reserve(grid.samples());
    for (int i = 0; i < grid.samples(); ++i) {
        const double t = grid.time(i);
        // The rescaled propagation keeps amplitudes representable at large t;
        // the pair (psi_r, psi_l) then carries an unobservable relative gauge
        // e^{+-(ls_r - ls_l)/2}.  All pair products, and both vectors after
        // per-side normalization, are gauge-free.
        double ls_r = 0.0, ls_l = 0.0;
        Vector right = prop.apply_rescaled(e1, t, ls_r);
        Vector left = prop.apply_adjoint_rescaled(e1, t, ls_l);
        const double pair_sum = (right.conjugate().array() * left.array()).abs().sum();
        if (!(pair_sum > 0.0) || !std::isfinite(pair_sum)) {
            throw std::runtime_error("krylov_wavefunctions: vanishing pair normalization");
        }
        const double norm = std::sqrt(pair_sum);
        KrylovState state;
        state.t = t;
        state.trace_norm = right.squaredNorm() * std::exp(2.0 * ls_r);
        state.psi_r = right / norm;
        state.psi_l = left / norm;
        state.norm_factor = norm * std::exp(0.5 * (ls_r + ls_l));
        states.push_back(std::move(state));
    }
    return states;
}

Matrix krylov_density_matrix(const KrylovState& state) {
    const Vector v = state.psi_r.normalized();
    return v * v.adjoint();
}

double subspace_leakage(const KrylovBasis& basis, const Vector& site_state) {
    const Vector coeffs = basis.left_basis.adjoint() * site_state;
    const Vector inside = basis.right_basis * coeffs;
    return (site_state - inside).norm() / site_state.norm();
}

double max_leakage(const Hamiltonian& h, const Vector& psi0, const KrylovBasis& basis,
                   const TimeGrid& grid) {
    const Propagator prop(h.matrix);
    double worst = 0.0;
    for (int i = 0; i < grid.samples(); ++i) {
        const Vector psi = prop.apply(psi0, grid.time(i)).normalized();
        worst = std::max(worst, subspace_leakage(basis, psi));
    }
    return worst;
}

} // namespace kssh
