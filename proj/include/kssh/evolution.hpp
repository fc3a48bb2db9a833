#pragma once

#include <vector>

#include "kssh/bilanczos.hpp"
#include "kssh/model.hpp"
#include "kssh/types.hpp"

namespace kssh {

/// Uniform sampling t_start, t_start + dt, ..., t_max.  Evolution is exact
/// per sample (no step chaining), so a nonzero t_start just skips the early
/// window.
struct TimeGrid {
    double t_max = 50.0;
    double dt = 0.1;
    double t_start = 0.0;

    int samples() const;
    double time(int i) const { return t_start + i * dt; }
    void validate() const;
};

/// Applies e^{-iMt} for a fixed dense M, any t.  Uses the eigendecomposition
/// of M; when the eigenvector matrix is ill-conditioned (defective M, e.g.
/// at an exceptional point) it falls back to a scaling-and-squaring matrix
/// exponential per call.
class Propagator {
public:
    explicit Propagator(const Matrix& m, double cond_threshold = 1e8);

    Vector apply(const Vector& x, double t) const;
    /// e^{-iM^dag t} x using the same factorization.
    Vector apply_adjoint_generator(const Vector& x, double t) const;
    /// Dense e^{-iMt}.
    Matrix matrix(double t) const;

    /// e^{-iMt} x scaled by e^{-log_scale}: the dominant imaginary part of
    /// the spectrum is pulled out so long-time amplitudes stay representable.
    Vector apply_rescaled(const Vector& x, double t, double& log_scale) const;
    Vector apply_adjoint_rescaled(const Vector& x, double t, double& log_scale) const;

    bool used_expm() const { return use_expm_; }
    double condition() const { return cond_; }

private:
    Matrix m_;
    Matrix vecs_, vecs_inv_;
    Vector evals_;
    double cond_ = 0.0;
    bool use_expm_ = false;
};

/// e^{-iHt} psi0 / ||e^{-iHt} psi0||, the normalized no-click state.
Vector propagate_exact(const Hamiltonian& h, const Vector& psi0, double t);

/// Right/left Krylov amplitudes at one sample, scaled by the dynamic
/// normalization so that sum_j |conj(psi_r_j) psi_l_j| = 1.
struct KrylovState {
    double t = 0.0;
    Vector psi_r; // e^{-iTt} e_1 / norm_factor
    Vector psi_l; // e^{-iT^dag t} e_1 / norm_factor
    double norm_factor = 1.0; // sqrt(sum_j |conj(psi_r_j) psi_l_j|) before scaling
    double trace_norm = 1.0;  // ||e^{-iTt} e_1||^2, the density-matrix normalizer

    RealVector probabilities() const;
};

/// Per-sample propagation of e_1 from t = 0 with T and T^dag (no step
/// chaining), dynamic normalization applied symmetrically to the pair.
std::vector<KrylovState> krylov_wavefunctions(const KrylovBasis& basis, const TimeGrid& grid);

/// rho(t) = v v^dag with v the unit-norm right amplitude vector.
Matrix krylov_density_matrix(const KrylovState& state);

/// ||(1 - V_r V_l^dag) x|| / ||x||: weight of a site-basis state outside the
/// span of an early-terminated basis.
double subspace_leakage(const KrylovBasis& basis, const Vector& site_state);

/// Largest leakage of the exact evolved state over the grid; meaningful when
/// basis.dim < space dimension.
double max_leakage(const Hamiltonian& h, const Vector& psi0, const KrylovBasis& basis,
                   const TimeGrid& grid);

} // namespace kssh
