#pragma once

#include "kssh/bilanczos.hpp"
#include "kssh/evolution.hpp"
#include "kssh/observables.hpp"
#include "kssh/types.hpp"

namespace kssh {

/// Top-left Krylov block of a density matrix plus the weight that left the
/// block with the traced-out Krylov directions (the vacuum sector of the
/// single-excitation partial trace).
struct ReducedDensity {
    Matrix block;
    double vacuum_weight = 0.0;
    int subsystem_dim = 0;
};

/// Channel-state purification: Schmidt weights lambda_i / sqrt(sum lambda^2)
/// on the doubled space, eigenvalues below the cutoff dropped.
struct PurifiedState {
    Vector vector;      // (subsystem_dim)^2, row-major pairing |i> x |j>
    RealVector schmidt; // descending, squares sum to 1
};

/// Keep the first ell_K = 2 * subsystem_cells Krylov directions.
/// Requires 1 <= 2 * subsystem_cells <= K.
ReducedDensity reduce(const Matrix& rho, int subsystem_cells);

PurifiedState purify(const ReducedDensity& rho_a, double eigen_cutoff = 1e-14);

/// Bi-Lanczos chain of the doubled-space generator T_A (x) 1 - 1 (x) conj(T_A)
/// (the vectorization of X -> T_A X - X T_A^dag, T_A the leading ell_k block
/// of the tridiagonal), seeded with the t = 0 purified state e_1 (x) e_1.
KrylovBasis doubled_basis(const KrylovBasis& basis, int ell_k, double tol = 1e-10,
                          int max_dim = 0);

/// Dimension cap policy for the doubled chain: full space while it is small,
/// otherwise max(400, 4 * ell_k).  kcop weights sit well below the cap on the
/// parameter ranges of interest; expansion leakage is reported so a too-tight
/// cap is visible.
int default_doubled_cap(int ell_k);

struct SubsystemDynamics {
    ObservableSeries kcop;
    ObservableSeries kipr_purified;
    /// Worst ||chi - V_R chi_r|| / ||chi||.  The chain spans only the Krylov
    /// orbit of the doubled generator, which the purified state leaves for
    /// t > 0, so this is O(1) in general; it is recorded to make the span
    /// of the expansion visible, not to vanish.
    double max_expansion_leakage = 0.0;
    /// Worst occupation of the last tenth of the chain.  Large values on a
    /// cap_reached chain mean the cap clipped the distribution.
    double max_tail_weight = 0.0;
    int ell_k = 0;
    int doubled_dim = 0;
    LanczosStop doubled_stop = LanczosStop::full_dimension;
};

/// Per sample: density matrix from the Krylov amplitudes, reduce, purify,
/// expand in the doubled bi-orthogonal basis, pair-normalize as in the full
/// system.  doubled_cap < 0 selects default_doubled_cap.
SubsystemDynamics subsystem_dynamics(const KrylovBasis& basis, const TimeGrid& grid,
                                     int subsystem_cells, int doubled_cap = -1);

ObservableSeries kcop_series(const KrylovBasis& basis, const TimeGrid& grid,
                             int subsystem_cells, int doubled_cap = -1);
ObservableSeries purified_kipr_series(const KrylovBasis& basis, const TimeGrid& grid,
                                      int subsystem_cells, int doubled_cap = -1);

} // namespace kssh
