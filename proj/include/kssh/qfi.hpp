#pragma once

#include <utility>

#include "kssh/bilanczos.hpp"
#include "kssh/evolution.hpp"
#include "kssh/observables.hpp"
#include "kssh/types.hpp"

namespace kssh {

enum class QfiPicture { state, operator_full, operator_diagonal };

struct QfiSeries {
    RealVector times;
    RealVector values;
    QfiPicture picture = QfiPicture::state;
};

/// Per-sample diagonal coefficients f_n (rows: samples, cols: Krylov index).
struct FnProfile {
    RealVector times;
    RealMatrix f;
    double max_imag = 0.0; // largest imaginary residue dropped when recording f_n
};

/// F_Q(t) = 4 (<O^2> - <O>^2) in the normalized no-click state. op must be
/// Hermitian.
QfiSeries qfi_state(const Hamiltonian& h, const Vector& psi0, const Matrix& op,
                    const TimeGrid& grid);

/// Operator-picture QFI from the Liouvillian Krylov chain of op.  The
/// Heisenberg operator O(t) = e^{iH^dag t} O e^{-iHt} is evolved densely and
/// projected onto the bi-orthogonal operator basis (i^m phase convention);
/// expectation values of basis operators are taken in psi0.  The functional
/// is the symmetrized variance 4[(<O^dag O + O O^dag>/2)/N^2 - <O^dag><O>/N^4]
/// with N = ||e^{-iHt} psi0||, which reduces to the state picture at gamma=0.
struct OperatorQfi {
    QfiSeries full;
    QfiSeries diagonal;
    FnProfile fn;
    /// max_n |Im(phi_R_n^* phi_L_n)| over all samples; the products are real
    /// for this model, which validates the projection phase convention.
    double max_pair_imag = 0.0;
};

OperatorQfi qfi_operator_suite(const Hamiltonian& h, const Vector& psi0, const Matrix& op,
                               const TimeGrid& grid, double tol = 1e-10, int max_dim = 0);

QfiSeries qfi_operator(const Hamiltonian& h, const Vector& psi0, const Matrix& op,
                       const TimeGrid& grid, double tol = 1e-10);

std::pair<QfiSeries, FnProfile> qfi_diagonal(const Hamiltonian& h, const Vector& psi0,
                                             const Matrix& op, const TimeGrid& grid,
                                             double tol = 1e-10);

/// Same quadrature contract as observables::time_average.
double averaged_qfi(const QfiSeries& series, double t_ref);

} // namespace kssh
