#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "kssh/model.hpp"
#include "kssh/types.hpp"

namespace kssh {

enum class LanczosStop {
    full_dimension,     // basis spans the whole space
    cap_reached,        // caller-imposed dimension cap
    invariant_subspace, // residuals vanished: Krylov space exhausted early
    serious_breakdown   // |omega| below tol with non-negligible residuals
};

/// Bi-orthonormal Krylov basis of a non-Hermitian matrix.  Coefficient
/// vectors are 1-aligned with the recursion: a(j) is the j-th diagonal
/// entry, b(j) the super-diagonal and c(j) the sub-diagonal coupling
/// vectors j-1 and j, so b(0) = c(0) = 0 by convention.
struct KrylovBasis {
    Vector a, b, c;
    Matrix right_basis; // columns |r_j>
    Matrix left_basis;  // columns |l_j>
    int dim = 0;
    LanczosStop stop = LanczosStop::full_dimension;
    double final_omega = 0.0;

    /// Dense tridiagonal T with T(j,j)=a(j), T(j-1,j)=b(j), T(j,j-1)=c(j).
    Matrix tridiagonal() const;
};

/// Operator-space analogue.  Basis operators are stored vectorized
/// (row-major, one column per Krylov operator).  The generator has a
/// nonzero diagonal matrix element for gamma > 0; it is not part of the
/// two-term recursion but is recorded in `diag` so the tridiagonal
/// reconstruction can be checked exactly.
struct OperatorKrylovBasis {
    Vector b_up, b_down; // 1-aligned like KrylovBasis::b, c
    Vector diag;
    Matrix right_ops, left_ops; // (op_dim^2) x dim, vectorized columns
    int op_dim = 0;
    int dim = 0;
    double ip_scale = 1.0; // <O1|O2> = ip_scale * Tr(O1^dag O2)
    LanczosStop stop = LanczosStop::full_dimension;
    double final_omega = 0.0;

    Matrix right_op(int j) const;
    Matrix left_op(int j) const;
    Matrix tridiagonal() const;
};

using ApplyFn = std::function<Vector(const Vector&)>;

/// Two-sided Lanczos with full re-biorthogonalization each iteration.
/// apply_right/apply_left act with the generator and its adjoint; the
/// inner product is ip_scale * x^dag y and the seed must be normalized
/// under it.  Stops when |omega_j| < tol, the space is spanned, or
/// max_dim (0 = no cap) is hit.
KrylovBasis bilanczos_core(const ApplyFn& apply_right, const ApplyFn& apply_left,
                           const Vector& seed, double ip_scale, double tol,
                           int max_dim, int space_dim);

KrylovBasis state_bilanczos(const Matrix& h, const Vector& psi0, double tol = 1e-10,
                            int max_dim = 0);
KrylovBasis state_bilanczos(const Hamiltonian& h, const Vector& psi0, double tol = 1e-10,
                            int max_dim = 0);

/// Krylov chain of the Liouvillian L O = H^dag O - O H seeded with op0,
/// normalized under <O1|O2> = ip_scale * Tr(O1^dag O2).  ip_scale <= 0
/// selects the default 1/sqrt(D), D the Hilbert-space dimension.  The
/// left chain is driven by the adjoint generator L^dag O = H O - O H^dag.
OperatorKrylovBasis operator_bilanczos(const Hamiltonian& h, const Matrix& op0,
                                       double tol = 1e-10, double ip_scale = 0.0,
                                       int max_dim = 0);

/// Normalize an operator under the scaled trace inner product.
Matrix normalize_operator(const Matrix& op, double ip_scale);

/// max_{i,j} |<l_i|r_j> - delta_ij|
double biorthogonality_report(const KrylovBasis& basis);
double biorthogonality_report(const OperatorKrylovBasis& basis);

/// Content hash (FNV-1a over the raw bytes of h, psi0 and tol) used as
/// the cache key for persisted bases.
std::uint64_t basis_cache_key(const Matrix& h, const Vector& psi0, double tol);

void save_basis(const KrylovBasis& basis, const std::string& path);
KrylovBasis load_basis(const std::string& path);

} // namespace kssh
