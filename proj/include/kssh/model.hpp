#pragma once

#include <optional>
#include <vector>

#include "kssh/types.hpp"

namespace kssh {

enum class Boundary { open, periodic };

/// Chain parameters: intra-cell hopping w, inter-cell hopping v,
/// measurement rate gamma >= 0, number of unit cells L.
struct ModelParams {
    double w = 1.5;
    double v = 0.5;
    double gamma = 0.0;
    int cells = 20;
    Boundary boundary = Boundary::open;

    /// Single-particle dimension (two sites per cell).
    int dim() const { return 2 * cells; }

    /// Throws std::invalid_argument on non-finite hoppings, gamma < 0 or cells < 1.
    void validate() const;
};

/// Dense single-particle Hamiltonian in the interleaved site ordering
/// A1,B1,A2,B2,...  A sites carry -i*gamma on the diagonal, B sites +i*gamma.
struct Hamiltonian {
    Matrix matrix;
    ModelParams params;
};

struct SpectrumPoint {
    double k = 0.0;
    cplx eps_plus;
    cplx eps_minus;
};

enum class PhaseLabel { pt_symmetric, pt_critical, pt_broken };

enum class MeasurementKind { n_a, one_minus_n_b };

/// Result of the exceptional-momentum formula.  `k` is set only in the
/// regime where exceptional points sit on the Brillouin zone; past that
/// (all-imaginary gapped spectrum) `regime` flags the situation instead.
struct ExceptionalMomentum {
    enum class Regime { below_transition, on_band, beyond_band };
    std::optional<double> k;
    Regime regime = Regime::below_transition;
};

Hamiltonian build_hamiltonian(const ModelParams& params);

/// Storage index (0-based, interleaved A1,B1,A2,B2,...) of the p-th site
/// counted along the physical chain.  The couplings A_j-B_j (w) and
/// A_j-B_{j+1} (v) order the open chain as B1,A1,B2,A2,...,B_L,A_L, so odd
/// chain positions are B sites and even ones A sites.
int site_index_from_chain_position(int position, int cells);

/// Bloch matrix [[i*gamma, eta_k], [conj(eta_k), -i*gamma]] with eta_k = -w - v e^{-ik}.
Eigen::Matrix2cd bloch_matrix(const ModelParams& params, double k);

/// eps_{+-}(k) = +-sqrt(w^2 + v^2 - gamma^2 + 2 w v cos k), principal branch.
SpectrumPoint dispersion(const ModelParams& params, double k);

/// Phase from the sign of gamma - |w - v|; the critical window is
/// |gamma - |w - v|| <= 1e-12.
PhaseLabel classify_pt_phase(const ModelParams& params);

/// k_EP(gamma) = 2 acos(sqrt((gamma^2 - (w-v)^2) / (4 w v))).
ExceptionalMomentum exceptional_momentum(const ModelParams& params);

/// n_A -> projector on A sites.  one_minus_n_B -> identity minus the B-site
/// projector, which in the single-particle sector coincides with the A-site
/// projector; both kinds are kept so callers can name the operator they mean.
Matrix measurement_operator(const ModelParams& params, MeasurementKind kind);

/// Eigenvalues of the dense Hamiltonian sorted by (Re, Im).
std::vector<cplx> full_spectrum(const Hamiltonian& h);

} // namespace kssh
