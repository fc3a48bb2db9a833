#include "kssh/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace kssh {

namespace {
constexpr double kCriticalTol = 1e-12;
} // namespace

void ModelParams::validate() const {
    if (!std::isfinite(w) || !std::isfinite(v)) {
        throw std::invalid_argument("ModelParams: hoppings must be finite");
    }
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw std::invalid_argument("ModelParams: gamma must be finite and >= 0");
    }
    if (cells < 1) {
        throw std::invalid_argument("ModelParams: cells must be >= 1");
    }
}

Hamiltonian build_hamiltonian(const ModelParams& params) {
    params.validate();
    const int n = params.dim();
    Matrix h = Matrix::Zero(n, n);

    auto siteA = [](int cell) { return 2 * cell; };
    auto siteB = [](int cell) { return 2 * cell + 1; };

    for (int j = 0; j < params.cells; ++j) {
        h(siteA(j), siteA(j)) = -kI * params.gamma;
        h(siteB(j), siteB(j)) = kI * params.gamma;

        h(siteA(j), siteB(j)) = -params.w;
        h(siteB(j), siteA(j)) = -params.w;

        // Inter-cell bond A_j -- B_{j+1}; wraps under periodic boundary.
        if (j + 1 < params.cells) {
            h(siteA(j), siteB(j + 1)) = -params.v;
            h(siteB(j + 1), siteA(j)) = -params.v;
        } else if (params.boundary == Boundary::periodic && params.cells > 1) {
            h(siteA(j), siteB(0)) = -params.v;
            h(siteB(0), siteA(j)) = -params.v;
        }
    }
    return Hamiltonian{std::move(h), params};
}

int site_index_from_chain_position(int position, int cells) {
    if (position < 1 || position > 2 * cells) {
        throw std::invalid_argument("chain position " + std::to_string(position) +
                                    " outside [1," + std::to_string(2 * cells) + "]");
    }
    // odd position p -> B_{(p+1)/2} at storage 1-based p+1; even -> A_{p/2} at p-1
    return (position % 2 == 1) ? position : position - 2;
}

Eigen::Matrix2cd bloch_matrix(const ModelParams& params, double k) {
    const cplx eta = -params.w - params.v * std::exp(-kI * k);
    Eigen::Matrix2cd m;
    m << kI * params.gamma, eta, std::conj(eta), -kI * params.gamma;
    return m;
}

SpectrumPoint dispersion(const ModelParams& params, double k) {
    const cplx radicand = params.w * params.w + params.v * params.v -
                          params.gamma * params.gamma +
                          2.0 * params.w * params.v * std::cos(k);
    const cplx eps = std::sqrt(radicand);
    return SpectrumPoint{k, eps, -eps};
}

PhaseLabel classify_pt_phase(const ModelParams& params) {
    const double margin = params.gamma - std::abs(params.w - params.v);
    if (std::abs(margin) <= kCriticalTol) return PhaseLabel::pt_critical;
    return margin < 0.0 ? PhaseLabel::pt_symmetric : PhaseLabel::pt_broken;
}

ExceptionalMomentum exceptional_momentum(const ModelParams& params) {
    ExceptionalMomentum out;
    const double gap = std::abs(params.w - params.v);
    if (params.gamma < gap - kCriticalTol) {
        out.regime = ExceptionalMomentum::Regime::below_transition;
        return out;
    }
    const double num = params.gamma * params.gamma - gap * gap;
    const double den = 4.0 * params.w * params.v;
    double arg = num / den;
    if (arg > 1.0 + kCriticalTol) {
        out.regime = ExceptionalMomentum::Regime::beyond_band;
        return out;
    }
    arg = std::clamp(arg, 0.0, 1.0);
    out.k = 2.0 * std::acos(std::sqrt(arg));
    out.regime = ExceptionalMomentum::Regime::on_band;
    return out;
}

Matrix measurement_operator(const ModelParams& params, MeasurementKind kind) {
    const int n = params.dim();
    Matrix op = Matrix::Zero(n, n);
    switch (kind) {
    case MeasurementKind::n_a:
        for (int s = 0; s < n; s += 2) op(s, s) = 1.0;
        break;
    case MeasurementKind::one_minus_n_b:
        op.setIdentity();
        for (int s = 1; s < n; s += 2) op(s, s) = 0.0;
        break;
    }
    return op;
}

std::vector<cplx> full_spectrum(const Hamiltonian& h) {
    Eigen::ComplexEigenSolver<Matrix> solver(h.matrix, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("full_spectrum: eigensolver failed to converge");
    }
    std::vector<cplx> evals(solver.eigenvalues().data(),
                            solver.eigenvalues().data() + h.matrix.rows());
    std::sort(evals.begin(), evals.end(), [](const cplx& x, const cplx& y) {
        if (x.real() != y.real()) return x.real() < y.real();
        return x.imag() < y.imag();
    });
    return evals;
}

} // namespace kssh
