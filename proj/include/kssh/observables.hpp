#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kssh/evolution.hpp"
#include "kssh/types.hpp"

namespace kssh {

enum class ObservableKind {
    complexity,
    entropy,
    entropic_complexity,
    kipr_right,
    kipr_left,
    kcop,
    kipr_purified,
    qfi
};

std::string observable_name(ObservableKind kind);

struct ObservableSeries {
    RealVector times;
    RealVector values;
    ObservableKind kind = ObservableKind::complexity;
};

enum class Side { left, right };

/// C = sum_n n P_n, indexing the first Krylov vector as n = 0.
double spread_complexity(const KrylovState& state);

/// S = -sum_n P_n ln P_n with 0 ln 0 := 0.
double spread_entropy(const KrylovState& state);

/// C_S = e^S.
double entropic_complexity(const KrylovState& state);

/// sum_j |u_j|^4 over the unit-2-norm amplitude vector of one side.  The
/// amplitudes are the Krylov expansion coefficients of the evolved state;
/// at t = 0 the state occupies a single Krylov vector and the value is 1.
double kipr(const KrylovState& state, Side side);

ObservableSeries build_series(const std::vector<KrylovState>& states, ObservableKind kind);

/// Trapezoidal mean of the series over [t_ref, t_max]; the left endpoint is
/// linearly interpolated when t_ref falls between samples.
double time_average(const ObservableSeries& series, double t_ref);

/// Smallest sample time t* such that every later sample stays within
/// +-band * |late mean| of the late mean (mean over the final quarter of the
/// window).  none when that only happens inside the final quarter itself.
std::optional<double> saturation_time(const ObservableSeries& series, double band = 0.05);

/// Interior local maxima whose prominence exceeds prominence_frac of the
/// series range.
int prominent_maxima_count(const ObservableSeries& series, double prominence_frac = 0.05);

struct FitResult {
    double exponent = 0.0;
    double prefactor = 0.0;
    double r_squared = 0.0;
};

/// Least-squares fit of ln(value) against ln(size); exponent is the slope.
FitResult power_law_fit(const RealVector& sizes, const RealVector& values);

double late_window_mean(const ObservableSeries& series, double window_frac = 0.25);
double late_window_rel_std(const ObservableSeries& series, double window_frac = 0.25);

} // namespace kssh
