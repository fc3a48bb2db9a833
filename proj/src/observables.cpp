#include "kssh/observables.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kssh {

namespace {

void check_range(double value, double lo, double hi, const char* what) {
    constexpr double slack = 1e-9;
    if (!(value >= lo - slack && value <= hi + slack)) {
        throw std::runtime_error(std::string(what) + " out of range");
    }
}

double kipr_of(const Vector& amplitudes) {
    const Vector u = amplitudes.normalized();
    return u.array().abs().pow(4).sum();
}

} // namespace

std::string observable_name(ObservableKind kind) {
    switch (kind) {
    case ObservableKind::complexity: return "complexity";
    case ObservableKind::entropy: return "entropy";
    case ObservableKind::entropic_complexity: return "entropic_complexity";
    case ObservableKind::kipr_right: return "kipr_r";
    case ObservableKind::kipr_left: return "kipr_l";
    case ObservableKind::kcop: return "kcop";
    case ObservableKind::kipr_purified: return "kipr_purified";
    case ObservableKind::qfi: return "qfi";
    }
    return "unknown";
}

double spread_complexity(const KrylovState& state) {
    const RealVector p = state.probabilities();
    double c = 0.0;
    for (int n = 0; n < p.size(); ++n) c += n * p(n);
    check_range(c, 0.0, static_cast<double>(p.size() - 1), "spread complexity");
    return c;
}

double spread_entropy(const KrylovState& state) {
    const RealVector p = state.probabilities();
    double s = 0.0;
    for (int n = 0; n < p.size(); ++n) {
        if (p(n) > 0.0) s -= p(n) * std::log(p(n));
    }
    check_range(s, 0.0, std::log(static_cast<double>(p.size())), "spread entropy");
    return s;
}

double entropic_complexity(const KrylovState& state) {
    return std::exp(spread_entropy(state));
}

double kipr(const KrylovState& state, Side side) {
    const double value = kipr_of(side == Side::right ? state.psi_r : state.psi_l);
    check_range(value, 1.0 / state.psi_r.size(), 1.0, "KIPR");
    return value;
}

ObservableSeries build_series(const std::vector<KrylovState>& states, ObservableKind kind) {
    ObservableSeries series;
    series.kind = kind;
    series.times.resize(states.size());
    series.values.resize(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        series.times(i) = states[i].t;
        switch (kind) {
        case ObservableKind::complexity: series.values(i) = spread_complexity(states[i]); break;
        case ObservableKind::entropy: series.values(i) = spread_entropy(states[i]); break;
        case ObservableKind::entropic_complexity:
            series.values(i) = entropic_complexity(states[i]);
            break;
        case ObservableKind::kipr_right: series.values(i) = kipr(states[i], Side::right); break;
        case ObservableKind::kipr_left: series.values(i) = kipr(states[i], Side::left); break;
        default:
            throw std::invalid_argument("build_series: kind not derived from KrylovState");
        }
    }
    return series;
}

double time_average(const ObservableSeries& series, double t_ref) {
    const int n = static_cast<int>(series.times.size());
    if (n < 2) throw std::invalid_argument("time_average: need at least two samples");
    const double t_end = series.times(n - 1);
    if (!(t_ref < t_end)) throw std::invalid_argument("time_average: t_ref must precede t_max");

    int first = 0;
    while (first < n && series.times(first) < t_ref) ++first;
    if (n - first < 2) {
        throw std::invalid_argument("time_average: fewer than two samples in window");
    }

    double integral = 0.0;
    double t0 = t_ref;
    double v0;
    if (first == 0) {
        v0 = series.values(0);
        t0 = series.times(0);
        if (t0 < t_ref) t0 = t_ref; // times(0) >= 0 and t_ref <= times(0) here
    } else {
        // interpolate the value at exactly t_ref
        const double ta = series.times(first - 1), tb = series.times(first);
        const double va = series.values(first - 1), vb = series.values(first);
        v0 = va + (vb - va) * (t_ref - ta) / (tb - ta);
    }
    for (int i = first; i < n; ++i) {
        const double t1 = series.times(i), v1 = series.values(i);
        if (t1 <= t0) { v0 = v1; continue; }
        integral += 0.5 * (v0 + v1) * (t1 - t0);
        t0 = t1;
        v0 = v1;
    }
    return integral / (t_end - t_ref);
}

std::optional<double> saturation_time(const ObservableSeries& series, double band) {
    const int n = static_cast<int>(series.times.size());
    if (n < 4) return std::nullopt;
    const int tail_start = n - std::max(1, n / 4);
    const double late_mean = series.values.tail(n - tail_start).mean();
    const double tol = band * std::abs(late_mean);

    // last index violating the band, scanning from the end
    int first_ok = n;
    for (int i = n - 1; i >= 0; --i) {
        if (std::abs(series.values(i) - late_mean) > tol) break;
        first_ok = i;
    }
    if (first_ok >= tail_start) return std::nullopt;
    return series.times(first_ok);
}

int prominent_maxima_count(const ObservableSeries& series, double prominence_frac) {
    const int n = static_cast<int>(series.values.size());
    if (n < 3) return 0;
    const double range = series.values.maxCoeff() - series.values.minCoeff();
    if (range <= 0.0) return 0;
    const double threshold = prominence_frac * range;

    int count = 0;
    for (int i = 1; i + 1 < n; ++i) {
        const double v = series.values(i);
        if (!(v > series.values(i - 1) && v > series.values(i + 1))) continue;
        // prominence: drop to the lowest point before re-reaching height v on each side
        double left_min = v;
        for (int j = i - 1; j >= 0; --j) {
            left_min = std::min(left_min, series.values(j));
            if (series.values(j) > v) break;
        }
        double right_min = v;
        for (int j = i + 1; j < n; ++j) {
            right_min = std::min(right_min, series.values(j));
            if (series.values(j) > v) break;
        }
        const double prominence = v - std::max(left_min, right_min);
        if (prominence > threshold) ++count;
    }
    return count;
}

FitResult power_law_fit(const RealVector& sizes, const RealVector& values) {
    const int n = static_cast<int>(sizes.size());
    if (n < 3 || values.size() != n) {
        throw std::invalid_argument("power_law_fit: need >= 3 matching points");
    }
    if ((sizes.array() <= 0.0).any() || (values.array() <= 0.0).any()) {
        throw std::invalid_argument("power_law_fit: inputs must be positive");
    }
    const RealVector x = sizes.array().log();
    const RealVector y = values.array().log();
    const double xm = x.mean(), ym = y.mean();
    const double sxx = (x.array() - xm).square().sum();
    const double sxy = ((x.array() - xm) * (y.array() - ym)).sum();
    if (sxx == 0.0) throw std::invalid_argument("power_law_fit: sizes are all equal");

    FitResult fit;
    fit.exponent = sxy / sxx;
    fit.prefactor = std::exp(ym - fit.exponent * xm);
    const double ss_tot = (y.array() - ym).square().sum();
    const double ss_res = (y.array() - ym - fit.exponent * (x.array() - xm)).square().sum();
    fit.r_squared = (ss_tot > 0.0) ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
    return fit;
}

double late_window_mean(const ObservableSeries& series, double window_frac) {
    const int n = static_cast<int>(series.values.size());
    const int count = std::max(1, static_cast<int>(std::round(n * window_frac)));
    return series.values.tail(count).mean();
}

double late_window_rel_std(const ObservableSeries& series, double window_frac) {
    const int n = static_cast<int>(series.values.size());
    const int count = std::max(2, static_cast<int>(std::round(n * window_frac)));
    const RealVector tail = series.values.tail(count);
    const double mean = tail.mean();
    const double var = (tail.array() - mean).square().sum() / (count - 1);
    return std::sqrt(var) / std::abs(mean);
}

} // namespace kssh
