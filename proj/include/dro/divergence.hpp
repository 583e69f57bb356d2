#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace dro {

/**
 * Cressie-Read divergence index.
 *
 * The family is normalized so that f(1) = f'(1) = 0 and f''(1) = 2:
 *
 *   f_k(t) = 2 (t^k - k t + k - 1) / (k (k - 1)),   f_k(t) = +inf for t < 0,
 *
 * with the limits f_0(t) = -2 log t + 2t - 2 (empirical likelihood) and
 * f_1(t) = 2 t log t - 2t + 2 (KL). Indices within 1e-5 of 0 or 1 are
 * evaluated through the closed-form limits to avoid catastrophic
 * cancellation in the generic expression.
 */
struct DivergenceSpec {
    double k = 2.0;

    static constexpr double limit_tolerance = 1e-5;

    static DivergenceSpec cressie_read(double k) { return DivergenceSpec{k}; }
    static DivergenceSpec chi2() { return DivergenceSpec{2.0}; }
    static DivergenceSpec kl() { return DivergenceSpec{1.0}; }
    static DivergenceSpec empirical_likelihood() { return DivergenceSpec{0.0}; }

    bool el_limit() const { return std::abs(k) < limit_tolerance; }
    bool kl_limit() const { return std::abs(k - 1.0) < limit_tolerance; }
    bool is_chi2() const { return k == 2.0; }

    /// Conjugate exponent k* with 1/k + 1/k* = 1 (k outside {0, 1} only).
    double conjugate_exponent() const { return k / (k - 1.0); }
};

namespace detail {
/// pow with fast paths for the exponents the Cressie-Read family produces.
inline double pow_fast(double base, double exponent) {
    if (exponent == 1.0) return base;
    if (exponent == 2.0) return base * base;
    if (exponent == 3.0) return base * base * base;
    if (exponent == 0.5) return std::sqrt(base);
    if (exponent == 1.5) return base * std::sqrt(base);
    if (exponent == -0.5) return 1.0 / std::sqrt(base);
    if (exponent == -1.0) return 1.0 / base;
    if (exponent == 0.0) return 1.0;
    return std::pow(base, exponent);
}
} // namespace detail

/// f_k(t); +infinity for t < 0 and outside the domain of the limit forms.
inline double f_value(const DivergenceSpec& spec, double t) {
    if (!std::isfinite(t)) throw std::domain_error("f_value: non-finite argument");
    const double inf = std::numeric_limits<double>::infinity();
    if (t < 0.0) return inf;
    if (spec.el_limit()) {
        if (t == 0.0) return inf;
        return -2.0 * std::log(t) + 2.0 * t - 2.0;
    }
    if (spec.kl_limit()) {
        if (t == 0.0) return 2.0;
        return 2.0 * t * std::log(t) - 2.0 * t + 2.0;
    }
    const double k = spec.k;
    if (t == 0.0) {
        if (k < 0.0) return inf;
        return 2.0 / k; // 2 (k - 1) / (k (k - 1))
    }
    return 2.0 * (detail::pow_fast(t, k) - k * t + k - 1.0) / (k * (k - 1.0));
}

/// Right derivative f_k'(t) on t > 0.
inline double f_derivative(const DivergenceSpec& spec, double t) {
    if (!(t > 0.0)) throw std::domain_error("f_derivative: need t > 0");
    if (spec.el_limit()) return -2.0 / t + 2.0;
    if (spec.kl_limit()) return 2.0 * std::log(t);
    return 2.0 * (detail::pow_fast(t, spec.k - 1.0) - 1.0) / (spec.k - 1.0);
}

/// f_k''(t) on t > 0; equals 2 t^(k-2), so 2 at t = 1 for every index.
inline double f_second_derivative(const DivergenceSpec& spec, double t) {
    if (!(t > 0.0)) throw std::domain_error("f_second_derivative: need t > 0");
    if (spec.el_limit()) return 2.0 / (t * t);
    if (spec.kl_limit()) return 2.0 / t;
    return 2.0 * detail::pow_fast(t, spec.k - 2.0);
}

/**
 * Fenchel conjugate f_k*(s) = sup_{t >= 0} { s t - f_k(t) }.
 *
 * Closed forms:
 *   k > 1:        (2/k) [ ((k-1) s / 2 + 1)_+^{k*} - 1 ]        (finite everywhere)
 *   KL limit:     2 (e^{s/2} - 1)
 *   EL limit:     -2 log(1 - s/2) for s < 2, +inf otherwise
 *   k < 1 (else): (2/k) [ u^{k*} - 1 ] for u = (k-1) s / 2 + 1 > 0, +inf otherwise.
 */
inline double f_conjugate(const DivergenceSpec& spec, double s) {
    if (!std::isfinite(s)) throw std::domain_error("f_conjugate: non-finite argument");
    const double inf = std::numeric_limits<double>::infinity();
    if (spec.el_limit()) {
        if (s >= 2.0) return inf;
        return -2.0 * std::log1p(-0.5 * s);
    }
    if (spec.kl_limit()) return 2.0 * std::expm1(0.5 * s);
    const double k = spec.k;
    const double kstar = spec.conjugate_exponent();
    const double u = 0.5 * (k - 1.0) * s + 1.0;
    if (u <= 0.0) {
        if (k > 1.0) return -2.0 / k; // positive-part clamp active
        return inf;                   // outside the conjugate's domain for k < 1
    }
    const double powered = detail::pow_fast(u, kstar);
    if (!std::isfinite(powered)) return inf;
    return (2.0 / k) * (powered - 1.0);
}

/// Derivative of the conjugate, (f_k*)'(s); used for dual weight recovery.
inline double f_conjugate_derivative(const DivergenceSpec& spec, double s) {
    const double inf = std::numeric_limits<double>::infinity();
    if (spec.el_limit()) {
        if (s >= 2.0) return inf;
        return 1.0 / (1.0 - 0.5 * s);
    }
    if (spec.kl_limit()) return std::exp(0.5 * s);
    const double k = spec.k;
    const double u = 0.5 * (k - 1.0) * s + 1.0;
    if (u <= 0.0) return k > 1.0 ? 0.0 : inf;
    const double powered = detail::pow_fast(u, 1.0 / (k - 1.0)); // k* - 1
    if (!std::isfinite(powered)) return inf;
    return powered;
}

struct AssumptionReport {
    double f1 = 0.0;   ///< f(1)
    double fp1 = 0.0;  ///< central-difference f'(1)
    double fpp1 = 0.0; ///< central-difference f''(1)
    bool pass = false;
};

/**
 * Checks the normalization f(1) = 0, f'(1) = 0, f''(1) = 2 by central finite
 * differences with step 1e-4. Pass thresholds: |f(1)| <= 1e-10,
 * |f'(1)| <= 1e-6, |f''(1) - 2| <= 1e-4.
 */
inline AssumptionReport check_normalization(const std::function<double(double)>& f) {
    const double h = 1e-4;
    AssumptionReport report;
    const double fm = f(1.0 - h);
    const double f0 = f(1.0);
    const double fp = f(1.0 + h);
    report.f1 = f0;
    report.fp1 = (fp - fm) / (2.0 * h);
    report.fpp1 = (fp - 2.0 * f0 + fm) / (h * h);
    report.pass = std::abs(report.f1) <= 1e-10 && std::abs(report.fp1) <= 1e-6 &&
                  std::abs(report.fpp1 - 2.0) <= 1e-4;
    return report;
}

inline AssumptionReport check_normalization(const DivergenceSpec& spec) {
    return check_normalization([&spec](double t) { return f_value(spec, t); });
}

/**
 * Constant C_f with ||n p - 1||_2 <= sqrt(rho C_f) over the divergence ball
 * { p in simplex : sum_i f(n p_i) <= rho }.
 *
 * Every feasible coordinate satisfies n p_i in [m, M] where f(M) = rho on
 * (1, inf) and f(m) = rho on (0, 1) (m = 0 when f(0) <= rho). The bound then
 * follows from (x-1)^2 <= C_f f(x) on [m, M] with
 * C_f = sup_{x in [m, M]} (x-1)^2 / f(x), which equals 1 for the chi-square
 * index under this normalization.
 */
inline double weight_norm_constant(const DivergenceSpec& spec, double rho) {
    if (!(rho > 0.0)) return 1.0;
    auto solve_level = [&](double lo, double hi) {
        // f is monotone on each side of 1; plain bisection on f(x) = rho
        for (int i = 0; i < 200 && (hi - lo) > 1e-14 * (1.0 + hi); ++i) {
            const double mid = 0.5 * (lo + hi);
            const bool below = f_value(spec, mid) < rho;
            const bool rising = mid > 1.0;
            if (below == rising)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    };
    double big = 2.0;
    while (f_value(spec, big) < rho && big < 1e12) big *= 2.0;
    const double upper = solve_level(1.0, big);
    double lower = 0.0;
    if (f_value(spec, 0.0) > rho) lower = solve_level(0.0, 1.0);

    auto ratio = [&](double x) {
        if (std::abs(x - 1.0) < 1e-7) return 2.0 / f_second_derivative(spec, x);
        const double fx = f_value(spec, x);
        if (!(fx > 0.0) || !std::isfinite(fx)) return 0.0;
        return (x - 1.0) * (x - 1.0) / fx;
    };
    double best = 0.0;
    double arg_best = upper;
    const int grid = 400;
    for (int i = 0; i <= grid; ++i) {
        const double x = lower + (upper - lower) * static_cast<double>(i) / grid;
        const double r = ratio(x);
        if (r > best) {
            best = r;
            arg_best = x;
        }
    }
    // golden refinement around the best grid point
    const double step = (upper - lower) / grid;
    double a = std::max(lower, arg_best - step);
    double b = std::min(upper, arg_best + step);
    const double inv_phi = 0.6180339887498949;
    double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
    double r1 = ratio(x1), r2 = ratio(x2);
    for (int i = 0; i < 60; ++i) {
        if (r1 < r2) {
            a = x1;
            x1 = x2;
            r1 = r2;
            x2 = a + inv_phi * (b - a);
            r2 = ratio(x2);
        } else {
            b = x2;
            x2 = x1;
            r2 = r1;
            x1 = b - inv_phi * (b - a);
            r1 = ratio(x1);
        }
    }
    return std::max(best, std::max(r1, r2));
}

} // namespace dro
