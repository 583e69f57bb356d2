#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>

namespace dro {

namespace detail {

constexpr int kMaxSeriesIters = 500;
constexpr double kSeriesEps = 1e-15;

/// Lower regularized incomplete gamma P(a, x) by series expansion (x < a+1).
inline double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < kMaxSeriesIters; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * kSeriesEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

/// Upper regularized incomplete gamma Q(a, x) by continued fraction (x >= a+1).
inline double gamma_q_continued_fraction(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxSeriesIters; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kSeriesEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

/// Continued fraction for the regularized incomplete beta function.
inline double beta_continued_fraction(double a, double b, double x) {
    const double tiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxSeriesIters; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kSeriesEps) break;
    }
    return h;
}

} // namespace detail

/// Lower regularized incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
inline double lower_regularized_gamma(double a, double x) {
    if (!(a > 0.0) || !std::isfinite(x) || x < 0.0)
        throw std::domain_error("lower_regularized_gamma: need a > 0 and x >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_continued_fraction(a, x);
}

/// Regularized incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0) || !(x <= 1.0))
        throw std::domain_error("regularized_incomplete_beta: bad arguments");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * detail::beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / 2.5066282746310005024;
}

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / 1.4142135623730950488);
}

inline double chi_square_cdf(unsigned df, double x) {
    if (df == 0) throw std::domain_error("chi_square_cdf: df must be positive");
    if (x <= 0.0) return 0.0;
    return lower_regularized_gamma(0.5 * df, 0.5 * x);
}

inline double chi_square_pdf(unsigned df, double x) {
    if (x <= 0.0) return 0.0;
    const double a = 0.5 * df;
    return std::exp((a - 1.0) * std::log(x) - 0.5 * x - a * std::log(2.0) - std::lgamma(a));
}

inline double student_t_cdf(unsigned df, double t) {
    if (df == 0) throw std::domain_error("student_t_cdf: df must be positive");
    if (t == 0.0) return 0.5;
    const double v = static_cast<double>(df);
    const double x = v / (v + t * t);
    const double tail = 0.5 * regularized_incomplete_beta(0.5 * v, 0.5, x);
    return t > 0.0 ? 1.0 - tail : tail;
}

inline double student_t_pdf(unsigned df, double t) {
    const double v = static_cast<double>(df);
    const double ln = std::lgamma(0.5 * (v + 1.0)) - std::lgamma(0.5 * v) -
                      0.5 * std::log(v * 3.14159265358979323846) -
                      0.5 * (v + 1.0) * std::log1p(t * t / v);
    return std::exp(ln);
}

namespace detail {

/**
 * Inverts a smooth monotone CDF on the bracket [lo, hi]: bisection to locate
 * the root, then Newton polish with the density. The bracket must satisfy
 * cdf(lo) <= p <= cdf(hi).
 */
template <typename Cdf, typename Pdf>
double invert_cdf(const Cdf& cdf, const Pdf& pdf, double p, double lo, double hi) {
    for (int i = 0; i < 200 && (hi - lo) > 1e-13 * (1.0 + std::abs(lo) + std::abs(hi)); ++i) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) < p)
            lo = mid;
        else
            hi = mid;
    }
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 4; ++i) {
        const double dens = pdf(x);
        if (dens <= 0.0) break;
        double step = (cdf(x) - p) / dens;
        double next = x - step;
        if (next <= lo || next >= hi) break;
        x = next;
    }
    return x;
}

} // namespace detail

/// Standard normal quantile, absolute accuracy better than 1e-9.
inline double normal_quantile(double p) {
    if (!(p > 0.0) || !(p < 1.0))
        throw std::domain_error("normal_quantile: p must lie in (0, 1)");
    if (p == 0.5) return 0.0;
    // symmetric: solve in the lower half for stability
    if (p > 0.5) return -normal_quantile(1.0 - p);
    double lo = -40.0, hi = 0.0;
    return detail::invert_cdf([](double x) { return normal_cdf(x); },
                              [](double x) { return normal_pdf(x); }, p, lo, hi);
}

/// Chi-square quantile: the rho with P(chi2_df <= rho) = p.
inline double chi_square_quantile(unsigned df, double p) {
    if (df == 0) throw std::domain_error("chi_square_quantile: df must be positive");
    if (!(p > 0.0) || !(p < 1.0))
        throw std::domain_error("chi_square_quantile: p must lie in (0, 1)");
    double hi = df + 16.0;
    while (chi_square_cdf(df, hi) < p) hi *= 2.0;
    return detail::invert_cdf([df](double x) { return chi_square_cdf(df, x); },
                              [df](double x) { return chi_square_pdf(df, x); }, p, 0.0, hi);
}

/// Student-t quantile with df degrees of freedom.
inline double student_t_quantile(unsigned df, double p) {
    if (df == 0) throw std::domain_error("student_t_quantile: df must be positive");
    if (!(p > 0.0) || !(p < 1.0))
        throw std::domain_error("student_t_quantile: p must lie in (0, 1)");
    if (p == 0.5) return 0.0;
    if (p < 0.5) return -student_t_quantile(df, 1.0 - p);
    double hi = 2.0;
    while (student_t_cdf(df, hi) < p) hi *= 2.0;
    return detail::invert_cdf([df](double t) { return student_t_cdf(df, t); },
                              [df](double t) { return student_t_pdf(df, t); }, p, 0.0, hi);
}

/**
 * Sample mean and variance with the 1/n normalization,
 * s^2 = (1/n) sum z_i^2 - mean^2, computed in centered two-pass form.
 */
inline std::pair<double, double> sample_mean_variance(std::span<const double> z) {
    if (z.empty()) throw std::invalid_argument("sample_mean_variance: empty input");
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= static_cast<double>(z.size());
    double ss = 0.0;
    for (double v : z) {
        const double d = v - mean;
        ss += d * d;
    }
    return {mean, ss / static_cast<double>(z.size())};
}

} // namespace dro
