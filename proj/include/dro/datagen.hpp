#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "dro/problems.hpp"
#include "dro/rng.hpp"
#include "dro/stats.hpp"

namespace dro {

// ---------------------------------------------------------------------------
// Portfolio: returns xi ~ N(mu, Sigma) with mu ~ N(0, I_d) and Sigma = G^T G
// for a standard-normal d x d matrix G (standard Wishart, d degrees of
// freedom). The exact population optimum of the linear loss over the
// box-simplex is computed greedily.
// ---------------------------------------------------------------------------

struct PortfolioInstance {
    std::size_t d = 1;
    double lo = -10.0, hi = 10.0;
    std::vector<double> mu;       ///< population mean
    std::vector<double> factor;   ///< G, row-major; xi = mu + G^T u, u ~ N(0, I)
    double true_optimum = 0.0;    ///< min mu^T x over the box-simplex
};

/// Greedy solution of min mu^T x over { 1^T x = 1, lo <= x <= hi }.
inline double box_simplex_linear_minimum(std::span<const double> mu, double lo, double hi) {
    const std::size_t d = mu.size();
    std::vector<std::size_t> order(d);
    for (std::size_t j = 0; j < d; ++j) order[j] = j;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return mu[a] < mu[b]; });
    double value = 0.0, budget = 1.0 - lo * static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) value += mu[j] * lo;
    for (std::size_t j : order) {
        const double add = std::min(budget, hi - lo);
        value += mu[j] * add;
        budget -= add;
        if (budget <= 0.0) break;
    }
    return value;
}

inline PortfolioInstance draw_portfolio_instance(std::size_t d, double lo, double hi,
                                                 RngStream& rng) {
    if (d == 0) throw std::invalid_argument("draw_portfolio_instance: d must be positive");
    PortfolioInstance inst;
    inst.d = d;
    inst.lo = lo;
    inst.hi = hi;
    inst.mu.resize(d);
    for (double& v : inst.mu) v = rng.next_gaussian();
    inst.factor.resize(d * d);
    for (double& v : inst.factor) v = rng.next_gaussian();
    inst.true_optimum = box_simplex_linear_minimum(inst.mu, lo, hi);
    return inst;
}

inline Sample draw_portfolio_sample(const PortfolioInstance& inst, std::size_t n, RngStream& rng) {
    const std::size_t d = inst.d;
    std::vector<double> flat(n * d);
    std::vector<double> u(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (double& v : u) v = rng.next_gaussian();
        for (std::size_t j = 0; j < d; ++j) {
            double acc = inst.mu[j];
            for (std::size_t r = 0; r < d; ++r) acc += inst.factor[r * d + j] * u[r];
            flat[i * d + j] = acc;
        }
    }
    return Sample(d, std::move(flat));
}

// ---------------------------------------------------------------------------
// CVaR scenario mixtures: seven equally weighted components centered at
// mu in {-6, -4, ..., 6}. The normal kind pairs them with variances
// 2, 4, ..., 14; the heavy-tailed kinds add symmetric noise with
// P(|Z| >= t) = min(1, t^-a), sampled by inverse CDF (so |Z| >= 1 always).
// ---------------------------------------------------------------------------

enum class CvarKind { normal_mixture, heavy_tail_a3, heavy_tail_a5 };

namespace detail {
inline constexpr double kCvarMeans[7] = {-6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0};
inline constexpr double kCvarVariances[7] = {2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0};

inline double heavy_tail_exponent(CvarKind kind) {
    return kind == CvarKind::heavy_tail_a3 ? 3.0 : 5.0;
}
} // namespace detail

inline double draw_cvar_scenario(CvarKind kind, RngStream& rng) {
    const int comp = static_cast<int>(rng.next_uniform() * 7.0) % 7;
    const double mu = detail::kCvarMeans[comp];
    if (kind == CvarKind::normal_mixture)
        return mu + std::sqrt(detail::kCvarVariances[comp]) * rng.next_gaussian();
    const double a = detail::heavy_tail_exponent(kind);
    const double magnitude = std::pow(rng.next_uniform(), -1.0 / a);
    const double sign = rng.next_uniform() <= 0.5 ? -1.0 : 1.0;
    return mu + sign * magnitude;
}

inline Sample draw_cvar_sample(CvarKind kind, std::size_t n, RngStream& rng) {
    std::vector<double> data(n);
    for (double& v : data) v = draw_cvar_scenario(kind, rng);
    return Sample(std::move(data));
}

/// Analytic CDF of the scenario mixtures (used by consistency oracles).
inline double cvar_mixture_cdf(CvarKind kind, double x) {
    double acc = 0.0;
    for (int comp = 0; comp < 7; ++comp) {
        const double mu = detail::kCvarMeans[comp];
        if (kind == CvarKind::normal_mixture) {
            acc += normal_cdf((x - mu) / std::sqrt(detail::kCvarVariances[comp]));
        } else {
            const double a = detail::heavy_tail_exponent(kind);
            const double t = x - mu;
            double cdf;
            if (t <= -1.0)
                cdf = 0.5 * std::pow(-t, -a);
            else if (t < 1.0)
                cdf = 0.5; // no mass inside (-1, 1)
            else
                cdf = 1.0 - 0.5 * std::pow(t, -a);
            acc += cdf;
        }
    }
    return acc / 7.0;
}

// ---------------------------------------------------------------------------
// Multi-item newsvendor: backorder / holding costs i.i.d. exponential with
// mean 10, demand xi ~ N(0, Sigma) with Sigma standard Wishart.
// ---------------------------------------------------------------------------

struct NewsvendorInstance {
    std::size_t d = 1;
    std::vector<double> b, h;
    std::vector<double> factor; ///< G, row-major; xi = G^T u
};

inline NewsvendorInstance draw_newsvendor_instance(std::size_t d, RngStream& rng) {
    if (d == 0) throw std::invalid_argument("draw_newsvendor_instance: d must be positive");
    NewsvendorInstance inst;
    inst.d = d;
    inst.b.resize(d);
    inst.h.resize(d);
    for (double& v : inst.b) v = rng.next_exponential(10.0);
    for (double& v : inst.h) v = rng.next_exponential(10.0);
    inst.factor.resize(d * d);
    for (double& v : inst.factor) v = rng.next_gaussian();
    return inst;
}

inline Sample draw_newsvendor_sample(const NewsvendorInstance& inst, std::size_t n,
                                     RngStream& rng) {
    const std::size_t d = inst.d;
    std::vector<double> flat(n * d);
    std::vector<double> u(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (double& v : u) v = rng.next_gaussian();
        for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (std::size_t r = 0; r < d; ++r) acc += inst.factor[r * d + j] * u[r];
            flat[i * d + j] = acc;
        }
    }
    return Sample(d, std::move(flat));
}

// ---------------------------------------------------------------------------
// Scalar affine autoregressive chain xi_{t+1} = c xi_t + eps_{t+1} with
// standard normal noise, started from the stationary law N(0, 1/(1 - c^2)).
// Geometrically mixing for |c| < 1.
// ---------------------------------------------------------------------------

inline Sample draw_affine_ar_sample(double coeff, std::size_t n, RngStream& rng) {
    if (!(std::abs(coeff) < 1.0))
        throw std::invalid_argument("draw_affine_ar_sample: need |coeff| < 1");
    std::vector<double> data(n);
    double state = rng.next_gaussian() / std::sqrt(1.0 - coeff * coeff);
    for (std::size_t i = 0; i < n; ++i) {
        data[i] = state;
        state = coeff * state + rng.next_gaussian();
    }
    return Sample(std::move(data));
}

} // namespace dro
