#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dro/inner.hpp"
#include "dro/stats.hpp"

namespace dro {

/// Scenario set xi_1..xi_n, stored row-major (n rows of `dim` coordinates).
struct Sample {
    std::size_t dim = 1;
    std::vector<double> data;

    Sample() = default;
    explicit Sample(std::vector<double> scalars) : dim(1), data(std::move(scalars)) {}
    Sample(std::size_t dimension, std::vector<double> flat) : dim(dimension), data(std::move(flat)) {
        if (dim == 0 || data.size() % dim != 0)
            throw std::invalid_argument("Sample: flat data size must be a multiple of dim");
    }

    std::size_t size() const { return data.size() / dim; }
    std::span<const double> scenario(std::size_t i) const {
        return {data.data() + i * dim, dim};
    }
    Sample slice(std::size_t first, std::size_t count) const {
        Sample out;
        out.dim = dim;
        out.data.assign(data.begin() + static_cast<std::ptrdiff_t>(first * dim),
                        data.begin() + static_cast<std::ptrdiff_t>((first + count) * dim));
        return out;
    }
};

/**
 * A convex stochastic program: loss evaluation, a subgradient in the
 * decision, and Euclidean projection onto the feasible set. All callables
 * are immutable after construction and safe to invoke concurrently.
 */
struct LossModel {
    std::size_t dim = 1;
    std::function<double(std::span<const double>, std::span<const double>)> loss;
    std::function<std::vector<double>(std::span<const double>, std::span<const double>)> subgradient;
    std::function<void(std::vector<double>&)> project; ///< in place
    std::function<double(std::span<const double>)> lipschitz_envelope; ///< optional M(xi)
    std::function<std::vector<double>(const Sample&)> initial_guess;   ///< optional warm start
};

namespace detail {

/// Threshold for sum-to-one clamped projections, by bisection on the shift.
inline double solve_shift(const std::function<double(double)>& total, double target, double lo,
                          double hi) {
    while (total(lo) < target && lo > -1e14) lo = 2.0 * lo - hi;
    while (total(hi) > target && hi < 1e14) hi = 2.0 * hi - lo;
    for (int i = 0; i < 200 && (hi - lo) > 1e-15 * (1.0 + std::abs(lo) + std::abs(hi)); ++i) {
        const double mid = 0.5 * (lo + hi);
        if (total(mid) > target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

/**
 * Linear portfolio loss x^T xi over the box-constrained simplex
 * { 1^T x = 1, lo <= x <= hi }. With d = 1 the feasible set is the single
 * point x = 1 (a forced decision), which is how scalar mean-estimation
 * problems are expressed.
 */
inline LossModel portfolio_model(std::size_t d, double lo = -10.0, double hi = 10.0) {
    if (!(lo < hi)) throw std::invalid_argument("portfolio_model: need lo < hi");
    const double dd = static_cast<double>(d);
    if (dd * lo > 1.0 || dd * hi < 1.0)
        throw std::invalid_argument("portfolio_model: box-simplex is empty");
    LossModel model;
    model.dim = d;
    model.loss = [](std::span<const double> x, std::span<const double> xi) {
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * xi[i];
        return acc;
    };
    model.subgradient = [](std::span<const double>, std::span<const double> xi) {
        return std::vector<double>(xi.begin(), xi.end());
    };
    model.project = [lo, hi](std::vector<double>& x) {
        auto total = [&](double tau) {
            double acc = 0.0;
            for (double v : x) acc += std::clamp(v - tau, lo, hi);
            return acc;
        };
        double span_guess = 0.0;
        for (double v : x) span_guess = std::max(span_guess, std::abs(v));
        const double tau = detail::solve_shift(total, 1.0, -span_guess - std::abs(hi) - 1.0,
                                               span_guess + std::abs(lo) + 1.0);
        for (double& v : x) v = std::clamp(v - tau, lo, hi);
    };
    model.lipschitz_envelope = [](std::span<const double> xi) {
        double acc = 0.0;
        for (double v : xi) acc += v * v;
        return std::sqrt(acc);
    };
    // greedy vertex of the sample-mean LP: exact for the linear loss and a
    // strong warm start for its robust counterpart
    model.initial_guess = [d, lo, hi](const Sample& sample) {
        std::vector<double> mu(d, 0.0);
        const std::size_t n = sample.size();
        for (std::size_t i = 0; i < n; ++i) {
            auto row = sample.scenario(i);
            for (std::size_t j = 0; j < d; ++j) mu[j] += row[j];
        }
        std::vector<std::size_t> order(d);
        for (std::size_t j = 0; j < d; ++j) order[j] = j;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return mu[a] < mu[b]; });
        std::vector<double> x(d, lo);
        double budget = 1.0 - lo * static_cast<double>(d);
        for (std::size_t j : order) {
            const double add = std::min(budget, hi - lo);
            x[j] += add;
            budget -= add;
            if (budget <= 0.0) break;
        }
        return x;
    };
    return model;
}

/**
 * CVaR threshold problem with loss (xi - x)_+ / (1 - alpha) + x over the
 * real line. The projection clips to [-box, box] only to keep iterates
 * compact; the default box is wide enough to be inactive in practice.
 * Subgradients use the right-derivative convention at the kink.
 */
inline LossModel cvar_model(double alpha_tail, double box = 1e6) {
    if (!(alpha_tail > 0.0) || !(alpha_tail < 1.0))
        throw std::invalid_argument("cvar_model: tail level must lie in (0, 1)");
    const double inv_tail = 1.0 / (1.0 - alpha_tail);
    LossModel model;
    model.dim = 1;
    model.loss = [inv_tail](std::span<const double> x, std::span<const double> xi) {
        return std::max(xi[0] - x[0], 0.0) * inv_tail + x[0];
    };
    model.subgradient = [inv_tail](std::span<const double> x, std::span<const double> xi) {
        return std::vector<double>{xi[0] > x[0] ? 1.0 - inv_tail : 1.0};
    };
    model.project = [box](std::vector<double>& x) {
        if (std::abs(x[0]) > box) {
            static std::atomic<bool> warned{false};
            if (!warned.exchange(true))
                std::fprintf(stderr,
                             "cvar_model: iterate clipped to the solver box [-%g, %g]; "
                             "widen the box if this is unexpected\n",
                             box, box);
            x[0] = std::clamp(x[0], -box, box);
        }
    };
    model.lipschitz_envelope = [inv_tail](std::span<const double>) {
        return std::max(1.0, inv_tail - 1.0);
    };
    model.initial_guess = [](const Sample& sample) {
        auto [mean, var] = sample_mean_variance(sample.data);
        (void)var;
        return std::vector<double>{mean};
    };
    return model;
}

/**
 * Multi-item newsvendor: loss b^T (x - xi)_+ + h^T (xi - x)_+ over the l1
 * ball { ||x||_1 <= radius }, projected by soft-thresholding with a bisected
 * multiplier.
 */
inline LossModel newsvendor_model(std::vector<double> b, std::vector<double> h,
                                  double radius = 10.0) {
    if (b.size() != h.size() || b.empty())
        throw std::invalid_argument("newsvendor_model: cost vectors must match");
    for (std::size_t i = 0; i < b.size(); ++i)
        if (b[i] < 0.0 || h[i] < 0.0)
            throw std::invalid_argument("newsvendor_model: costs must be nonnegative");
    if (!(radius > 0.0)) throw std::invalid_argument("newsvendor_model: radius must be positive");
    const std::size_t d = b.size();
    double env = 0.0;
    for (std::size_t i = 0; i < d; ++i) env += std::max(b[i], h[i]) * std::max(b[i], h[i]);
    env = std::sqrt(env);

    LossModel model;
    model.dim = d;
    model.loss = [b, h](std::span<const double> x, std::span<const double> xi) {
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            acc += b[i] * std::max(x[i] - xi[i], 0.0) + h[i] * std::max(xi[i] - x[i], 0.0);
        return acc;
    };
    model.subgradient = [b, h](std::span<const double> x, std::span<const double> xi) {
        std::vector<double> g(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            g[i] = (x[i] >= xi[i] ? b[i] : 0.0) - (xi[i] > x[i] ? h[i] : 0.0);
        return g;
    };
    model.project = [radius](std::vector<double>& x) {
        double l1 = 0.0;
        for (double v : x) l1 += std::abs(v);
        if (l1 <= radius) return;
        auto total = [&](double tau) {
            double acc = 0.0;
            for (double v : x) acc += std::max(std::abs(v) - tau, 0.0);
            return acc;
        };
        const double tau = detail::solve_shift(total, radius, 0.0, l1);
        for (double& v : x) {
            const double mag = std::max(std::abs(v) - tau, 0.0);
            v = v >= 0.0 ? mag : -mag;
        }
    };
    model.lipschitz_envelope = [env](std::span<const double>) { return env; };
    model.initial_guess = [d](const Sample& sample) {
        std::vector<double> mean(d, 0.0);
        const std::size_t n = sample.size();
        for (std::size_t i = 0; i < n; ++i) {
            auto row = sample.scenario(i);
            for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
        }
        for (double& v : mean) v /= static_cast<double>(n);
        return mean;
    };
    return model;
}

/// Loss vector ell(x; xi_i) over all scenarios of a sample.
inline std::vector<double> loss_vector(const LossModel& model, std::span<const double> x,
                                       const Sample& sample) {
    const std::size_t n = sample.size();
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = model.loss(x, sample.scenario(i));
    return z;
}

/**
 * Variance-regularized linear objective
 *   mean(x^T xi) + sqrt((rho/n) x^T Sigma_n x)
 * with the empirical covariance in the 1/n convention. For a linear loss
 * x^T Sigma_n x equals the sample variance of the per-scenario losses, so no
 * covariance matrix is materialized.
 */
inline double markowitz_objective(std::span<const double> x, const Sample& sample,
                                  const UncertaintyBudget& budget) {
    std::vector<double> y(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        auto row = sample.scenario(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) acc += x[j] * row[j];
        y[i] = acc;
    }
    auto [mean, var] = sample_mean_variance(y);
    return mean + std::sqrt(budget.rho * var / static_cast<double>(sample.size()));
}

} // namespace dro
