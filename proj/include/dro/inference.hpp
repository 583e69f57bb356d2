#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dro/inner.hpp"
#include "dro/outer.hpp"
#include "dro/problems.hpp"
#include "dro/stats.hpp"

namespace dro {

enum class IntervalMethod { el_two_sided, el_one_sided_upper, normal_approx, sectioned };

inline const char* interval_method_name(IntervalMethod method) {
    switch (method) {
        case IntervalMethod::el_two_sided: return "el-two-sided";
        case IntervalMethod::el_one_sided_upper: return "el-one-sided-upper";
        case IntervalMethod::normal_approx: return "normal";
        case IntervalMethod::sectioned: return "sectioned";
    }
    return "unknown";
}

/// Confidence interval for the optimal value of a stochastic program.
struct ConfidenceInterval {
    double lower = 0.0;
    double upper = 0.0;
    double alpha = 0.05;
    IntervalMethod method = IntervalMethod::el_two_sided;
    double rho_used = 0.0;
};

/**
 * Two-sided interval with asymptotically exact coverage. The ball size is
 * calibrated as rho = chi2 quantile at 1 - alpha (one degree of freedom).
 * The upper endpoint is the robust optimal value; the lower endpoint is the
 * one-step bound: the best-case reweighted mean at the plain SAA minimizer.
 * Nonnegative losses therefore always produce a nonnegative lower endpoint.
 */
inline ConfidenceInterval two_sided_interval(const LossModel& model, const Sample& sample,
                                             double alpha,
                                             const DivergenceSpec& spec = DivergenceSpec::chi2(),
                                             const SolveConfig& cfg = {}) {
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw std::invalid_argument("two_sided_interval: alpha must lie in (0, 1)");
    const std::size_t n = sample.size();
    const double rho = chi_square_quantile(1, 1.0 - alpha);
    const UncertaintyBudget budget{rho, n};

    const Solution saa = solve_saa(model, sample, cfg);
    const auto losses = loss_vector(model, saa.x, sample);
    const double lower = best_case_mean(losses, spec, budget, cfg.inner).value;
    const double upper = solve_robust(model, sample, spec, budget, cfg).value;
    return ConfidenceInterval{lower, upper, alpha, IntervalMethod::el_two_sided, rho};
}

/**
 * One-sided upper confidence bound (-inf, u_n]. For level 1 - alpha the ball
 * is shrunk to rho = chi2 quantile at 1 - 2 alpha, which restores exact
 * one-sided coverage.
 */
inline ConfidenceInterval one_sided_upper(const LossModel& model, const Sample& sample,
                                          double alpha,
                                          const DivergenceSpec& spec = DivergenceSpec::chi2(),
                                          const SolveConfig& cfg = {}) {
    if (!(alpha > 0.0) || !(alpha < 0.5))
        throw std::invalid_argument("one_sided_upper: alpha must lie in (0, 0.5)");
    const std::size_t n = sample.size();
    const double rho = chi_square_quantile(1, 1.0 - 2.0 * alpha);
    const UncertaintyBudget budget{rho, n};
    const double upper = solve_robust(model, sample, spec, budget, cfg).value;
    return ConfidenceInterval{-std::numeric_limits<double>::infinity(), upper, alpha,
                              IntervalMethod::el_one_sided_upper, rho};
}

/// Plug-in normal interval around the SAA optimum with the estimated
/// standard error sqrt(var(loss at the SAA minimizer) / n).
inline ConfidenceInterval normal_interval(const LossModel& model, const Sample& sample,
                                          double alpha, const SolveConfig& cfg = {}) {
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw std::invalid_argument("normal_interval: alpha must lie in (0, 1)");
    const std::size_t n = sample.size();
    const Solution saa = solve_saa(model, sample, cfg);
    const auto losses = loss_vector(model, saa.x, sample);
    auto [mean, var] = sample_mean_variance(losses);
    (void)mean;
    const double half =
        normal_quantile(1.0 - 0.5 * alpha) * std::sqrt(var / static_cast<double>(n));
    return ConfidenceInterval{saa.value - half, saa.value + half, alpha,
                              IntervalMethod::normal_approx, 0.0};
}

/// Per-block statistics behind a sectioned bound.
struct BlockStats {
    std::size_t sections = 0;     ///< m
    std::size_t block_length = 0; ///< b = floor(n / m)
    std::vector<double> block_upper_bounds;
    double mean = 0.0;             ///< average of the block bounds
    double spread = 0.0;           ///< standard error of that average,
                                   ///< sqrt(sum (U_j - mean)^2 / (m (m-1)))
    double pivot_correction = 0.0; ///< sqrt((rho / b) var(loss at SAA minimizer))
};

struct SectioningConfig {
    /// Radius of each block's ball. `block_level` uses rho/b, which makes
    /// the robustness bias of the block bounds cancel against the pivot
    /// correction exactly; `full_sample` uses rho/n.
    enum class BlockRadius { block_level, full_sample } radius = BlockRadius::block_level;
};

/**
 * Sectioned one-sided upper bound for dependent data: split the first m*b
 * observations into m contiguous blocks, evaluate the robust upper value on
 * each block, and pivot the block average by a Student-t quantile with m-1
 * degrees of freedom. Leftover observations still enter the SAA minimizer
 * and the variance plug-in.
 */
inline std::pair<ConfidenceInterval, BlockStats> sectioned_upper_bound(
    const LossModel& model, const Sample& sample, std::size_t m, double alpha,
    const DivergenceSpec& spec = DivergenceSpec::chi2(), const SolveConfig& cfg = {},
    const SectioningConfig& section_cfg = {}) {
    const std::size_t n = sample.size();
    if (m < 2) throw std::invalid_argument("sectioned_upper_bound: need at least two sections");
    if (n < 2 * m) throw std::invalid_argument("sectioned_upper_bound: need n >= 2 m");
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw std::invalid_argument("sectioned_upper_bound: alpha must lie in (0, 1)");

    const double rho = chi_square_quantile(1, 1.0 - alpha);
    const std::size_t b = n / m;
    const double bd = static_cast<double>(b);

    BlockStats stats;
    stats.sections = m;
    stats.block_length = b;
    stats.block_upper_bounds.reserve(m);

    UncertaintyBudget block_budget{rho, b};
    if (section_cfg.radius == SectioningConfig::BlockRadius::full_sample)
        block_budget.rho = rho * bd / static_cast<double>(n);

    for (std::size_t j = 0; j < m; ++j) {
        const Sample block = sample.slice(j * b, b);
        stats.block_upper_bounds.push_back(
            solve_robust(model, block, spec, block_budget, cfg).value);
    }
    double mean = 0.0;
    for (double u : stats.block_upper_bounds) mean += u;
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (double u : stats.block_upper_bounds) ss += (u - mean) * (u - mean);
    stats.mean = mean;
    stats.spread = std::sqrt(ss / (static_cast<double>(m) * static_cast<double>(m - 1)));

    const Solution saa = solve_saa(model, sample, cfg);
    const auto losses = loss_vector(model, saa.x, sample);
    auto [lmean, lvar] = sample_mean_variance(losses);
    (void)lmean;
    stats.pivot_correction = std::sqrt(rho * lvar / bd);

    const double t = student_t_quantile(static_cast<unsigned>(m - 1), 1.0 - alpha);
    const double bound = stats.mean - stats.pivot_correction + stats.spread * t;
    return {ConfidenceInterval{-std::numeric_limits<double>::infinity(), bound, alpha,
                               IntervalMethod::sectioned, rho},
            stats};
}

} // namespace dro
