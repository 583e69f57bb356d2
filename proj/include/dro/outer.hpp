#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dro/inner.hpp"
#include "dro/problems.hpp"

namespace dro {

struct SolveConfig {
    int max_iters = 5000;
    enum class StepRule { sqrt_decay, polyak } step_rule = StepRule::sqrt_decay;
    double initial_step = 0.0;  ///< 0 = auto (scale estimate / subgradient norm)
    double tolerance = 1e-7;    ///< relative objective-improvement stagnation level
    int stall_patience = 250;   ///< stop after this many iterations without improvement
    bool track_history = false;
    InnerConfig inner;          ///< accuracy of the per-iterate robust evaluation
};

struct Solution {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> history; ///< best objective per iteration when tracked
};

namespace detail {

inline double vector_norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

/**
 * Projected subgradient descent with iterate averaging. `eval` returns the
 * objective value and one subgradient at x in a single pass. Returns the
 * better of the best-seen iterate and the projected running average;
 * `converged` reports whether the best value stagnated before the budget.
 */
template <typename Eval>
Solution projected_subgradient(const LossModel& model, const Sample& sample, const Eval& eval,
                               const SolveConfig& cfg) {
    if (model.dim == 0) throw std::invalid_argument("solver: zero-dimensional model");
    std::vector<double> x = model.initial_guess ? model.initial_guess(sample)
                                                : std::vector<double>(model.dim, 0.0);
    if (x.size() != model.dim) throw std::invalid_argument("solver: bad initial point");
    model.project(x);

    auto [value, grad] = eval(x);

    Solution best;
    best.x = x;
    best.value = value;
    if (cfg.track_history) best.history.push_back(best.value);

    double step0 = cfg.initial_step;
    if (step0 <= 0.0) {
        double scale = 1.0 + vector_norm(x);
        for (double v : sample.data) scale = std::max(scale, std::abs(v));
        step0 = scale / std::max(vector_norm(grad), 1e-12);
    }

    // sqrt-decay schedule restarted from the incumbent at geometrically
    // smaller scales; the later stages polish onto faces of the feasible set
    const double stage_scales[] = {1.0, 0.04, 0.0016};
    const int stages = 3;
    const int iters_per_stage = std::max(cfg.max_iters / stages, 1);

    int total_iters = 0;
    bool last_stage_stalled = false;
    double final_stage_start = best.value;
    for (int stage = 0; stage < stages && total_iters < cfg.max_iters; ++stage) {
        final_stage_start = best.value;
        x = best.x;
        std::tie(value, grad) = eval(x);
        std::vector<double> avg = x;
        const double base = step0 * stage_scales[stage];
        int stall = 0;
        last_stage_stalled = false;
        for (int iter = 0; iter < iters_per_stage && total_iters < cfg.max_iters; ++iter) {
            const double step = base / std::sqrt(static_cast<double>(iter + 1));
            double used = step;
            if (cfg.step_rule == SolveConfig::StepRule::polyak) {
                const double gnorm = std::max(vector_norm(grad), 1e-12);
                const double gap =
                    value - best.value + step * cfg.tolerance * (1.0 + std::abs(value));
                used = std::max(gap, 0.0) / (gnorm * gnorm) + 0.1 * step;
            }
            for (std::size_t i = 0; i < x.size(); ++i) x[i] -= used * grad[i];
            model.project(x);
            for (std::size_t i = 0; i < x.size(); ++i)
                avg[i] += (x[i] - avg[i]) / static_cast<double>(iter + 2);

            std::tie(value, grad) = eval(x);
            ++total_iters;
            if (value < best.value - 1e-12 * (1.0 + std::abs(best.value))) {
                best.value = value;
                best.x = x;
                stall = 0;
            } else {
                if (value < best.value) {
                    best.value = value;
                    best.x = x;
                }
                ++stall;
            }
            if (cfg.track_history) best.history.push_back(best.value);
            if (stall >= cfg.stall_patience) {
                last_stage_stalled = true;
                break;
            }
        }
        model.project(avg);
        const double avg_value = eval(avg).first;
        if (avg_value < best.value) {
            best.value = avg_value;
            best.x = avg;
        }
        if (cfg.track_history) best.history.push_back(best.value);
    }

    best.iterations = total_iters;
    // stable when the final stage stalled outright or no longer moved the
    // incumbent by more than the configured tolerance
    best.converged = last_stage_stalled ||
                     final_stage_start - best.value <= cfg.tolerance * (1.0 + std::abs(best.value));
    return best;
}

} // namespace detail

/// Sample-average approximation: minimize (1/n) sum_i loss(x; xi_i) over the
/// feasible set by projected subgradient descent with iterate averaging.
inline Solution solve_saa(const LossModel& model, const Sample& sample, const SolveConfig& cfg = {}) {
    const std::size_t n = sample.size();
    if (n == 0) throw std::invalid_argument("solve_saa: empty sample");
    const double nd = static_cast<double>(n);
    auto eval = [&](std::span<const double> x) {
        double acc = 0.0;
        std::vector<double> g(model.dim, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto xi = sample.scenario(i);
            acc += model.loss(x, xi);
            const auto gi = model.subgradient(x, xi);
            for (std::size_t j = 0; j < model.dim; ++j) g[j] += gi[j];
        }
        for (double& v : g) v /= nd;
        return std::pair<double, std::vector<double>>(acc / nd, std::move(g));
    };
    return detail::projected_subgradient(model, sample, eval, cfg);
}

/**
 * Robust counterpart: minimize the worst-case reweighted mean of the losses
 * over the divergence ball. Each step evaluates the inner problem at the
 * current iterate and forms the subgradient sum_i p*_i dloss(x; xi_i) from
 * the worst-case weights (a pointwise-supremum subgradient). The returned
 * `value` is the robust optimal value.
 */
inline Solution solve_robust(const LossModel& model, const Sample& sample,
                             const DivergenceSpec& spec, const UncertaintyBudget& budget,
                             const SolveConfig& cfg = {}) {
    const std::size_t n = sample.size();
    if (n == 0) throw std::invalid_argument("solve_robust: empty sample");
    if (budget.n != n) throw std::invalid_argument("solve_robust: budget size mismatch");
    const double nd = static_cast<double>(n);

    auto eval = [&](std::span<const double> x) {
        const auto z = loss_vector(model, x, sample);
        const auto inner = worst_case_mean(z, spec, budget, cfg.inner);
        std::vector<double> g(model.dim, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double w = inner.weights.empty() ? 1.0 / nd : inner.weights[i];
            if (w == 0.0) continue;
            const auto gi = model.subgradient(x, sample.scenario(i));
            for (std::size_t j = 0; j < model.dim; ++j) g[j] += w * gi[j];
        }
        return std::pair<double, std::vector<double>>(inner.value, std::move(g));
    };
    return detail::projected_subgradient(model, sample, eval, cfg);
}

/// Deviation (inclusion distance) sup_{x in a} inf_{y in b} ||x - y||_2.
inline double deviation_distance(const std::vector<std::vector<double>>& a,
                                 const std::vector<std::vector<double>>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("deviation_distance: empty set");
    double worst = 0.0;
    for (const auto& x : a) {
        double nearest = std::numeric_limits<double>::infinity();
        for (const auto& y : b) {
            if (x.size() != y.size())
                throw std::invalid_argument("deviation_distance: dimension mismatch");
            double acc = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
            nearest = std::min(nearest, std::sqrt(acc));
        }
        worst = std::max(worst, nearest);
    }
    return worst;
}

} // namespace dro
