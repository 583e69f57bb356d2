#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "dro/divergence.hpp"
#include "dro/stats.hpp"

namespace dro {

/// Size of the divergence ball { P << P_n : D_f(P || P_n) <= rho / n }.
struct UncertaintyBudget {
    double rho = 0.0;
    std::size_t n = 0;

    double radius() const { return rho / static_cast<double>(n); }
};

/**
 * Result of a worst-case (or best-case) mean evaluation over the ball.
 *
 * `weights` holds the extremal primal distribution when a certificate was
 * recovered (always feasible: nonnegative, sums to one, divergence within the
 * ball up to 1e-9). `expansion_value` is the first-order approximation
 * mean +/- sqrt(rho s^2 / n) and `residual` the realized sqrt(n)-scaled gap
 * between the exact value and that approximation.
 */
struct RobustEvaluation {
    double value = 0.0;
    double lambda = 0.0;
    double eta = 0.0;
    std::vector<double> weights;
    double expansion_value = 0.0;
    double residual = 0.0;
};

struct InnerConfig {
    double objective_tol = 1e-8; ///< scaled by 1 + |sample mean|
    int max_bisect_iters = 60;   ///< inner eta search
    int max_golden_iters = 80;   ///< outer lambda / eta searches
    bool recover_weights = true;
};

namespace detail {

inline void validate_loss_vector(std::span<const double> z, const UncertaintyBudget& budget) {
    if (z.empty()) throw std::invalid_argument("inner: empty loss vector");
    if (budget.n != z.size())
        throw std::invalid_argument("inner: budget sample size does not match loss vector");
    if (!(budget.rho >= 0.0)) throw std::invalid_argument("inner: rho must be nonnegative");
    for (double v : z)
        if (!std::isfinite(v)) throw std::domain_error("inner: non-finite loss value");
}

inline RobustEvaluation degenerate_evaluation(double mean, std::size_t n) {
    RobustEvaluation out;
    out.value = mean;
    out.lambda = 0.0;
    out.eta = mean;
    out.weights.assign(n, 1.0 / static_cast<double>(n));
    out.expansion_value = mean;
    out.residual = 0.0;
    return out;
}

/// Divergence of a weight vector relative to the uniform distribution,
/// D_f(p || 1/n) = (1/n) sum_i f(n p_i).
inline double divergence_of_weights(const DivergenceSpec& spec, std::span<const double> p) {
    const double n = static_cast<double>(p.size());
    double acc = 0.0;
    for (double pi : p) acc += f_value(spec, n * pi);
    return acc / n;
}

/// Normalizes a nonnegative weight vector and, if it falls outside the ball,
/// shrinks it toward uniform until the divergence constraint holds.
inline std::vector<double> feasible_weights(const DivergenceSpec& spec,
                                            std::vector<double> w,
                                            const UncertaintyBudget& budget) {
    const std::size_t n = w.size();
    double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(total > 0.0) || !std::isfinite(total)) return {};
    for (double& v : w) v /= total;
    const double target = budget.radius() * (1.0 + 1e-10) + 1e-15;
    if (divergence_of_weights(spec, w) <= target) return w;
    const double unif = 1.0 / static_cast<double>(n);
    double lo = 0.0, hi = 1.0; // blend parameter toward uniform
    std::vector<double> blend(n);
    for (int iter = 0; iter < 80; ++iter) {
        const double t = 0.5 * (lo + hi);
        for (std::size_t i = 0; i < n; ++i) blend[i] = (1.0 - t) * w[i] + t * unif;
        if (divergence_of_weights(spec, blend) <= target)
            hi = t;
        else
            lo = t;
    }
    for (std::size_t i = 0; i < n; ++i) blend[i] = (1.0 - hi) * w[i] + hi * unif;
    return blend;
}

struct VectorSummary {
    double mean, var, min, max;
};

inline VectorSummary summarize(std::span<const double> z) {
    auto [mean, var] = sample_mean_variance(z);
    auto [mn, mx] = std::minmax_element(z.begin(), z.end());
    return {mean, var, *mn, *mx};
}

} // namespace detail

/**
 * Worst-case mean by the dual program
 *
 *   inf_{lambda >= 0, eta}  (1/n) sum_i lambda f*((z_i - eta) / lambda)
 *                           + (rho/n) lambda + eta,
 *
 * solved by golden section on lambda (bracket grown geometrically around the
 * stationary scale s sqrt(n/rho)) with bisection on the eta subgradient
 * inside. The lambda -> 0 boundary is treated through its lower
 * semicontinuous limit, which equals max z.
 */
inline RobustEvaluation worst_case_mean_dual(std::span<const double> z,
                                             const DivergenceSpec& spec,
                                             const UncertaintyBudget& budget,
                                             const InnerConfig& cfg = {}) {
    detail::validate_loss_vector(z, budget);
    const auto s = detail::summarize(z);
    const std::size_t n = z.size();
    const double nd = static_cast<double>(n);
    const double inf = std::numeric_limits<double>::infinity();

    RobustEvaluation out;
    out.expansion_value = s.mean + std::sqrt(budget.rho * s.var / nd);
    if (budget.rho == 0.0 || s.var <= 0.0) {
        out = detail::degenerate_evaluation(s.mean, n);
        return out;
    }

    const double range = s.max - s.min;

    // domain floor for eta at fixed lambda (conjugate finite only above it)
    auto eta_floor = [&](double lam) -> double {
        if (spec.el_limit()) return s.max - 2.0 * lam;
        if (spec.k < 1.0 && !spec.kl_limit()) return s.max - 2.0 * lam / (1.0 - spec.k);
        return -inf;
    };

    auto eta_subgradient = [&](double lam, double eta) {
        double acc = 0.0;
        for (double zi : z) {
            const double d = f_conjugate_derivative(spec, (zi - eta) / lam);
            if (d == inf) return -inf;
            acc += d;
        }
        return 1.0 - acc / nd;
    };

    auto dual_objective = [&](double lam, double eta) {
        double acc = 0.0;
        for (double zi : z) {
            const double v = f_conjugate(spec, (zi - eta) / lam);
            if (v == inf) return inf;
            acc += v;
        }
        return lam * acc / nd + eta + budget.radius() * lam;
    };

    // inner minimization over eta: the subgradient is nondecreasing and
    // nonnegative at eta = max z, so bisection applies
    auto inner_min = [&](double lam) {
        double hi = s.max;
        double lo;
        const double floor = eta_floor(lam);
        if (std::isfinite(floor)) {
            lo = floor + std::max(1e-14 * (1.0 + std::abs(floor)), 1e-300);
        } else {
            lo = s.min - range - 1.0;
            int guard = 0;
            while (eta_subgradient(lam, lo) >= 0.0 && guard++ < 200)
                lo = s.max - 2.0 * (s.max - lo);
        }
        for (int i = 0; i < cfg.max_bisect_iters && (hi - lo) > 1e-14 * (1.0 + range); ++i) {
            const double mid = 0.5 * (lo + hi);
            if (eta_subgradient(lam, mid) < 0.0)
                lo = mid;
            else
                hi = mid;
        }
        const double eta = 0.5 * (lo + hi);
        double val = dual_objective(lam, eta);
        if (val == inf) val = dual_objective(lam, hi);
        return std::pair<double, double>(val, eta);
    };

    // geometric bracket for lambda around the smooth-regime stationary scale
    const double lam_center = std::max(std::sqrt(s.var * nd / budget.rho), 1e-12 * (1.0 + std::abs(s.mean)));
    double best_val = inf, best_lam = lam_center, best_eta = s.max;
    auto probe = [&](double lam) {
        auto [val, eta] = inner_min(lam);
        if (val < best_val) {
            best_val = val;
            best_lam = lam;
            best_eta = eta;
        }
        return val;
    };

    int lo_exp = -10, hi_exp = 5;
    std::vector<std::pair<double, double>> grid; // (lambda, value)
    for (int e = lo_exp; e <= hi_exp; ++e) {
        const double lam = lam_center * std::ldexp(1.0, e);
        grid.emplace_back(lam, probe(lam));
    }
    auto argmin_at_edge = [&]() {
        auto it = std::min_element(grid.begin(), grid.end(),
                                   [](auto& a, auto& b) { return a.second < b.second; });
        return std::distance(grid.begin(), it);
    };
    int guard = 0;
    while (guard++ < 30) {
        const auto pos = argmin_at_edge();
        if (pos == 0) {
            --lo_exp;
            const double lam = lam_center * std::ldexp(1.0, lo_exp);
            grid.insert(grid.begin(), {lam, probe(lam)});
        } else if (pos == static_cast<long>(grid.size()) - 1) {
            ++hi_exp;
            const double lam = lam_center * std::ldexp(1.0, hi_exp);
            grid.emplace_back(lam, probe(lam));
        } else {
            break;
        }
    }

    const auto pos = argmin_at_edge();
    double a = grid[std::max<long>(pos - 1, 0)].first;
    double b = grid[std::min<long>(pos + 1, grid.size() - 1)].first;
    const double inv_phi = 0.6180339887498949;
    const double obj_tol = cfg.objective_tol * (1.0 + std::abs(s.mean));
    double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
    double v1 = probe(x1), v2 = probe(x2);
    for (int i = 0; i < cfg.max_golden_iters && (b - a) > 1e-12 * lam_center; ++i) {
        if (std::abs(v1 - v2) <= 0.01 * obj_tol && (b - a) <= 1e-3 * lam_center) break;
        if (v1 < v2) {
            b = x2;
            x2 = x1;
            v2 = v1;
            x1 = b - inv_phi * (b - a);
            v1 = probe(x1);
        } else {
            a = x1;
            x1 = x2;
            v1 = v2;
            x2 = a + inv_phi * (b - a);
            v2 = probe(x2);
        }
    }

    // lambda -> 0 boundary: the objective's lsc limit is max z, which is the
    // supremum whenever the point mass on the maximizer is feasible
    double value = best_val;
    double lam_star = best_lam, eta_star = best_eta;
    if (s.max < value) {
        value = s.max;
        lam_star = 0.0;
        eta_star = s.max;
    }
    value = std::clamp(value, s.mean, s.max);

    out.value = value;
    out.lambda = lam_star;
    out.eta = eta_star;
    out.residual = std::sqrt(nd) * std::abs(out.value - out.expansion_value);

    if (cfg.recover_weights) {
        if (lam_star == 0.0) {
            // certificate exists only if the point mass itself is feasible
            std::vector<double> point(n, 0.0);
            point[static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin())] = 1.0;
            if (detail::divergence_of_weights(spec, point) <= budget.radius() * (1.0 + 1e-10) + 1e-15)
                out.weights = std::move(point);
        } else {
            std::vector<double> w(n);
            bool ok = true;
            for (std::size_t i = 0; i < n; ++i) {
                w[i] = f_conjugate_derivative(spec, (z[i] - eta_star) / lam_star);
                if (!std::isfinite(w[i])) {
                    ok = false;
                    break;
                }
            }
            if (ok) out.weights = detail::feasible_weights(spec, std::move(w), budget);
        }
    }
    return out;
}

/**
 * Exact worst-case mean for the chi-square index (k = 2), where the ball is
 * { p in simplex : ||n p - 1||_2^2 <= rho }.
 *
 * If the Cauchy-Schwarz maximizer p_i = 1/n + (z_i - mean) sqrt(rho) /
 * (n^{3/2} s) is already nonnegative the value is exactly
 * mean + sqrt(rho s^2 / n). Otherwise the active set of zero weights is found
 * by scanning KKT candidates over the sorted losses (water-filling).
 */
inline RobustEvaluation worst_case_mean_chi2_exact(std::span<const double> z,
                                                   const UncertaintyBudget& budget) {
    detail::validate_loss_vector(z, budget);
    const auto s = detail::summarize(z);
    const std::size_t n = z.size();
    const double nd = static_cast<double>(n);

    RobustEvaluation out;
    out.expansion_value = s.mean + std::sqrt(budget.rho * s.var / nd);
    if (budget.rho == 0.0 || s.var <= 0.0) {
        out = detail::degenerate_evaluation(s.mean, n);
        return out;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] > z[b]; });

    std::vector<double> sum1(n + 1, 0.0), sum2(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        sum1[i + 1] = sum1[i] + z[order[i]];
        sum2[i + 1] = sum2[i] + z[order[i]] * z[order[i]];
    }

    const double slack = 1e-12 * (1.0 + std::abs(s.max) + std::abs(s.min));
    for (std::size_t m = n; m >= 1; --m) {
        const double md = static_cast<double>(m);
        const double inactive = nd - md;
        const double denom = budget.rho - inactive * nd / md;
        if (denom <= 0.0) break; // shrinks further for smaller active sets
        const double mean_a = sum1[m] / md;
        double var_a = sum2[m] / md - mean_a * mean_a;
        if (var_a < 0.0) var_a = 0.0;
        if (var_a <= 1e-30 * (1.0 + mean_a * mean_a)) {
            // the top block is tied at max z, which the ball can reach exactly
            out.value = s.max;
            out.lambda = 0.0;
            out.eta = s.max;
            out.weights.assign(n, 0.0);
            for (std::size_t i = 0; i < m; ++i) out.weights[order[i]] = 1.0 / md;
            out.residual = std::sqrt(nd) * std::abs(out.value - out.expansion_value);
            return out;
        }
        const double c = std::sqrt(md * var_a / denom);
        const double nu = mean_a - c * inactive / md;
        const double tau = nu - c;
        const bool active_ok = z[order[m - 1]] > tau - slack;
        const bool inactive_ok = (m == n) || z[order[m]] <= tau + slack;
        if (!active_ok || !inactive_ok) continue;

        out.weights.assign(n, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double w = (1.0 + (z[order[i]] - nu) / c) / nd;
            out.weights[order[i]] = std::max(w, 0.0);
        }
        double total = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
        for (double& w : out.weights) w /= total;
        out.value = (m == n) ? s.mean + std::sqrt(budget.rho * s.var / nd)
                             : (sum1[m] + (sum2[m] - nu * sum1[m]) / c) / nd;
        out.lambda = 0.5 * c;
        out.eta = nu;
        out.residual = std::sqrt(nd) * std::abs(out.value - out.expansion_value);
        return out;
    }

    // the ball contains the point mass on the maximizer
    out.value = s.max;
    out.lambda = 0.0;
    out.eta = s.max;
    out.weights.assign(n, 0.0);
    out.weights[static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin())] = 1.0;
    out.residual = std::sqrt(nd) * std::abs(out.value - out.expansion_value);
    return out;
}

/**
 * Worst-case mean for Cressie-Read indices k > 1 by the one-dimensional
 * closed form
 *
 *   inf_eta (1 + k (k-1) rho / (2n))^{1/k}
 *           ((1/n) sum_i (z_i - eta)_+^{k*})^{1/k*} + eta,
 *
 * minimized by golden section over eta. Agrees with the dual program.
 */
inline RobustEvaluation worst_case_mean_cressie_read(std::span<const double> z, double k,
                                                     const UncertaintyBudget& budget,
                                                     const InnerConfig& cfg = {}) {
    if (!(k > 1.0)) throw std::invalid_argument("worst_case_mean_cressie_read: need k > 1");
    detail::validate_loss_vector(z, budget);
    const DivergenceSpec spec = DivergenceSpec::cressie_read(k);
    const auto s = detail::summarize(z);
    const std::size_t n = z.size();
    const double nd = static_cast<double>(n);

    RobustEvaluation out;
    out.expansion_value = s.mean + std::sqrt(budget.rho * s.var / nd);
    if (budget.rho == 0.0 || s.var <= 0.0) {
        out = detail::degenerate_evaluation(s.mean, n);
        return out;
    }

    const double kstar = k / (k - 1.0);
    const double coeff = std::pow(1.0 + k * (k - 1.0) * budget.rho / (2.0 * nd), 1.0 / k);
    const double range = s.max - s.min;

    auto hinge_moment = [&](double eta, double power) {
        double acc = 0.0;
        for (double zi : z) {
            const double h = zi - eta;
            if (h > 0.0) acc += std::pow(h, power);
        }
        return acc / nd;
    };
    auto objective = [&](double eta) {
        const double mom = hinge_moment(eta, kstar);
        return coeff * std::pow(mom, 1.0 / kstar) + eta;
    };
    auto derivative = [&](double eta) {
        const double mom = hinge_moment(eta, kstar);
        if (mom <= 0.0) return 1.0;
        return 1.0 - coeff * std::pow(mom, 1.0 / kstar - 1.0) * hinge_moment(eta, kstar - 1.0);
    };

    double hi = s.max;
    double lo = s.min - range - 1.0;
    int guard = 0;
    while (derivative(lo) >= 0.0 && guard++ < 200) lo = s.max - 2.0 * (s.max - lo);

    const double inv_phi = 0.6180339887498949;
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double v1 = objective(x1), v2 = objective(x2);
    for (int i = 0; i < cfg.max_golden_iters * 2 && (hi - lo) > 1e-13 * (1.0 + range); ++i) {
        if (v1 < v2) {
            hi = x2;
            x2 = x1;
            v2 = v1;
            x1 = hi - inv_phi * (hi - lo);
            v1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            v1 = v2;
            x2 = lo + inv_phi * (hi - lo);
            v2 = objective(x2);
        }
    }
    const double eta_star = 0.5 * (lo + hi);
    out.value = std::clamp(objective(eta_star), s.mean, s.max);

    // dual pairing: optimal lambda from the stationarity condition, weights
    // proportional to (z - eta)_+^{k* - 1}
    const double mom = hinge_moment(eta_star, kstar);
    const double b_coeff = budget.radius() + 2.0 / (k * (k - 1.0));
    const double a_coeff = (2.0 / k) * std::pow(0.5 * (k - 1.0), kstar) * mom;
    const double lam = std::pow(a_coeff * (kstar - 1.0) / b_coeff, 1.0 / kstar);
    out.lambda = lam;
    out.eta = eta_star + 2.0 * lam / (k - 1.0);
    if (cfg.recover_weights && mom > 0.0) {
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double h = z[i] - eta_star;
            w[i] = h > 0.0 ? std::pow(h, kstar - 1.0) : 0.0;
        }
        out.weights = detail::feasible_weights(spec, std::move(w), budget);
    }
    out.residual = std::sqrt(nd) * std::abs(out.value - out.expansion_value);
    return out;
}

/// Worst-case mean dispatcher: exact water-filling for the chi-square index,
/// the general dual program otherwise.
inline RobustEvaluation worst_case_mean(std::span<const double> z, const DivergenceSpec& spec,
                                        const UncertaintyBudget& budget,
                                        const InnerConfig& cfg = {}) {
    if (spec.is_chi2()) return worst_case_mean_chi2_exact(z, budget);
    return worst_case_mean_dual(z, spec, budget, cfg);
}

/// Best-case (infimum) mean over the ball: -(worst case of -z), with the
/// certificates carried over (eta negated, weights unchanged).
inline RobustEvaluation best_case_mean(std::span<const double> z, const DivergenceSpec& spec,
                                       const UncertaintyBudget& budget,
                                       const InnerConfig& cfg = {}) {
    std::vector<double> neg(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) neg[i] = -z[i];
    RobustEvaluation inner = worst_case_mean(neg, spec, budget, cfg);
    const auto s = detail::summarize(z);
    RobustEvaluation out;
    out.value = -inner.value;
    out.lambda = inner.lambda;
    out.eta = -inner.eta;
    out.weights = std::move(inner.weights);
    out.expansion_value = s.mean - std::sqrt(budget.rho * s.var / static_cast<double>(z.size()));
    out.residual = std::sqrt(static_cast<double>(z.size())) * std::abs(out.value - out.expansion_value);
    return out;
}

/// Realized sqrt(n)-scaled error of the variance expansion at this sample.
inline double expansion_residual(std::span<const double> z, const DivergenceSpec& spec,
                                 const UncertaintyBudget& budget, const InnerConfig& cfg = {}) {
    if (z.size() < 2) throw std::invalid_argument("expansion_residual: need n >= 2");
    return worst_case_mean(z, spec, budget, cfg).residual;
}

/// l2 distance of the reweighting from uniform, ||n p - 1||_2.
inline double weight_norm_diagnostic(std::span<const double> weights) {
    const double n = static_cast<double>(weights.size());
    double acc = 0.0;
    for (double p : weights) {
        const double d = n * p - 1.0;
        acc += d * d;
    }
    return std::sqrt(acc);
}

/// Upper bound sqrt(rho C_f) for the diagnostic above over the feasible ball.
inline double weight_norm_bound(const DivergenceSpec& spec, double rho) {
    return std::sqrt(rho * weight_norm_constant(spec, rho));
}

} // namespace dro
