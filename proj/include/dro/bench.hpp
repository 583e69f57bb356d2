#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "dro/datagen.hpp"
#include "dro/inference.hpp"
#include "dro/outer.hpp"
#include "dro/rng.hpp"

namespace dro {

/// Locale-independent formatting with six significant digits.
inline std::string format_sig6(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 6);
    return std::string(buf, res.ptr);
}

enum class Experiment { portfolio, cvar_normal, cvar_a3, cvar_a5, newsvendor };

inline const char* experiment_name(Experiment e) {
    switch (e) {
        case Experiment::portfolio: return "portfolio";
        case Experiment::cvar_normal: return "cvar-normal";
        case Experiment::cvar_a3: return "cvar-a3";
        case Experiment::cvar_a5: return "cvar-a5";
        case Experiment::newsvendor: return "newsvendor";
    }
    return "unknown";
}

inline std::string divergence_name(const DivergenceSpec& spec) {
    if (spec.el_limit()) return "el";
    if (spec.kl_limit()) return "kl";
    if (spec.is_chi2()) return "chi2";
    return "cressie-read-" + format_sig6(spec.k);
}

struct CoverageRow {
    std::string experiment;
    std::size_t n = 0;
    std::string method;
    double coverage = 0.0;
    double mean_lower = 0.0;
    double mean_upper = 0.0;
    double mean_width = 0.0;
    int replications = 0;
    std::uint64_t seed = 0;
};

struct ReplicationRecord {
    std::size_t n = 0;
    int replication = 0;
    std::string method;
    double lower = 0.0, upper = 0.0, truth = 0.0;
    bool covered = false;
};

struct CoverageReport {
    std::vector<CoverageRow> rows;
    std::vector<ReplicationRecord> records; ///< populated in debug mode
    int failures = 0;
};

struct BenchConfig {
    double alpha = 0.05;
    DivergenceSpec spec = DivergenceSpec::chi2();
    SolveConfig solve = [] {
        SolveConfig c;
        c.max_iters = 1200;
        return c;
    }();
    std::size_t dimension = 5;
    double portfolio_lo = -10.0, portfolio_hi = 10.0;
    double cvar_tail = 0.9;
    double newsvendor_radius = 10.0;
    std::size_t cvar_truth_n = 200000;    ///< scenarios behind the fixed-distribution truth
    std::size_t newsvendor_truth_n = 25000;
    /// budget for the per-instance ground-truth solves; their accuracy is
    /// limited by the truth sample itself, not by optimization error
    SolveConfig truth_solve = [] {
        SolveConfig c;
        c.max_iters = 600;
        return c;
    }();
    bool debug_records = false;
};

namespace detail {

/// Exact SAA optimum of the scalar CVaR objective: the piecewise-linear
/// sample objective kinks only at data points, so scan the sorted sample.
inline double cvar_saa_optimum(std::vector<double> data, double alpha_tail) {
    std::sort(data.begin(), data.end());
    const std::size_t n = data.size();
    const double scale = 1.0 / ((1.0 - alpha_tail) * static_cast<double>(n));
    std::vector<double> suffix(n + 1, 0.0);
    for (std::size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] + data[i];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        const double x = data[k];
        const double above = suffix[k + 1] - x * static_cast<double>(n - k - 1);
        best = std::min(best, x + above * scale);
    }
    return best;
}

struct ReplicationProblem {
    LossModel model;
    Sample sample;
    double truth = 0.0;
};

} // namespace detail

/**
 * Monte-Carlo coverage experiment: for each sample size and replication,
 * draws an instance and a sample, builds the two-sided robust interval and
 * the normal interval, and counts whether each contains the instance's
 * population optimum. Deterministic given (config, seed); the ground-truth
 * streams are disjoint from the replication streams.
 */
inline CoverageReport run_coverage_experiment(Experiment experiment,
                                              const std::vector<std::size_t>& n_grid,
                                              int replications, const BenchConfig& cfg,
                                              std::uint64_t seed) {
    if (replications < 1)
        throw std::invalid_argument("run_coverage_experiment: need replications >= 1");
    CoverageReport report;

    // fixed-distribution experiments share one large-sample truth
    double shared_truth = 0.0;
    const bool is_cvar = experiment == Experiment::cvar_normal ||
                         experiment == Experiment::cvar_a3 || experiment == Experiment::cvar_a5;
    if (is_cvar) {
        const CvarKind kind = experiment == Experiment::cvar_normal ? CvarKind::normal_mixture
                              : experiment == Experiment::cvar_a3  ? CvarKind::heavy_tail_a3
                                                                    : CvarKind::heavy_tail_a5;
        RngStream truth_rng(seed, stream_id_for(3, 0, 0));
        Sample big = draw_cvar_sample(kind, cfg.cvar_truth_n, truth_rng);
        shared_truth = detail::cvar_saa_optimum(std::move(big.data), cfg.cvar_tail);
    }

    auto make_problem = [&](std::size_t n_index, std::size_t n,
                            int rep) -> detail::ReplicationProblem {
        RngStream instance_rng(seed, stream_id_for(1, n_index, static_cast<std::uint64_t>(rep)));
        RngStream sample_rng(seed, stream_id_for(2, n_index, static_cast<std::uint64_t>(rep)));
        switch (experiment) {
            case Experiment::portfolio: {
                const auto inst = draw_portfolio_instance(cfg.dimension, cfg.portfolio_lo,
                                                          cfg.portfolio_hi, instance_rng);
                return {portfolio_model(cfg.dimension, cfg.portfolio_lo, cfg.portfolio_hi),
                        draw_portfolio_sample(inst, n, sample_rng), inst.true_optimum};
            }
            case Experiment::cvar_normal:
            case Experiment::cvar_a3:
            case Experiment::cvar_a5: {
                const CvarKind kind = experiment == Experiment::cvar_normal
                                          ? CvarKind::normal_mixture
                                      : experiment == Experiment::cvar_a3 ? CvarKind::heavy_tail_a3
                                                                          : CvarKind::heavy_tail_a5;
                return {cvar_model(cfg.cvar_tail), draw_cvar_sample(kind, n, sample_rng),
                        shared_truth};
            }
            case Experiment::newsvendor: {
                const auto inst = draw_newsvendor_instance(cfg.dimension, instance_rng);
                auto model = newsvendor_model(inst.b, inst.h, cfg.newsvendor_radius);
                RngStream truth_rng(seed,
                                    stream_id_for(3, n_index, static_cast<std::uint64_t>(rep)));
                const Sample big = draw_newsvendor_sample(inst, cfg.newsvendor_truth_n, truth_rng);
                const double truth = solve_saa(model, big, cfg.truth_solve).value;
                return {std::move(model), draw_newsvendor_sample(inst, n, sample_rng), truth};
            }
        }
        throw std::logic_error("run_coverage_experiment: unknown experiment");
    };

    for (std::size_t n_index = 0; n_index < n_grid.size(); ++n_index) {
        const std::size_t n = n_grid[n_index];
        struct Accum {
            int covered = 0, count = 0;
            double lower = 0.0, upper = 0.0, width = 0.0;
        } el, normal;
        for (int rep = 0; rep < replications; ++rep) {
            try {
                const auto problem = make_problem(n_index, n, rep);
                const auto ci_el =
                    two_sided_interval(problem.model, problem.sample, cfg.alpha, cfg.spec, cfg.solve);
                const auto ci_normal =
                    normal_interval(problem.model, problem.sample, cfg.alpha, cfg.solve);
                auto tally = [&](Accum& acc, const ConfidenceInterval& ci, const char* name) {
                    const bool covered = ci.lower <= problem.truth && problem.truth <= ci.upper;
                    acc.covered += covered ? 1 : 0;
                    acc.count += 1;
                    acc.lower += ci.lower;
                    acc.upper += ci.upper;
                    acc.width += ci.upper - ci.lower;
                    if (cfg.debug_records)
                        report.records.push_back(ReplicationRecord{n, rep, name, ci.lower, ci.upper,
                                                                   problem.truth, covered});
                };
                tally(el, ci_el, "el");
                tally(normal, ci_normal, "normal");
            } catch (const std::exception&) {
                ++report.failures;
            }
        }
        auto push_row = [&](const Accum& acc, const char* method) {
            if (acc.count == 0) return;
            const double cnt = static_cast<double>(acc.count);
            report.rows.push_back(CoverageRow{experiment_name(experiment), n, method,
                                              static_cast<double>(acc.covered) / cnt,
                                              acc.lower / cnt, acc.upper / cnt, acc.width / cnt,
                                              acc.count, seed});
        };
        push_row(el, "el");
        push_row(normal, "normal");
    }
    return report;
}

// ---------------------------------------------------------------------------
// Expansion study: realized sqrt(n)-scaled error of the variance expansion
// on uniform data, summarized by the median over replications.
// ---------------------------------------------------------------------------

struct ExpansionRow {
    std::string divergence;
    std::size_t n = 0;
    double median_residual = 0.0;
    int replications = 0;
    std::uint64_t seed = 0;
};

inline std::vector<ExpansionRow> run_expansion_study(const DivergenceSpec& spec,
                                                     const std::vector<std::size_t>& n_grid,
                                                     double rho, int replications,
                                                     std::uint64_t seed) {
    std::vector<ExpansionRow> rows;
    for (std::size_t n_index = 0; n_index < n_grid.size(); ++n_index) {
        const std::size_t n = n_grid[n_index];
        std::vector<double> residuals(static_cast<std::size_t>(replications));
        for (int rep = 0; rep < replications; ++rep) {
            RngStream rng(seed, stream_id_for(4, n_index, static_cast<std::uint64_t>(rep)));
            std::vector<double> z(n);
            for (double& v : z) v = rng.next_uniform();
            residuals[static_cast<std::size_t>(rep)] =
                expansion_residual(z, spec, UncertaintyBudget{rho, n});
        }
        std::sort(residuals.begin(), residuals.end());
        const double median = residuals.size() % 2 == 1
                                  ? residuals[residuals.size() / 2]
                                  : 0.5 * (residuals[residuals.size() / 2 - 1] +
                                           residuals[residuals.size() / 2]);
        rows.push_back(ExpansionRow{divergence_name(spec), n, median, replications, seed});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Consistency study: median distance between the robust empirical minimizer
// and the population optimum, across sample sizes.
// ---------------------------------------------------------------------------

enum class ConsistencyFamily { newsvendor_1d, cvar_normal };

inline const char* consistency_family_name(ConsistencyFamily family) {
    return family == ConsistencyFamily::newsvendor_1d ? "newsvendor-1d" : "cvar-normal";
}

struct ConsistencyRow {
    std::string family;
    std::size_t n = 0;
    double median_deviation = 0.0;
    int replications = 0;
    std::uint64_t seed = 0;
};

inline std::vector<ConsistencyRow> run_consistency_study(ConsistencyFamily family,
                                                         const std::vector<std::size_t>& n_grid,
                                                         int replications, std::uint64_t seed,
                                                         const BenchConfig& cfg = {}) {
    const double rho = chi_square_quantile(1, 1.0 - cfg.alpha);
    // population optima: symmetric-demand newsvendor with equal costs sits at
    // the median; the CVaR threshold is the tail quantile of the mixture
    double xstar = 0.0;
    if (family == ConsistencyFamily::cvar_normal) {
        double lo = -50.0, hi = 50.0;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (cvar_mixture_cdf(CvarKind::normal_mixture, mid) < cfg.cvar_tail)
                lo = mid;
            else
                hi = mid;
        }
        xstar = 0.5 * (lo + hi);
    }

    std::vector<ConsistencyRow> rows;
    for (std::size_t n_index = 0; n_index < n_grid.size(); ++n_index) {
        const std::size_t n = n_grid[n_index];
        std::vector<double> deviations(static_cast<std::size_t>(replications));
        for (int rep = 0; rep < replications; ++rep) {
            RngStream rng(seed, stream_id_for(5, n_index, static_cast<std::uint64_t>(rep)));
            Sample sample = family == ConsistencyFamily::newsvendor_1d
                                ? [&] {
                                      std::vector<double> data(n);
                                      for (double& v : data) v = rng.next_gaussian();
                                      return Sample(std::move(data));
                                  }()
                                : draw_cvar_sample(CvarKind::normal_mixture, n, rng);
            LossModel model = family == ConsistencyFamily::newsvendor_1d
                                  ? newsvendor_model({1.0}, {1.0}, cfg.newsvendor_radius)
                                  : cvar_model(cfg.cvar_tail);
            const auto sol =
                solve_robust(model, sample, cfg.spec, UncertaintyBudget{rho, n}, cfg.solve);
            deviations[static_cast<std::size_t>(rep)] =
                deviation_distance({sol.x}, {{xstar}});
        }
        std::sort(deviations.begin(), deviations.end());
        const double median = deviations.size() % 2 == 1
                                  ? deviations[deviations.size() / 2]
                                  : 0.5 * (deviations[deviations.size() / 2 - 1] +
                                           deviations[deviations.size() / 2]);
        rows.push_back(ConsistencyRow{consistency_family_name(family), n, median, replications,
                                      seed});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// CSV persistence: UTF-8, LF line endings, six significant digits,
// byte-stable for identical reports.
// ---------------------------------------------------------------------------

namespace detail {
inline std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}
} // namespace detail

inline void write_csv(const CoverageReport& report, const std::string& path) {
    auto out = detail::open_csv(path);
    out << "experiment,n,method,coverage,mean_lower,mean_upper,mean_width,replications,seed\n";
    for (const auto& row : report.rows) {
        out << row.experiment << ',' << row.n << ',' << row.method << ','
            << format_sig6(row.coverage) << ',' << format_sig6(row.mean_lower) << ','
            << format_sig6(row.mean_upper) << ',' << format_sig6(row.mean_width) << ','
            << row.replications << ',' << row.seed << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline void write_debug_csv(const CoverageReport& report, const std::string& path) {
    auto out = detail::open_csv(path);
    out << "n,replication,method,lower,upper,truth,covered\n";
    for (const auto& rec : report.records) {
        out << rec.n << ',' << rec.replication << ',' << rec.method << ','
            << format_sig6(rec.lower) << ',' << format_sig6(rec.upper) << ','
            << format_sig6(rec.truth) << ',' << (rec.covered ? 1 : 0) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline void write_expansion_csv(const std::vector<ExpansionRow>& rows, const std::string& path) {
    auto out = detail::open_csv(path);
    out << "divergence,n,median_sqrt_n_residual,replications,seed\n";
    for (const auto& row : rows) {
        out << row.divergence << ',' << row.n << ',' << format_sig6(row.median_residual) << ','
            << row.replications << ',' << row.seed << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline void write_consistency_csv(const std::vector<ConsistencyRow>& rows,
                                  const std::string& path) {
    auto out = detail::open_csv(path);
    out << "family,n,median_deviation,replications,seed\n";
    for (const auto& row : rows) {
        out << row.family << ',' << row.n << ',' << format_sig6(row.median_deviation) << ','
            << row.replications << ',' << row.seed << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

} // namespace dro
