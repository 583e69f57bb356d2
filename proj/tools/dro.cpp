// Command-line front end for the distributionally robust inference toolkit.
//
// Subcommands: interval, solve, coverage, expansion, sectioning.
// Exit codes: 0 ok, 2 usage or input error, 3 solver non-convergence.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dro/dro.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNoConvergence = 3;

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

double parse_double_token(const std::string& token, const std::string& context) {
    double value = 0.0;
    const char* begin = token.data();
    const char* end = token.data() + token.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t' || *(end - 1) == '\r')) --end;
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{} || res.ptr != end)
        throw InputError("cannot parse number '" + token + "' in " + context);
    return value;
}

/// Scenario CSV: one scenario per row, columns are coordinates, no header
/// unless skip_header is set.
dro::Sample read_scenarios(const std::string& path, bool skip_header) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open scenario file: " + path);
    std::vector<double> flat;
    std::size_t dim = 0, row_index = 0;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first && skip_header) {
            first = false;
            continue;
        }
        first = false;
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t cols = 0;
        while (std::getline(ss, cell, ',')) {
            flat.push_back(parse_double_token(cell, path + ":" + std::to_string(row_index + 1)));
            ++cols;
        }
        if (dim == 0)
            dim = cols;
        else if (cols != dim)
            throw InputError("ragged row in " + path + " at line " + std::to_string(row_index + 1));
        ++row_index;
    }
    if (flat.empty()) throw InputError("no scenarios in " + path);
    return dro::Sample(dim, std::move(flat));
}

dro::DivergenceSpec parse_divergence(const std::string& k_text) {
    if (k_text == "el") return dro::DivergenceSpec::empirical_likelihood();
    if (k_text == "kl") return dro::DivergenceSpec::kl();
    if (k_text == "chi2") return dro::DivergenceSpec::chi2();
    return dro::DivergenceSpec::cressie_read(parse_double_token(k_text, "--k"));
}

std::vector<double> parse_cost_list(const std::string& text, std::size_t d) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) values.push_back(parse_double_token(cell, "cost list"));
    if (values.size() == 1) values.assign(d, values[0]);
    if (values.size() != d)
        throw InputError("cost list needs 1 or d entries, got " + std::to_string(values.size()));
    return values;
}

struct ProblemOptions {
    std::string name = "portfolio";
    double lo = -10.0, hi = 10.0; // portfolio box
    double tail = 0.9;            // cvar level
    std::string b_text = "1", h_text = "1";
    double radius = 10.0; // newsvendor l1 budget
};

dro::LossModel build_model(const ProblemOptions& opt, std::size_t dim) {
    if (opt.name == "portfolio") return dro::portfolio_model(dim, opt.lo, opt.hi);
    if (opt.name == "cvar") {
        if (dim != 1) throw InputError("cvar expects one-column scenarios");
        return dro::cvar_model(opt.tail);
    }
    if (opt.name == "newsvendor")
        return dro::newsvendor_model(parse_cost_list(opt.b_text, dim),
                                     parse_cost_list(opt.h_text, dim), opt.radius);
    throw InputError("unknown problem: " + opt.name);
}

void print_interval_line(const char* method, double lower, double upper, double rho,
                         std::size_t n) {
    std::printf("%s,%s,%s,%s,%zu\n", method, dro::format_sig6(lower).c_str(),
                dro::format_sig6(upper).c_str(), dro::format_sig6(rho).c_str(), n);
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
    std::vector<std::size_t> values;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const double v = parse_double_token(cell, "--n");
        if (v < 1.0) throw InputError("sample sizes must be positive");
        values.push_back(static_cast<std::size_t>(v));
    }
    if (values.empty()) throw InputError("empty sample-size list");
    return values;
}

int run_interval(const std::string& in_path, bool skip_header, const ProblemOptions& problem,
                 const std::string& k_text, double alpha, double rho, bool rho_given,
                 const dro::SolveConfig& solve_cfg) {
    const auto sample = read_scenarios(in_path, skip_header);
    const auto spec = parse_divergence(k_text);
    const auto model = build_model(problem, sample.dim);
    const std::size_t n = sample.size();

    const double rho_two = rho_given ? rho : dro::chi_square_quantile(1, 1.0 - alpha);
    const double rho_one = rho_given ? rho : dro::chi_square_quantile(1, 1.0 - 2.0 * alpha);
    const double alpha_eff = rho_given ? 1.0 - dro::chi_square_cdf(1, rho) : alpha;

    std::fprintf(stderr, "# interval problem=%s k=%s alpha=%s rho=%s n=%zu file=%s\n",
                 problem.name.c_str(), k_text.c_str(), dro::format_sig6(alpha_eff).c_str(),
                 dro::format_sig6(rho_two).c_str(), n, in_path.c_str());

    const dro::Solution saa = dro::solve_saa(model, sample, solve_cfg);
    const auto losses = dro::loss_vector(model, saa.x, sample);
    const auto lower_eval =
        dro::best_case_mean(losses, spec, dro::UncertaintyBudget{rho_two, n}, solve_cfg.inner);
    const dro::Solution robust_two =
        dro::solve_robust(model, sample, spec, dro::UncertaintyBudget{rho_two, n}, solve_cfg);
    const dro::Solution robust_one =
        rho_given ? robust_two
                  : dro::solve_robust(model, sample, spec, dro::UncertaintyBudget{rho_one, n},
                                      solve_cfg);
    if (!saa.converged || !robust_two.converged || !robust_one.converged) {
        std::fprintf(stderr, "solver failed to converge within the iteration budget\n");
        return kExitNoConvergence;
    }

    auto [mean, var] = dro::sample_mean_variance(losses);
    (void)mean;
    const double half = dro::normal_quantile(1.0 - 0.5 * alpha_eff) *
                        std::sqrt(var / static_cast<double>(n));

    print_interval_line("el-two-sided", lower_eval.value, robust_two.value, rho_two, n);
    print_interval_line("el-one-sided-upper", -std::numeric_limits<double>::infinity(),
                        robust_one.value, rho_one, n);
    print_interval_line("normal", saa.value - half, saa.value + half, 0.0, n);
    return kExitOk;
}

int run_solve(const std::string& in_path, bool skip_header, const ProblemOptions& problem,
              const std::string& k_text, double alpha, double rho, bool rho_given,
              const dro::SolveConfig& solve_cfg) {
    const auto sample = read_scenarios(in_path, skip_header);
    const auto spec = parse_divergence(k_text);
    const auto model = build_model(problem, sample.dim);
    const std::size_t n = sample.size();
    const double rho_used = rho_given ? rho : dro::chi_square_quantile(1, 1.0 - alpha);

    std::fprintf(stderr, "# solve problem=%s k=%s rho=%s n=%zu file=%s\n", problem.name.c_str(),
                 k_text.c_str(), dro::format_sig6(rho_used).c_str(), n, in_path.c_str());

    const auto saa = dro::solve_saa(model, sample, solve_cfg);
    const auto robust =
        dro::solve_robust(model, sample, spec, dro::UncertaintyBudget{rho_used, n}, solve_cfg);
    if (!saa.converged || !robust.converged) {
        std::fprintf(stderr, "solver failed to converge within the iteration budget\n");
        return kExitNoConvergence;
    }
    std::printf("saa,%s,%d,%d\n", dro::format_sig6(saa.value).c_str(), saa.iterations,
                saa.converged ? 1 : 0);
    std::printf("robust,%s,%d,%d\n", dro::format_sig6(robust.value).c_str(), robust.iterations,
                robust.converged ? 1 : 0);
    std::printf("x_saa");
    for (double v : saa.x) std::printf(",%s", dro::format_sig6(v).c_str());
    std::printf("\nx_robust");
    for (double v : robust.x) std::printf(",%s", dro::format_sig6(v).c_str());
    std::printf("\n");
    return kExitOk;
}

int run_sectioning(const std::string& in_path, bool skip_header, const ProblemOptions& problem,
                   const std::string& k_text, double alpha, std::size_t sections,
                   const std::string& radius_mode, const dro::SolveConfig& solve_cfg) {
    const auto sample = read_scenarios(in_path, skip_header);
    const auto spec = parse_divergence(k_text);
    const auto model = build_model(problem, sample.dim);

    dro::SectioningConfig section_cfg;
    if (radius_mode == "full")
        section_cfg.radius = dro::SectioningConfig::BlockRadius::full_sample;
    else if (radius_mode != "block")
        throw InputError("--block-radius must be 'block' or 'full'");

    std::fprintf(stderr, "# sectioning problem=%s k=%s alpha=%s sections=%zu radius=%s n=%zu\n",
                 problem.name.c_str(), k_text.c_str(), dro::format_sig6(alpha).c_str(), sections,
                 radius_mode.c_str(), sample.size());

    const auto [ci, stats] =
        dro::sectioned_upper_bound(model, sample, sections, alpha, spec, solve_cfg, section_cfg);
    print_interval_line("sectioned", ci.lower, ci.upper, ci.rho_used, sample.size());
    std::printf("sections,%zu\n", stats.sections);
    std::printf("block_length,%zu\n", stats.block_length);
    std::printf("block_mean,%s\n", dro::format_sig6(stats.mean).c_str());
    std::printf("block_spread,%s\n", dro::format_sig6(stats.spread).c_str());
    std::printf("pivot_correction,%s\n", dro::format_sig6(stats.pivot_correction).c_str());
    for (std::size_t j = 0; j < stats.block_upper_bounds.size(); ++j)
        std::printf("block_upper,%zu,%s\n", j + 1,
                    dro::format_sig6(stats.block_upper_bounds[j]).c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"distributionally robust optimization and inference toolkit"};
    app.require_subcommand(1);

    // shared options, bound per subcommand below
    ProblemOptions problem;
    std::string k_text = "2";
    std::string in_path, out_path, debug_out;
    bool skip_header = false;
    double alpha = 0.05, rho = 0.0;
    std::string n_list = "1000";
    int reps = 100;
    std::uint64_t seed = 1;
    std::size_t sections = 4;
    std::size_t dimension = 5;
    std::string experiment = "portfolio";
    std::string radius_mode = "block";
    int max_iters = 0;

    auto add_common_problem = [&](CLI::App* cmd) {
        cmd->add_option("--problem", problem.name, "portfolio | cvar | newsvendor");
        cmd->add_option("--lo", problem.lo, "portfolio lower bound");
        cmd->add_option("--hi", problem.hi, "portfolio upper bound");
        cmd->add_option("--tail", problem.tail, "cvar tail level");
        cmd->add_option("--b", problem.b_text, "newsvendor backorder costs (scalar or list)");
        cmd->add_option("--h-cost", problem.h_text, "newsvendor holding costs (scalar or list)");
        cmd->add_option("--radius", problem.radius, "newsvendor l1 budget");
        cmd->add_option("--in", in_path, "scenario CSV path")->required();
        cmd->add_flag("--skip-header", skip_header, "skip the first CSV line");
        cmd->add_option("--k", k_text, "divergence index: real number, el, kl, or chi2");
        cmd->add_option("--max-iters", max_iters, "solver iteration budget");
    };

    auto* interval_cmd = app.add_subcommand("interval", "confidence intervals from a scenario file");
    add_common_problem(interval_cmd);
    auto* ia = interval_cmd->add_option("--alpha", alpha, "nominal miscoverage");
    auto* ir = interval_cmd->add_option("--rho", rho, "explicit ball size (overrides alpha)");
    ia->excludes(ir);
    ir->excludes(ia);

    auto* solve_cmd = app.add_subcommand("solve", "SAA and robust optimal values");
    add_common_problem(solve_cmd);
    auto* sa = solve_cmd->add_option("--alpha", alpha, "nominal miscoverage");
    auto* sr = solve_cmd->add_option("--rho", rho, "explicit ball size (overrides alpha)");
    sa->excludes(sr);
    sr->excludes(sa);

    auto* coverage_cmd = app.add_subcommand("coverage", "Monte-Carlo coverage experiment");
    coverage_cmd->add_option("--experiment", experiment,
                             "portfolio | cvar-normal | cvar-a3 | cvar-a5 | newsvendor");
    coverage_cmd->add_option("--n", n_list, "comma-separated sample sizes");
    coverage_cmd->add_option("--reps", reps, "replications per sample size");
    coverage_cmd->add_option("--alpha", alpha, "nominal miscoverage");
    coverage_cmd->add_option("--seed", seed, "master seed");
    coverage_cmd->add_option("--d", dimension, "decision dimension");
    coverage_cmd->add_option("--k", k_text, "divergence index");
    coverage_cmd->add_option("--out", out_path, "coverage CSV path")->required();
    coverage_cmd->add_option("--debug-out", debug_out, "per-replication CSV path");
    coverage_cmd->add_option("--max-iters", max_iters, "solver iteration budget");

    auto* expansion_cmd = app.add_subcommand("expansion", "variance-expansion residual study");
    expansion_cmd->add_option("--k", k_text, "divergence index");
    expansion_cmd->add_option("--n", n_list, "comma-separated sample sizes");
    expansion_cmd->add_option("--rho", rho, "ball size (default chi2 quantile at 1 - alpha)");
    expansion_cmd->add_option("--alpha", alpha, "nominal miscoverage");
    expansion_cmd->add_option("--reps", reps, "replications per sample size");
    expansion_cmd->add_option("--seed", seed, "master seed");
    expansion_cmd->add_option("--out", out_path, "output CSV path")->required();

    auto* sectioning_cmd = app.add_subcommand("sectioning", "sectioned bound for dependent data");
    add_common_problem(sectioning_cmd);
    sectioning_cmd->add_option("--alpha", alpha, "nominal miscoverage");
    sectioning_cmd->add_option("--sections", sections, "number of blocks m");
    sectioning_cmd->add_option("--block-radius", radius_mode, "block | full");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitInput;
    }

    dro::SolveConfig solve_cfg;
    if (max_iters > 0) solve_cfg.max_iters = max_iters;

    try {
        if (app.got_subcommand(interval_cmd)) {
            return run_interval(in_path, skip_header, problem, k_text, alpha, rho,
                                ir->count() > 0, solve_cfg);
        }
        if (app.got_subcommand(solve_cmd)) {
            return run_solve(in_path, skip_header, problem, k_text, alpha, rho, sr->count() > 0,
                             solve_cfg);
        }
        if (app.got_subcommand(coverage_cmd)) {
            dro::BenchConfig cfg;
            cfg.alpha = alpha;
            cfg.spec = parse_divergence(k_text);
            cfg.dimension = dimension;
            cfg.debug_records = !debug_out.empty();
            if (max_iters > 0) cfg.solve.max_iters = max_iters;
            dro::Experiment exp;
            if (experiment == "portfolio") exp = dro::Experiment::portfolio;
            else if (experiment == "cvar-normal") exp = dro::Experiment::cvar_normal;
            else if (experiment == "cvar-a3") exp = dro::Experiment::cvar_a3;
            else if (experiment == "cvar-a5") exp = dro::Experiment::cvar_a5;
            else if (experiment == "newsvendor") exp = dro::Experiment::newsvendor;
            else throw InputError("unknown experiment: " + experiment);
            const auto grid = parse_size_list(n_list);
            std::fprintf(stderr, "# coverage experiment=%s alpha=%s reps=%d seed=%llu rho=%s\n",
                         experiment.c_str(), dro::format_sig6(alpha).c_str(), reps,
                         static_cast<unsigned long long>(seed),
                         dro::format_sig6(dro::chi_square_quantile(1, 1.0 - alpha)).c_str());
            const auto report = dro::run_coverage_experiment(exp, grid, reps, cfg, seed);
            dro::write_csv(report, out_path);
            if (!debug_out.empty()) dro::write_debug_csv(report, debug_out);
            if (report.failures > 0) {
                std::fprintf(stderr, "%d replications failed and were excluded\n",
                             report.failures);
            }
            return kExitOk;
        }
        if (app.got_subcommand(expansion_cmd)) {
            const auto spec = parse_divergence(k_text);
            const double rho_used =
                rho > 0.0 ? rho : dro::chi_square_quantile(1, 1.0 - alpha);
            std::fprintf(stderr, "# expansion divergence=%s rho=%s reps=%d seed=%llu\n",
                         dro::divergence_name(spec).c_str(), dro::format_sig6(rho_used).c_str(),
                         reps, static_cast<unsigned long long>(seed));
            const auto rows =
                dro::run_expansion_study(spec, parse_size_list(n_list), rho_used, reps, seed);
            dro::write_expansion_csv(rows, out_path);
            return kExitOk;
        }
        if (app.got_subcommand(sectioning_cmd)) {
            return run_sectioning(in_path, skip_header, problem, k_text, alpha, sections,
                                  radius_mode, solve_cfg);
        }
    } catch (const InputError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitInput;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitInput;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitNoConvergence;
    }
    return kExitInput;
}
