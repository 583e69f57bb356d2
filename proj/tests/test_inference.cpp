#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "dro/datagen.hpp"
#include "dro/inference.hpp"
#include "dro/rng.hpp"
#include "oracles.hpp"

using dro::ConfidenceInterval;
using dro::DivergenceSpec;
using dro::Sample;
using dro::SolveConfig;
using dro::UncertaintyBudget;

TEST_CASE("deterministic losses collapse every interval") {
    auto model = dro::portfolio_model(2, -1.0, 1.0);
    Sample sample(2, {0.5, 2.0, 0.5, 2.0, 0.5, 2.0, 0.5, 2.0});
    const double opt = oracle::box_simplex_lp_min(std::vector<double>{0.5, 2.0}, -1.0, 1.0);

    const auto el = dro::two_sided_interval(model, sample, 0.05);
    CHECK(el.lower == Approx(opt).margin(1e-6));
    CHECK(el.upper == Approx(opt).margin(1e-6));
    CHECK(el.rho_used == Approx(3.841459).margin(1e-6));

    const auto norm = dro::normal_interval(model, sample, 0.05);
    CHECK(norm.lower == Approx(opt).margin(1e-6));
    CHECK(norm.upper == Approx(opt).margin(1e-6));

    const auto one = dro::one_sided_upper(model, sample, 0.05);
    CHECK(one.upper == Approx(opt).margin(1e-6));
    CHECK(std::isinf(one.lower));
    CHECK(one.lower < 0.0);
    CHECK(one.rho_used == Approx(2.705543).margin(1e-6));
}

TEST_CASE("forced decision gives the closed-form interval") {
    dro::RngStream rng(2718, 0);
    std::vector<double> data(400);
    for (double& v : data) v = rng.next_gaussian();
    auto [mean, var] = dro::sample_mean_variance(data);
    auto model = dro::portfolio_model(1, -10.0, 10.0);
    Sample sample(data);

    const double alpha = 0.05;
    const double rho = dro::chi_square_quantile(1, 1.0 - alpha);
    const double half = std::sqrt(rho * var / 400.0);

    const auto el = dro::two_sided_interval(model, sample, alpha);
    CHECK(el.lower == Approx(mean - half).margin(1e-9));
    CHECK(el.upper == Approx(mean + half).margin(1e-9));

    // with the chi-square ball in the unclamped regime the robust and normal
    // halfwidths coincide, since rho equals the squared normal quantile
    const auto norm = dro::normal_interval(model, sample, alpha);
    CHECK(0.5 * (norm.upper - norm.lower) == Approx(half).margin(1e-6));
    CHECK(0.5 * (el.upper - el.lower) == Approx(0.5 * (norm.upper - norm.lower)).margin(1e-6));
}

TEST_CASE("one-sided bound is tighter than the two-sided upper endpoint") {
    dro::RngStream rng(99, 4);
    std::vector<double> data(200);
    for (double& v : data) v = rng.next_gaussian() + 0.3;
    auto model = dro::portfolio_model(1, -10.0, 10.0);
    Sample sample(data);
    const auto two = dro::two_sided_interval(model, sample, 0.05);
    const auto one = dro::one_sided_upper(model, sample, 0.05);
    CHECK(one.upper <= two.upper + 1e-10);
    CHECK_THROWS_AS(dro::one_sided_upper(model, sample, 0.5), std::invalid_argument);
}

TEST_CASE("intervals nest as the level rises") {
    dro::RngStream rng(512, 3);
    auto model = dro::portfolio_model(3, -2.0, 2.0);
    Sample sample = [&] {
        std::vector<double> flat(3 * 150);
        for (double& v : flat) v = rng.next_gaussian();
        return Sample(3, std::move(flat));
    }();
    const auto wide = dro::two_sided_interval(model, sample, 0.02);
    const auto narrow = dro::two_sided_interval(model, sample, 0.10);
    CHECK(wide.lower <= narrow.lower + 1e-7);
    CHECK(wide.upper >= narrow.upper - 1e-7);
}

TEST_CASE("nonnegative losses keep the lower endpoint nonnegative") {
    dro::RngStream rng(813, 2);
    auto model = dro::newsvendor_model({2.0, 1.0}, {1.0, 3.0}, 5.0);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> flat(2 * 80);
        for (double& v : flat) v = rng.next_gaussian();
        Sample sample(2, std::move(flat));
        const auto ci = dro::two_sided_interval(model, sample, 0.05);
        REQUIRE(ci.lower >= -1e-12);
        REQUIRE(ci.lower <= ci.upper);
    }
}

TEST_CASE("one-step lower bound dominates the full lower endpoint") {
    // small CVaR instance where the exact lower endpoint is brute-forced
    // over a decision grid
    dro::RngStream rng(407, 1);
    auto model = dro::cvar_model(0.7);
    std::vector<double> data(25);
    for (double& v : data) v = rng.next_gaussian() * 2.0;
    Sample sample(data);
    const double alpha = 0.05;
    const double rho = dro::chi_square_quantile(1, 1.0 - alpha);
    const UncertaintyBudget budget{rho, 25};

    const auto ci = dro::two_sided_interval(model, sample, alpha);

    double l_full = std::numeric_limits<double>::infinity();
    for (double x = -8.0; x <= 8.0; x += 1e-3) {
        const auto losses = dro::loss_vector(model, std::vector<double>{x}, sample);
        l_full = std::min(l_full,
                          dro::best_case_mean(losses, DivergenceSpec::chi2(), budget).value);
    }
    CHECK(ci.lower >= l_full - 1e-8);
}

TEST_CASE("sectioned bound on constant data is the constant") {
    auto model = dro::portfolio_model(1, -10.0, 10.0);
    Sample sample(std::vector<double>(64, 2.5));
    const auto [ci, stats] = dro::sectioned_upper_bound(model, sample, 4, 0.05);
    CHECK(ci.upper == Approx(2.5).margin(1e-9));
    CHECK(stats.sections == 4);
    CHECK(stats.block_length == 16);
    CHECK(stats.spread == Approx(0.0).margin(1e-12));
    CHECK(stats.pivot_correction == Approx(0.0).margin(1e-12));
    for (double u : stats.block_upper_bounds) CHECK(u == Approx(2.5).margin(1e-9));
}

TEST_CASE("two-section bound covers an i.i.d. mean") {
    // forced scalar decision, i.i.d. standard normal, m = 2, n = 4000
    auto model = dro::portfolio_model(1, -10.0, 10.0);
    dro::SolveConfig cfg;
    cfg.max_iters = 45;
    cfg.stall_patience = 10;
    int covered = 0;
    const int reps = 500;
    for (int rep = 0; rep < reps; ++rep) {
        dro::RngStream rng(606, static_cast<std::uint64_t>(rep));
        std::vector<double> data(4000);
        for (double& v : data) v = rng.next_gaussian();
        const auto [ci, stats] = dro::sectioned_upper_bound(model, Sample(std::move(data)), 2,
                                                            0.05, DivergenceSpec::chi2(), cfg);
        covered += 0.0 <= ci.upper ? 1 : 0;
    }
    CHECK(static_cast<double>(covered) / reps >= 0.9);
}

TEST_CASE("sectioning on i.i.d. data keeps nominal calibration") {
    auto model = dro::portfolio_model(1, -10.0, 10.0);
    dro::SolveConfig cfg;
    cfg.max_iters = 45;
    cfg.stall_patience = 10;
    int covered = 0;
    const int reps = 400;
    for (int rep = 0; rep < reps; ++rep) {
        dro::RngStream rng(707, static_cast<std::uint64_t>(rep));
        std::vector<double> data(2000);
        for (double& v : data) v = rng.next_gaussian();
        const auto [ci, stats] = dro::sectioned_upper_bound(model, Sample(std::move(data)), 4,
                                                            0.05, DivergenceSpec::chi2(), cfg);
        covered += 0.0 <= ci.upper ? 1 : 0;
    }
    const double coverage = static_cast<double>(covered) / reps;
    CHECK(coverage >= 0.90);
    CHECK(coverage <= 0.99);
}

TEST_CASE("sectioned bound mechanics") {
    dro::RngStream rng(64, 9);
    auto model = dro::portfolio_model(1, -10.0, 10.0);
    std::vector<double> data(410);
    for (double& v : data) v = rng.next_gaussian();
    Sample sample(data);

    const auto [ci, stats] = dro::sectioned_upper_bound(model, sample, 4, 0.05);
    CHECK(stats.block_length == 102); // leftovers (410 - 408) are not blocked
    CHECK(stats.block_upper_bounds.size() == 4);
    CHECK(std::isfinite(ci.upper));
    // the block average carries the robustness bonus before correction
    double mean_block = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
        const Sample block = sample.slice(j * 102, 102);
        auto [bm, bv] = dro::sample_mean_variance(block.data);
        const double direct =
            bm + std::sqrt(ci.rho_used * bv / 102.0); // unclamped chi-square value
        CHECK(stats.block_upper_bounds[j] == Approx(direct).margin(1e-9));
        mean_block += direct / 4.0;
    }
    CHECK(stats.mean == Approx(mean_block).margin(1e-9));

    // hand-rolled bound assembly
    auto [fm, fv] = dro::sample_mean_variance(sample.data);
    (void)fm;
    const double corr = std::sqrt(ci.rho_used * fv / 102.0);
    CHECK(stats.pivot_correction == Approx(corr).margin(1e-9));
    const double t = dro::student_t_quantile(3, 0.95);
    CHECK(ci.upper == Approx(stats.mean - corr + stats.spread * t).margin(1e-9));

    // the printed full-sample radius variant shrinks the block bounds
    dro::SectioningConfig printed;
    printed.radius = dro::SectioningConfig::BlockRadius::full_sample;
    const auto [ci2, stats2] =
        dro::sectioned_upper_bound(model, sample, 4, 0.05, DivergenceSpec::chi2(), {}, printed);
    CHECK(stats2.mean < stats.mean);

    CHECK_THROWS_AS(dro::sectioned_upper_bound(model, sample, 1, 0.05), std::invalid_argument);
    CHECK_THROWS_AS(dro::sectioned_upper_bound(model, Sample(std::vector<double>(6, 1.0)), 4, 0.05),
                    std::invalid_argument);
}
