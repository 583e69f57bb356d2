#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "dro/outer.hpp"
#include "dro/rng.hpp"
#include "oracles.hpp"

using dro::DivergenceSpec;
using dro::Sample;
using dro::SolveConfig;
using dro::UncertaintyBudget;

namespace {

Sample gaussian_sample(dro::RngStream& rng, std::size_t n, std::size_t d = 1) {
    std::vector<double> flat(n * d);
    for (double& v : flat) v = rng.next_gaussian();
    return Sample(d, std::move(flat));
}

} // namespace

TEST_CASE("SAA on the linear portfolio hits the LP vertex optimum") {
    SECTION("degenerate scenario set") {
        auto model = dro::portfolio_model(2, -1.0, 2.0);
        Sample sample(2, {1.0, 2.0, 1.0, 2.0, 1.0, 2.0});
        const auto sol = dro::solve_saa(model, sample);
        const double expect = oracle::box_simplex_lp_min(std::vector<double>{1.0, 2.0}, -1.0, 2.0);
        CHECK(sol.value == Approx(expect).margin(1e-4));
        // best weight goes to the cheaper asset, the other sits at the bound
        CHECK(sol.x[1] == Approx(-1.0).margin(1e-6));
    }
    SECTION("random instances, d up to 5") {
        dro::RngStream rng(17, 1);
        for (int trial = 0; trial < 10; ++trial) {
            const std::size_t d = 2 + trial % 4;
            auto model = dro::portfolio_model(d, -2.0, 2.0);
            Sample sample = gaussian_sample(rng, 40, d);
            std::vector<double> mu(d, 0.0);
            for (std::size_t i = 0; i < sample.size(); ++i) {
                auto row = sample.scenario(i);
                for (std::size_t j = 0; j < d; ++j) mu[j] += row[j] / 40.0;
            }
            const double expect = oracle::box_simplex_lp_min(mu, -2.0, 2.0);
            const auto sol = dro::solve_saa(model, sample);
            INFO("trial " << trial << " d=" << d);
            REQUIRE(sol.value == Approx(expect).margin(1e-4));
        }
    }
}

TEST_CASE("SAA on a flat CVaR objective") {
    auto model = dro::cvar_model(0.5);
    Sample sample(std::vector<double>{-1.0, 1.0});
    const auto sol = dro::solve_saa(model, sample);
    // every x in [-1, 1] is optimal with value 1
    CHECK(sol.value == Approx(1.0).margin(1e-4));
    CHECK(sol.x[0] >= -1.0 - 1e-3);
    CHECK(sol.x[0] <= 1.0 + 1e-3);
}

TEST_CASE("CVaR population optimum over a discrete distribution") {
    // equal-weight three-point distribution; SAA over the support is exact
    const std::vector<double> values{-1.0, 0.5, 4.0};
    const std::vector<double> probs{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    const double alpha = 0.6;
    auto model = dro::cvar_model(alpha);
    Sample sample(values);
    const auto sol = dro::solve_saa(model, sample);
    const double expect = oracle::cvar_discrete_optimum(values, probs, alpha);
    CHECK(sol.value == Approx(expect).margin(1e-4));
}

TEST_CASE("single-scenario newsvendor is solved exactly") {
    auto model = dro::newsvendor_model({1.0}, {1.0}, 10.0);
    Sample sample(std::vector<double>{2.0});
    const auto sol = dro::solve_saa(model, sample);
    CHECK(sol.value == Approx(0.0).margin(1e-5));
    CHECK(sol.x[0] == Approx(2.0).margin(1e-3));
}

TEST_CASE("robust solve with zero budget equals SAA") {
    dro::RngStream rng(91, 0);
    auto model = dro::portfolio_model(3, -1.0, 1.0);
    Sample sample = gaussian_sample(rng, 30, 3);
    const auto saa = dro::solve_saa(model, sample);
    const auto robust =
        dro::solve_robust(model, sample, DivergenceSpec::chi2(), UncertaintyBudget{0.0, 30});
    CHECK(robust.value == Approx(saa.value).margin(1e-6));
}

TEST_CASE("forced decision reduces the robust solve to the inner value") {
    dro::RngStream rng(92, 1);
    auto model = dro::portfolio_model(1, -10.0, 10.0);
    Sample sample = gaussian_sample(rng, 50);
    auto [mean, var] = dro::sample_mean_variance(sample.data);
    const UncertaintyBudget budget{2.0, 50};
    const auto sol = dro::solve_robust(model, sample, DivergenceSpec::chi2(), budget);
    CHECK(sol.x[0] == Approx(1.0).margin(1e-10));
    CHECK(sol.value == Approx(mean + std::sqrt(2.0 * var / 50.0)).margin(1e-9));
}

TEST_CASE("robust CVaR matches a nested brute-force oracle") {
    auto model = dro::cvar_model(0.5);
    Sample sample(std::vector<double>{-1.0, 1.0});
    const UncertaintyBudget budget{1.0, 2};
    const auto sol = dro::solve_robust(model, sample, DivergenceSpec::chi2(), budget);

    double best = 1e300;
    for (double x = -1.5; x <= 1.5; x += 1e-4) {
        const std::vector<double> losses{model.loss(std::vector<double>{x}, std::vector<double>{-1.0}),
                                         model.loss(std::vector<double>{x}, std::vector<double>{1.0})};
        best = std::min(best, dro::worst_case_mean_chi2_exact(losses, budget).value);
    }
    CHECK(sol.value == Approx(best).margin(1e-4));
}

TEST_CASE("symmetric newsvendor optimum sits at the median demand") {
    // equal costs put the optimal quantile at 1/2; symmetric demand puts it at 0
    dro::RngStream rng(96, 3);
    auto model = dro::newsvendor_model({1.0}, {1.0}, 10.0);
    std::vector<double> demand(20000);
    for (double& v : demand) v = rng.next_gaussian();
    const auto sol = dro::solve_saa(model, Sample(std::move(demand)));
    CHECK(std::abs(sol.x[0]) <= 0.05);
}

TEST_CASE("portfolio robust optimum matches a nested brute-force scan") {
    // d = 2 with the sum constraint reduces to one free coordinate, so the
    // alternating solver can be checked against an exhaustive scan that
    // evaluates the exact inner problem on a fine grid
    dro::RngStream rng(97, 5);
    auto model = dro::portfolio_model(2, -2.0, 2.0);
    Sample sample = gaussian_sample(rng, 40, 2);
    const UncertaintyBudget budget{3.8415, 40};
    const auto sol = dro::solve_robust(model, sample, DivergenceSpec::chi2(), budget);

    double best = 1e300;
    for (double x1 = -1.0; x1 <= 2.0; x1 += 2.5e-4) {
        const std::vector<double> x{x1, 1.0 - x1};
        const auto losses = dro::loss_vector(model, x, sample);
        best = std::min(best, dro::worst_case_mean_chi2_exact(losses, budget).value);
    }
    CHECK(sol.value == Approx(best).margin(1e-4));
}

TEST_CASE("robust value dominates the SAA value") {
    dro::RngStream rng(93, 7);
    for (int trial = 0; trial < 5; ++trial) {
        auto model = dro::portfolio_model(3, -1.0, 1.0);
        Sample sample = gaussian_sample(rng, 25, 3);
        const auto saa = dro::solve_saa(model, sample);
        const auto robust =
            dro::solve_robust(model, sample, DivergenceSpec::chi2(), UncertaintyBudget{3.8415, 25});
        REQUIRE(robust.value >= saa.value - 1e-8);
    }
}

TEST_CASE("solutions are feasible and the best trace is monotone") {
    dro::RngStream rng(94, 7);
    auto model = dro::newsvendor_model({1.5, 0.5}, {1.0, 2.0}, 4.0);
    Sample sample = gaussian_sample(rng, 60, 2);
    SolveConfig cfg;
    cfg.track_history = true;
    const auto sol = dro::solve_saa(model, sample, cfg);
    auto projected = sol.x;
    model.project(projected);
    double drift = 0.0;
    for (std::size_t i = 0; i < projected.size(); ++i) drift += std::abs(projected[i] - sol.x[i]);
    CHECK(drift <= 1e-10);
    for (std::size_t i = 1; i < sol.history.size(); ++i)
        REQUIRE(sol.history[i] <= sol.history[i - 1] + 1e-12);
}

TEST_CASE("polyak step rule reaches a comparable optimum") {
    dro::RngStream rng(95, 2);
    auto model = dro::portfolio_model(3, -1.0, 1.0);
    Sample sample = gaussian_sample(rng, 30, 3);
    SolveConfig polyak;
    polyak.step_rule = SolveConfig::StepRule::polyak;
    const auto a = dro::solve_saa(model, sample);
    const auto b = dro::solve_saa(model, sample, polyak);
    CHECK(b.value == Approx(a.value).margin(1e-3));
}

TEST_CASE("deviation distance") {
    using Points = std::vector<std::vector<double>>;
    const Points a{{0.0, 0.0}, {1.0, 0.0}};
    const Points b{{0.0, 0.0}, {1.0, 0.0}, {5.0, 5.0}};
    CHECK(dro::deviation_distance(a, b) == 0.0);
    CHECK(dro::deviation_distance(Points{{0.0, 0.0}}, Points{{3.0, 4.0}}) == Approx(5.0));
    CHECK(dro::deviation_distance(Points{{0.0, 0.0}, {1.0, 0.0}}, Points{{0.0, 0.0}}) ==
          Approx(1.0));
    CHECK_THROWS_AS(dro::deviation_distance(Points{}, b), std::invalid_argument);
}
