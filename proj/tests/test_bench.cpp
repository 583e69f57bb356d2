#include <catch2/catch.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dro/bench.hpp"

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

dro::BenchConfig tiny_config() {
    dro::BenchConfig cfg;
    cfg.dimension = 2;
    cfg.solve.max_iters = 300;
    cfg.cvar_truth_n = 20000;
    cfg.newsvendor_truth_n = 5000;
    return cfg;
}

} // namespace

TEST_CASE("formatting uses six significant digits, locale independent") {
    CHECK(dro::format_sig6(3.8414588207) == "3.84146");
    CHECK(dro::format_sig6(0.05) == "0.05");
    CHECK(dro::format_sig6(-1.0 / 0.0) == "-inf");
    CHECK(dro::format_sig6(1000.0) == "1000");
    CHECK(dro::format_sig6(2.2581989) == "2.2582");
}

TEST_CASE("coverage runs are deterministic given the seed") {
    const auto cfg = tiny_config();
    const std::vector<std::size_t> grid{60};
    const auto a = dro::run_coverage_experiment(dro::Experiment::portfolio, grid, 4, cfg, 99);
    const auto b = dro::run_coverage_experiment(dro::Experiment::portfolio, grid, 4, cfg, 99);
    REQUIRE(a.rows.size() == b.rows.size());
    REQUIRE(a.failures == 0);
    REQUIRE(b.failures == 0);

    const std::string pa = "/tmp/dro_cov_a.csv", pb = "/tmp/dro_cov_b.csv";
    dro::write_csv(a, pa);
    dro::write_csv(b, pb);
    CHECK(slurp(pa) == slurp(pb));
    std::remove(pa.c_str());
    std::remove(pb.c_str());

    // different seed, different sample paths
    const auto c = dro::run_coverage_experiment(dro::Experiment::portfolio, grid, 4, cfg, 100);
    bool same = true;
    for (std::size_t i = 0; i < a.rows.size(); ++i)
        same = same && a.rows[i].mean_upper == c.rows[i].mean_upper;
    CHECK_FALSE(same);
}

TEST_CASE("single replication yields a zero-one coverage") {
    const auto cfg = tiny_config();
    const auto report =
        dro::run_coverage_experiment(dro::Experiment::portfolio, {50}, 1, cfg, 7);
    REQUIRE(report.rows.size() == 2);
    for (const auto& row : report.rows) {
        CHECK(row.replications == 1);
        CHECK((row.coverage == 0.0 || row.coverage == 1.0));
    }
}

TEST_CASE("debug records reproduce the aggregate coverage") {
    auto cfg = tiny_config();
    cfg.debug_records = true;
    const auto report =
        dro::run_coverage_experiment(dro::Experiment::portfolio, {40, 80}, 6, cfg, 21);
    for (const auto& row : report.rows) {
        int covered = 0, count = 0;
        for (const auto& rec : report.records) {
            if (rec.n != row.n || rec.method != row.method) continue;
            ++count;
            covered += rec.covered ? 1 : 0;
        }
        REQUIRE(count == row.replications);
        REQUIRE(static_cast<double>(covered) / count == Approx(row.coverage).margin(1e-15));
    }
}

TEST_CASE("coverage csv round trip") {
    dro::CoverageReport report;
    report.rows.push_back(dro::CoverageRow{"portfolio", 1000, "el", 0.946, -1.25, 2.5, 3.75, 500, 42});
    const std::string path = "/tmp/dro_cov_row.csv";
    dro::write_csv(report, path);
    const std::string text = slurp(path);
    CHECK(text ==
          "experiment,n,method,coverage,mean_lower,mean_upper,mean_width,replications,seed\n"
          "portfolio,1000,el,0.946,-1.25,2.5,3.75,500,42\n");
    std::remove(path.c_str());

    dro::CoverageReport empty;
    dro::write_csv(empty, path);
    CHECK(slurp(path) ==
          "experiment,n,method,coverage,mean_lower,mean_upper,mean_width,replications,seed\n");
    std::remove(path.c_str());
}

TEST_CASE("debug csv lists one line per replication record") {
    auto cfg = tiny_config();
    cfg.debug_records = true;
    const auto report =
        dro::run_coverage_experiment(dro::Experiment::portfolio, {30}, 3, cfg, 13);
    const std::string path = "/tmp/dro_debug.csv";
    dro::write_debug_csv(report, path);
    const std::string text = slurp(path);
    std::size_t lines = 0;
    for (char c : text) lines += c == '\n' ? 1 : 0;
    CHECK(lines == report.records.size() + 1); // header + one per record
    CHECK(text.rfind("n,replication,method,lower,upper,truth,covered\n", 0) == 0);
    std::remove(path.c_str());
}

TEST_CASE("expansion study medians") {
    SECTION("chi-square on bounded data is exact") {
        const auto rows =
            dro::run_expansion_study(dro::DivergenceSpec::chi2(), {100, 400}, 3.8415, 20, 5);
        REQUIRE(rows.size() == 2);
        for (const auto& row : rows) CHECK(row.median_residual <= 1e-9);
    }
    SECTION("zero budget has zero residual") {
        const auto rows =
            dro::run_expansion_study(dro::DivergenceSpec::empirical_likelihood(), {50}, 0.0, 5, 5);
        CHECK(rows[0].median_residual <= 1e-12);
    }
}

TEST_CASE("generalized empirical likelihood undercovers relative to normal at small n") {
    dro::BenchConfig cfg; // d = 5 defaults
    cfg.solve.max_iters = 600;
    const auto report =
        dro::run_coverage_experiment(dro::Experiment::portfolio, {100}, 200, cfg, 31);
    REQUIRE(report.failures == 0);
    double el = -1.0, normal = -1.0;
    for (const auto& row : report.rows) {
        if (row.method == "el") el = row.coverage;
        if (row.method == "normal") normal = row.coverage;
    }
    // directional check with a noise allowance
    CHECK(el <= normal + 0.02);
}

TEST_CASE("cvar truth uses the exact kink scan") {
    // piecewise-linear SAA objective: compare against a dense grid
    std::vector<double> data{-2.0, -1.0, 0.0, 0.5, 1.5, 3.0, 4.5};
    const double alpha = 0.6;
    const double exact = dro::detail::cvar_saa_optimum(data, alpha);
    double grid_best = 1e300;
    for (double x = -3.0; x <= 5.0; x += 1e-4) {
        double acc = 0.0;
        for (double xi : data) acc += std::max(xi - x, 0.0);
        grid_best = std::min(grid_best, acc / ((1.0 - alpha) * data.size()) + x);
    }
    CHECK(exact == Approx(grid_best).margin(1e-6));
}
