// SPDX-License-Identifier: Apache-2.0

#include "catch_amalgamated.hpp"

#include "ssdfrc/harness.hpp"

using namespace ssdfrc;

namespace {

Scenario small_scenario() {
    return scenario_from_json(Json::parse(R"({
        "system": {"num_subcarriers": 128, "num_ofdm_symbols": 8, "num_private": 8},
        "targets": [{"angle_deg": -20, "range_m": 30, "velocity_mps": 10},
                    {"angle_deg": 25, "range_m": 70, "velocity_mps": -15}],
        "beta": "unit",
        "radar": {"snr_db": 20}
    })"));
}

TargetEstimate est(double deg, double r, double v) {
    TargetEstimate e;
    e.angle_deg = deg;
    e.range_m = r;
    e.velocity_mps = v;
    return e;
}

}  // namespace

TEST_CASE("greedy matching", "[harness]") {
    const std::vector<TargetRecord> truth{{deg2rad(10.0), 50.0, 5.0, {}}, {deg2rad(-20.0), 80.0, 0.0, {}}};
    const MatchTolerance tol{1.0, 1.0, 1.0};
    std::vector<TargetEstimate> e{est(-19.5, 80.5, 0.2), est(10.2, 49.9, 5.5)};
    auto m = match_targets(truth, e, tol);
    REQUIRE(m.correct == 2);
    REQUIRE(m.all_correct());

    e.push_back(est(40.0, 10.0, 0.0));
    m = match_targets(truth, e, tol);
    REQUIRE(m.correct == 2);
    REQUIRE(m.wrong == 1);
    REQUIRE(m.missed == 0);
    REQUIRE_FALSE(m.all_correct());

    // A nearby but out-of-tolerance estimate is both wrong and missed.
    const std::vector<TargetEstimate> off{est(12.0, 50.0, 5.0)};
    m = match_targets(std::span(truth).first(1), off, tol);
    REQUIRE(m.pairs.size() == 1);
    REQUIRE_FALSE(m.pairs[0].correct);
    REQUIRE(m.wrong == 1);
    REQUIRE(m.missed == 1);
    REQUIRE(match_targets(std::span(truth).first(1), off, tol, false).wrong == 1);

    const std::vector<TargetEstimate> none;
    m = match_targets(truth, none, tol);
    REQUIRE(m.missed == 2);
    REQUIRE(m.wrong == 0);
}

TEST_CASE("random targets respect bounds and separation", "[harness][property]") {
    const auto cfg = SystemConfig::reference(16, 8);
    const auto res = resolutions(cfg);
    TargetBounds b;
    REQUIRE(std::abs(target_range_limit(cfg, b) - 0.9 * kSpeedOfLight * 1e-6 / 2.0) < 1e-9);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto ts = random_targets(cfg, 6, b, seed);
        REQUIRE(ts.size() == 6);
        for (std::size_t a = 0; a < ts.size(); ++a) {
            REQUIRE(rad2deg(ts[a].angle_rad) >= -60.0);
            REQUIRE(rad2deg(ts[a].angle_rad) <= 60.0);
            REQUIRE(ts[a].range_m >= 10.0);
            REQUIRE(ts[a].range_m <= target_range_limit(cfg, b));
            REQUIRE(std::abs(ts[a].velocity_mps) <= 0.25 * res.vel_max_mps);
            for (std::size_t c = a + 1; c < ts.size(); ++c)
                REQUIRE((std::abs(rad2deg(ts[a].angle_rad - ts[c].angle_rad)) > 1.0 ||
                         std::abs(ts[a].range_m - ts[c].range_m) > res.range_res_m ||
                         std::abs(ts[a].velocity_mps - ts[c].velocity_mps) > res.vel_res_mps));
        }
        const auto again = random_targets(cfg, 6, b, seed);
        REQUIRE(again[5].range_m == ts[5].range_m);
    }
}

TEST_CASE("scenario JSON validation", "[harness]") {
    REQUIRE_THROWS_AS(scenario_from_json(Json::parse(R"({"bogus": 1})")), ConfigError);
    REQUIRE_THROWS_AS(scenario_from_json(Json::parse(R"({"radar": {"solver": "lasso"}})")), ConfigError);
    REQUIRE_THROWS_AS(scenario_from_json(Json::parse(R"({"trials": 0})")), ConfigError);
    REQUIRE_THROWS_AS(scenario_from_json(Json::parse(R"({"precoder": {"source": "file", "file": "/nonexistent.bin"}})")),
                      ConfigError);
    REQUIRE_THROWS_AS(scenario_from_json(Json::parse(R"({"targets": [{"angle_deg": 95}]})")), ConfigError);
    REQUIRE_THROWS_AS(scenario_from_json(Json::parse(R"({"monte_carlo": {"sweep": "x"}})")), ConfigError);
    const auto s = scenario_from_json(Json::parse(R"({"radar": {"solver": "omp", "angle_grid_step_deg": 0.5, "fista_tol": 1e-6}})"));
    REQUIRE(s.estimator.sparse.solver == SparseSolver::Omp);
    REQUIRE(s.estimator.sparse.fista_tol == 1e-6);
    REQUIRE(s.estimator.angle_grid.size() == 361);
}

TEST_CASE("scenario runs are deterministic", "[harness]") {
    const Scenario s = small_scenario();
    const auto a = run_scenario(s, 42);
    const auto b = run_scenario(s, 42);
    REQUIRE(a.estimation.estimates.size() == b.estimation.estimates.size());
    for (std::size_t k = 0; k < a.estimation.estimates.size(); ++k) {
        REQUIRE(a.estimation.estimates[k].angle_deg == b.estimation.estimates[k].angle_deg);
        REQUIRE(a.estimation.estimates[k].range_m == b.estimation.estimates[k].range_m);
        REQUIRE(a.estimation.estimates[k].velocity_mps == b.estimation.estimates[k].velocity_mps);
    }
    REQUIRE(a.match.all_correct());

    const auto dir = std::filesystem::temp_directory_path() / "ssdfrc_test_harness";
    std::filesystem::remove_all(dir);
    const auto files_a = write_scenario_outputs(a, dir / "a");
    const auto files_b = write_scenario_outputs(b, dir / "b");
    REQUIRE(files_a.size() == 3);
    for (std::size_t k = 0; k < files_a.size(); ++k) REQUIRE(read_file(files_a[k]) == read_file(files_b[k]));
    const Json doc = Json::parse(read_file(dir / "a" / "estimates.json"));
    REQUIRE(doc.at("estimates").size() == a.estimation.estimates.size());
    std::filesystem::remove_all(dir);
}

TEST_CASE("scenario without private subcarriers reports a notice", "[harness]") {
    Scenario s = small_scenario();
    s.cfg.private_set.clear();
    const auto r = run_scenario(s, 1);
    REQUIRE_FALSE(r.notices.empty());
    REQUIRE_FALSE(r.estimation.refined);
}

TEST_CASE("Monte Carlo results do not depend on the worker count", "[harness]") {
    Scenario s = small_scenario();
    s.monte_carlo.values = {2, 4};
    s.monte_carlo.num_targets = 2;
    s.monte_carlo.workers = 1;
    const auto one = run_monte_carlo(s, 3, 9);
    s.monte_carlo.workers = 3;
    const auto three = run_monte_carlo(s, 3, 9);
    REQUIRE(one.size() == 2);
    for (std::size_t k = 0; k < one.size(); ++k) {
        REQUIRE(one[k].detection_probability == three[k].detection_probability);
        REQUIRE(one[k].angle_mse_deg2 == three[k].angle_mse_deg2);
        REQUIRE(one[k].range_mse_m2 == three[k].range_mse_m2);
        REQUIRE(one[k].mean_iterations == three[k].mean_iterations);
        REQUIRE(one[k].trials == 3);
    }
    REQUIRE(one[1].rate_loss > one[0].rate_loss);
    REQUIRE(std::abs(one[0].rate_loss - 2.0 * rate_loss_per_private(s.cfg)) < 1e-3);
    REQUIRE_THROWS_AS(run_monte_carlo(s, 0, 9), std::invalid_argument);
}

TEST_CASE("plot data emission", "[harness]") {
    PlotData d;
    d.beampattern = {{-1.0, 1.0}, {0.0, 10.0}};
    d.range_profile = {{0.0, 3, 3.5, 0.25}};
    BerPoint bp;
    bp.snr_db = 0.0;
    bp.num_tx = 16;
    bp.counts = {1, 100, 1, 10};
    d.ber = {bp};
    McSummary m;
    m.value = 4;
    d.tradeoff = {m};
    d.mse = {m};
    const auto dir = std::filesystem::temp_directory_path() / "ssdfrc_test_plots";
    std::filesystem::remove_all(dir);
    for (const char* kind : {"beampattern", "range_profile", "ber_curve", "mse_curve", "tradeoff"}) {
        const auto path = emit_plot_data(d, kind, dir);
        REQUIRE(path.filename() == std::string(kind) + ".csv");
        REQUIRE(std::filesystem::exists(path));
    }
    REQUIRE(read_file(dir / "beampattern.csv") == "angle_deg,power_linear,power_db\n-1,1,0\n0,10,10\n");
    REQUIRE(read_file(dir / "ber_curve.csv") == "snr_db,n_tx,class,ber\n0,16,shared,0.01\n0,16,private,0.1\n");
    REQUIRE_THROWS_AS(emit_plot_data(d, "heatmap", dir), std::invalid_argument);
    REQUIRE_FALSE(std::filesystem::exists(dir / "heatmap.csv"));
    std::filesystem::remove_all(dir);
}
