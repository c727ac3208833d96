#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "cryodc/error.hpp"
#include "cryodc/experiments.hpp"

using namespace cryodc;
namespace fs = std::filesystem;

TEST_CASE("resolution map") {
    const auto t = resolution_map(default_config());
    CHECK(t.rows.size() == 36);
    const auto ideal = t.column("ideal_resolution_V");
    const auto emp = t.column("empirical_resolution_V");
    const auto max_gap = t.column("max_gap_V");
    // Last row is n_m = 9, n_s = 5.
    CHECK(ideal.back() == doctest::Approx(0.81e-6).epsilon(0.01));
    CHECK(ideal.back() < 100e-6);
    // At fixed n_s both shrink as devices are added.
    for (std::size_t k = 4; k < t.rows.size(); ++k) {
        CHECK(ideal[k] < ideal[k - 4]);
        CHECK(emp[k] > 0.0);
    }
    for (std::size_t k = 0; k < t.rows.size(); ++k) CHECK(max_gap[k] >= ideal[k]);
}

TEST_CASE("range trade-off") {
    const auto t = range_tradeoff(default_config());
    const auto range = t.column("voltage_range_V");
    const auto res = t.column("ideal_resolution_V");
    for (std::size_t k = 1; k < range.size(); ++k) {
        CHECK(range[k] < range[k - 1]);
        CHECK(res[k] < res[k - 1]);
    }
    CHECK(range.back() == doctest::Approx(1.5778).epsilon(1e-4));
}

TEST_CASE("power budget") {
    const auto t = power_budget(default_config());
    CHECK(t.summary["sources"].get<std::size_t>() == 820);
    CHECK(t.column("max_power_W").back() == doctest::Approx(1.778e-3).epsilon(1e-3));
}

TEST_CASE("variability sweep at zero spread is deterministic") {
    auto cfg = default_config();
    cfg.variability_levels = {0.0, 0.05};
    cfg.repetitions = 6;
    const auto t = variability_sweep(cfg);
    CHECK(t.column("std_resolution_V")[0] == 0.0);
    CHECK(t.column("std_resolution_V")[1] > 0.0);
    cfg.threads = 1;
    const auto serial = variability_samples(cfg);
    cfg.threads = 3;
    CHECK(variability_samples(cfg).rows == serial.rows);
}

TEST_CASE("staircase targets") {
    const auto p = params_4k();
    const auto policy = TuningPolicy::for_tag("sim");
    const auto band = reachable_band(p, policy);
    const auto t = staircase_targets(p, policy, 11);
    REQUIRE(t.size() == 11);
    CHECK(t.front() == doctest::Approx(band.high));
    CHECK(t.back() == doctest::Approx(band.low));
    for (std::size_t k = 2; k < t.size(); ++k)
        CHECK(1 / t[k] - 1 / t[k - 1] == doctest::Approx(1 / t[1] - 1 / t[0]).epsilon(1e-9));
}

TEST_CASE("servo beats coarse-only programming") {
    auto cfg = default_config();
    cfg.servo_v_min = 0.30;
    cfg.servo_v_max = 1.30;
    cfg.servo_step = 0.02;
    const auto t = servo_sweep(cfg);
    CHECK(t.rows.size() == 51);
    CHECK(t.summary["max_relative_error"].get<double>() <= t.summary["max_coarse_only_error"].get<double>());
    CHECK(t.summary["fraction_within"].get<double>() >= 0.99);
}

TEST_CASE("run_experiment writes files and rejects unknown names") {
    const auto dir = fs::temp_directory_path() / "cryodc_exp";
    fs::remove_all(dir);
    const auto s = run_experiment("range-tradeoff", default_config(), dir.string());
    CHECK(fs::exists(dir / "range-tradeoff.csv"));
    CHECK(fs::exists(dir / "range-tradeoff.json"));
    CHECK(s["files"].contains("range-tradeoff.csv"));
    CHECK_THROWS_AS(run_experiment("bogus", default_config(), dir.string()), Error);
}
