#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cryodc/config.hpp"
#include "cryodc/error.hpp"
#include "cryodc/scan.hpp"

using namespace cryodc;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(double lo, double hi, double step) {
    auto cfg = default_config();
    cfg.seed = 1;
    cfg.window = {lo, hi, lo, hi, step};
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("config JSON round trip and validation") {
    const auto cfg = load_config(CRYODC_DATA_DIR "/default_config.json");
    CHECK(cfg.params == params_4k());
    CHECK(cfg.window.grid().n1 == 3501);
    const nlohmann::json j = cfg;
    const auto back = j.get<ExperimentConfig>();
    CHECK(config_hash(back) == config_hash(cfg));

    auto bad = cfg;
    bad.window.resolution = 3e-4;
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("SIM_SEED overrides the config seed") {
    setenv("SIM_SEED", "77", 1);
    CHECK(default_config().seed == 77);
    setenv("SIM_SEED", "x7", 1);
    CHECK_THROWS_AS(default_config(), Error);
    unsetenv("SIM_SEED");
    CHECK(default_config().seed == 1);
}

TEST_CASE("3x3 noise-free scan matches the ideal sweep") {
    auto cfg = small_config(0.30, 0.50, 0.1);
    cfg.variability = VariabilityModel::none();
    const auto res = run_scan(cfg);
    CHECK(res.mode == ScanMode::exact);
    CHECK(res.flagged == 0);
    REQUIRE(res.diagram.n1.size() == 9);
    const DqdModel model(cfg.dqd);
    for (std::size_t k = 0; k < 9; ++k) {
        CHECK(std::abs(res.diagram.v1[k] - res.v1_target[k]) <= 0.025 * res.v1_target[k]);
        const auto o = model.occupation(res.diagram.v1[k], res.diagram.v2[k]);
        CHECK(res.diagram.n1[k] == o.n1);
        CHECK(res.diagram.n2[k] == o.n2);
    }
}

TEST_CASE("occupations follow the delivered voltages") {
    const auto cfg = small_config(0.40, 0.42, 1e-3);
    const auto res = run_scan(cfg);
    const DqdModel model(cfg.dqd);
    for (std::size_t k = 0; k < res.diagram.n1.size(); ++k) {
        const auto o = model.occupation(res.diagram.v1[k], res.diagram.v2[k]);
        CHECK(res.diagram.n1[k] == o.n1);
        CHECK(res.diagram.n2[k] == o.n2);
    }
}

TEST_CASE("parallel scan equals serial scan") {
    auto cfg = small_config(0.40, 0.43, 1e-3);
    cfg.threads = 1;
    const auto serial = run_scan(cfg);
    cfg.threads = 4;
    const auto parallel = run_scan(cfg);
    CHECK(serial.diagram.v1 == parallel.diagram.v1);
    CHECK(serial.diagram.v2 == parallel.diagram.v2);
    CHECK(serial.diagram.derivative == parallel.diagram.derivative);
    CHECK(serial.ledger == parallel.ledger);
    CHECK(serial.acquisition_time == parallel.acquisition_time);
}

TEST_CASE("finer resolution costs more ledger time") {
    double prev = 0.0;
    for (double step : {1e-3, 1e-4, 1e-5}) {
        const auto res = run_scan(small_config(0.40, 0.402, step));
        CHECK(res.acquisition_time > prev);
        prev = res.acquisition_time;
    }
}

TEST_CASE("sampled mode keeps the axis cap") {
    auto cfg = small_config(0.30, 0.40, 1e-4);
    cfg.max_pixels_per_axis = 20;
    const auto res = run_scan(cfg);
    CHECK(res.mode == ScanMode::sampled);
    CHECK(res.requested.n1 == 1001);
    CHECK(res.diagram.grid.n1 <= 20);
    CHECK(res.diagram.grid.n2 <= 20);
    CHECK(res.acquisition_time > res.ledger.cumulative_time());
}

TEST_CASE("outputs are byte-identical across runs and listed in the manifest") {
    auto cfg = small_config(0.40, 0.43, 1e-3);
    const auto a = fs::temp_directory_path() / "cryodc_scan_a";
    const auto b = fs::temp_directory_path() / "cryodc_scan_b";
    fs::remove_all(a);
    fs::remove_all(b);
    const auto ma = write_scan_outputs(run_scan(cfg), cfg, a.string(), 0.1);
    const auto mb = write_scan_outputs(run_scan(cfg), cfg, b.string(), 0.2);
    CHECK(ma["files"] == mb["files"]);
    for (const auto& [name, sum] : ma["files"].items()) {
        CHECK(slurp(a / name) == slurp(b / name));
        CHECK(file_checksum((a / name).string()) == sum.get<std::string>());
    }
    CHECK(ma["files"].size() == 5);
    CHECK(fs::exists(a / "manifest.json"));
}
