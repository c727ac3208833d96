#include "cryodc/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cryodc/error.hpp"

namespace cryodc {

void ExperimentConfig::validate() const {
    params.validate();
    spec.validate();
    coarse.validate();
    fine.validate();
    variability.validate();
    dqd.validate();
    (void)window.grid();
    if (max_pixels_per_axis < 2) fail("config-error", "max_pixels_per_axis must be >= 2");
    if (repetitions < 1) fail("config-error", "repetitions must be >= 1");
    if (!(servo_step > 0.0) || servo_v_max < servo_v_min) fail("config-error", "bad servo sweep range");
    if (staircase_levels < 1) fail("config-error", "staircase_levels must be >= 1");
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = nlohmann::json{
        {"params_file", c.params_file},
        {"params", c.params},
        {"spec", c.spec},
        {"coarse", c.coarse},
        {"fine", c.fine},
        {"variability", c.variability},
        {"initial_resistance", c.initial_resistance},
        {"dqd", c.dqd},
        {"window",
         {{"v1_min", c.window.v1_min},
          {"v1_max", c.window.v1_max},
          {"v2_min", c.window.v2_min},
          {"v2_max", c.window.v2_max},
          {"resolution", c.window.resolution}}},
        {"max_pixels_per_axis", c.max_pixels_per_axis},
        {"threads", c.threads},
        {"seed", c.seed},
        {"output_dir", c.output_dir},
        {"variability_levels", c.variability_levels},
        {"repetitions", c.repetitions},
        {"cooling_budget", c.cooling_budget},
        {"opamp_overhead", c.opamp_overhead},
        {"servo_v_min", c.servo_v_min},
        {"servo_v_max", c.servo_v_max},
        {"servo_step", c.servo_step},
        {"staircase_levels", c.staircase_levels},
        {"staircase_tag", c.staircase_tag}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    c.params_file = j.value("params_file", c.params_file);
    if (j.contains("params")) c.params = j.at("params").get<DataDrivenParams>();
    if (j.contains("spec")) c.spec = j.at("spec").get<DcSourceSpec>();
    if (j.contains("coarse")) c.coarse = j.at("coarse").get<TuningPolicy>();
    if (j.contains("fine")) c.fine = j.at("fine").get<TuningPolicy>();
    if (j.contains("variability")) c.variability = j.at("variability").get<VariabilityModel>();
    c.initial_resistance = j.value("initial_resistance", c.initial_resistance);
    if (j.contains("dqd")) c.dqd = j.at("dqd").get<DqdParams>();
    if (j.contains("window")) {
        const auto& w = j.at("window");
        c.window.v1_min = w.value("v1_min", c.window.v1_min);
        c.window.v1_max = w.value("v1_max", c.window.v1_max);
        c.window.v2_min = w.value("v2_min", c.window.v2_min);
        c.window.v2_max = w.value("v2_max", c.window.v2_max);
        c.window.resolution = w.value("resolution", c.window.resolution);
    }
    c.max_pixels_per_axis = j.value("max_pixels_per_axis", c.max_pixels_per_axis);
    c.threads = j.value("threads", c.threads);
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.variability_levels = j.value("variability_levels", c.variability_levels);
    c.repetitions = j.value("repetitions", c.repetitions);
    c.cooling_budget = j.value("cooling_budget", c.cooling_budget);
    c.opamp_overhead = j.value("opamp_overhead", c.opamp_overhead);
    c.servo_v_min = j.value("servo_v_min", c.servo_v_min);
    c.servo_v_max = j.value("servo_v_max", c.servo_v_max);
    c.servo_step = j.value("servo_step", c.servo_step);
    c.staircase_levels = j.value("staircase_levels", c.staircase_levels);
    c.staircase_tag = j.value("staircase_tag", c.staircase_tag);
}

void apply_environment(ExperimentConfig& c) {
    if (const char* s = std::getenv("SIM_SEED"); s && *s) {
        char* end = nullptr;
        const auto v = std::strtoull(s, &end, 0);
        if (end == s || *end != '\0') fail("config-error", std::string("SIM_SEED is not an integer: ") + s);
        c.seed = v;
    }
}

ExperimentConfig default_config() {
    ExperimentConfig c;
    apply_environment(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("config-error", "cannot open config " + path);
    ExperimentConfig c;
    try {
        nlohmann::json j;
        in >> j;
        c = j.get<ExperimentConfig>();
    } catch (const nlohmann::json::exception& e) {
        fail("config-error", path + ": " + e.what());
    }
    if (!c.params_file.empty()) {
        std::filesystem::path p(c.params_file);
        if (p.is_relative()) p = std::filesystem::path(path).parent_path() / p;
        c.params_file = p.lexically_normal().string();
        c.params = load_params(c.params_file);
    }
    apply_environment(c);
    c.validate();
    return c;
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

std::string file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("io-error", "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return hex64(fnv1a(ss.str()));
}

std::string config_hash(const ExperimentConfig& c) {
    // Where results go and how many threads compute them do not change them.
    auto j = nlohmann::json(c);
    j.erase("output_dir");
    j.erase("threads");
    return hex64(fnv1a(j.dump()));
}

}  // namespace cryodc
