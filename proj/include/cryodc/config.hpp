#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cryodc/device.hpp"
#include "cryodc/quantum.hpp"
#include "cryodc/source.hpp"
#include "cryodc/tuner.hpp"

namespace cryodc {

/// Gate-voltage window of a stability-diagram scan.
struct ScanWindow {
    double v1_min = 0.30;
    double v1_max = 0.65;
    double v2_min = 0.30;
    double v2_max = 0.65;
    double resolution = 100e-6;

    GridSpec grid() const { return GridSpec::from_resolution(v1_min, v1_max, v2_min, v2_max, resolution); }
};

struct ExperimentConfig {
    /// Empty: built-in 4.2 K parameter set.
    std::string params_file;
    DataDrivenParams params;
    DcSourceSpec spec;
    TuningPolicy coarse = TuningPolicy::coarse();
    TuningPolicy fine = TuningPolicy::fine();
    VariabilityModel variability = VariabilityModel::typical();
    double initial_resistance = 16.0e3;
    DqdParams dqd;
    ScanWindow window;
    /// Axes above this many points are recorded on a sub-sampled grid and
    /// the acquisition time is extrapolated from the sampled rows.
    std::size_t max_pixels_per_axis = 100;
    std::size_t threads = 0;  // 0: hardware concurrency
    std::uint64_t seed = 1;
    std::string output_dir = "out";

    // Experiment knobs.
    std::vector<double> variability_levels{0.0, 0.01, 0.02, 0.05, 0.10};
    std::size_t repetitions = 100;
    double cooling_budget = 1.5;      // W
    double opamp_overhead = 50e-6;    // W per source
    double servo_v_min = 0.30;
    double servo_v_max = 1.30;
    double servo_step = 1e-3;
    std::size_t staircase_levels = 11;
    std::string staircase_tag = "sim";

    void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Reads a JSON config; a relative params_file resolves against the config's
/// directory. Applies the SIM_SEED environment override. Throws
/// Error("config-error").
ExperimentConfig load_config(const std::string& path);
/// Defaults plus the SIM_SEED override.
ExperimentConfig default_config();
void apply_environment(ExperimentConfig& c);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);
std::string file_checksum(const std::string& path);
/// FNV-1a of the config JSON without output_dir and threads.
std::string config_hash(const ExperimentConfig& c);

}  // namespace cryodc
