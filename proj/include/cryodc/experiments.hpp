#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cryodc/config.hpp"
#include "cryodc/tuner.hpp"

namespace cryodc {

/// Column-named numeric table plus a JSON summary.
struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    nlohmann::json summary = nlohmann::json::object();

    std::vector<double> column(const std::string& name) const;
};

void write_table_csv(const std::string& path, const Table& table);

const std::vector<std::string>& experiment_names();

/// Ideal and empirical resolution for n_m in [1, 9] and n_s in [2, 5].
Table resolution_map(const ExperimentConfig& cfg);
/// Voltage range and ideal resolution against n_m at the configured n_s.
Table range_tradeoff(const ExperimentConfig& cfg);
/// Each state of every device scaled by (1 + level*N(0, 1)), truncated at
/// 4 sigma, `repetitions` times per level. Rows: level, mean and standard
/// deviation of the empirical resolution.
Table variability_sweep(const ExperimentConfig& cfg);
/// Per-repetition metric values of the sweep, in (level, repetition) order.
Table variability_samples(const ExperimentConfig& cfg);

/// `count` targets uniform in conductance across the policy's reachable
/// band, highest resistance first.
std::vector<double> staircase_targets(const DataDrivenParams& params, const TuningPolicy& policy, std::size_t count);

struct StaircaseRun {
    std::vector<double> targets;
    std::vector<ProgramOutcome> outcomes;
    std::vector<double> final_resistance;
    PulseLedger ledger;
};

StaircaseRun run_staircase(const DataDrivenParams& params, const TuningPolicy& policy,
                           const VariabilityModel& variability, std::uint64_t seed, double initial,
                           const std::vector<double>& targets, bool record_trace);

Table multilevel_demo(const ExperimentConfig& cfg, StaircaseRun* run = nullptr);
Table power_budget(const ExperimentConfig& cfg);
/// Servo sweep over [servo_v_min, servo_v_max]; each target is also
/// programmed coarse-only (every device with the coarse policy toward the
/// same configuration) on an identically seeded source.
Table servo_sweep(const ExperimentConfig& cfg);

/// Runs one experiment by name and writes `<name>.csv` (plus extras) and
/// `<name>.json` into `out_dir`. Throws Error("usage-error") for an unknown
/// name.
nlohmann::json run_experiment(const std::string& name, const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace cryodc
