#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cryodc/config.hpp"
#include "cryodc/quantum.hpp"
#include "cryodc/tuner.hpp"

namespace cryodc {

enum class ScanMode {
    /// Every pixel of the requested grid is programmed and recorded.
    exact,
    /// Only every stride-th row is programmed (each across all requested
    /// columns) and every stride-th column recorded, keeping at most
    /// max_pixels_per_axis points per axis. The acquisition time is the
    /// mean walked-row ledger time times the requested row count.
    sampled,
};

const char* to_string(ScanMode mode);

struct ScanResult {
    ScanMode mode = ScanMode::exact;
    GridSpec requested;
    /// Occupations at the delivered voltages on the recorded grid. The
    /// derivative uses the recorded (nominal) grid spacing.
    StabilityDiagram diagram;
    std::vector<double> v1_target;
    std::vector<double> v2_target;
    /// Non-zero where either source missed its target.
    std::vector<std::uint8_t> flags;
    std::size_t flagged = 0;
    /// Pulses actually simulated.
    PulseLedger ledger;
    /// Ledger time of the requested grid: exact in exact mode, extrapolated
    /// in sampled mode.
    double acquisition_time = 0.0;
    /// Mean ledger time of a row set-up (both sources programmed) and of one
    /// in-row step.
    double row_setup_time = 0.0;
    double step_time = 0.0;
    std::size_t plateaus = 0;
};

/// Raster scan with two programmable sources: gate 2 outer (programmed once
/// per row), gate 1 inner (programmed at the row start, then retuned pixel
/// by pixel). Each row starts from fresh source copies seeded with
/// derive_seed(seed, row), so rows may run on any number of threads with
/// identical results.
ScanResult run_scan(const ExperimentConfig& config, std::shared_ptr<const SourceDesign> design = nullptr);

/// 0 ok, 3 when any pixel is flagged.
int scan_exit_code(const ScanResult& result);

/// Writes derivative.csv, occupation.csv, pixels.csv, diagram.json,
/// ledger.json and manifest.json into `dir` (created if needed). The
/// manifest lists every other file with its FNV-1a checksum.
nlohmann::json write_scan_outputs(const ScanResult& result, const ExperimentConfig& config, const std::string& dir,
                                  double wall_clock_seconds);

nlohmann::json ledger_json(const PulseLedger& ledger);

}  // namespace cryodc
