#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cryodc/crossbar.hpp"
#include "cryodc/device.hpp"

namespace cryodc {

/// Circuit constants of the programmable-gain DC source.
struct DcSourceSpec {
    double v_in = 1e-3;    // V
    double r_load = 1.0;   // Ohm
    std::size_t n_m = 9;   // memristors in the feedback crossbar
    std::size_t n_s = 5;   // programmed states per memristor

    void validate() const;
    /// Squarest rows x cols factorisation of n_m (3x3 for 9).
    std::pair<std::size_t, std::size_t> crossbar_shape() const;

    bool operator==(const DcSourceSpec&) const = default;
};

void to_json(nlohmann::json& j, const DcSourceSpec& s);
void from_json(const nlohmann::json& j, DcSourceSpec& s);

/// Per-device ordered target resistances, n_s entries each.
struct StateDistribution {
    std::vector<std::vector<double>> states;

    std::size_t devices() const noexcept { return states.size(); }
    std::size_t states_per_device() const noexcept { return states.empty() ? 0 : states.front().size(); }
    /// Checks shape, ordering and bounds against the device window.
    void validate(const DataDrivenParams& params) const;

    bool operator==(const StateDistribution&) const = default;
};

void to_json(nlohmann::json& j, const StateDistribution& d);
void from_json(const nlohmann::json& j, StateDistribution& d);

double output_voltage(const DcSourceSpec& spec, double total_resistance);
double output_voltage(const DcSourceSpec& spec, const Crossbar& xbar);

/// v_in * (r_off - r_on) / (r_load * n_m)
double voltage_range(const DcSourceSpec& spec, const DataDrivenParams& params);
/// voltage_range / n_s^n_m
double ideal_resolution(const DcSourceSpec& spec, const DataDrivenParams& params);
/// Dissipation in the feedback network at the maximum output voltage.
double max_power(const DcSourceSpec& spec, const DataDrivenParams& params);
double instantaneous_power(const DcSourceSpec& spec, double total_resistance);
/// Whole sources that fit in `budget` W when each also burns `overhead` W.
std::size_t sources_within_budget(const DcSourceSpec& spec, const DataDrivenParams& params, double budget,
                                  double overhead);

/// n_s states per device, uniform in conductance from r_off to r_on. Every
/// device gets the same list.
StateDistribution shared_distribution(const DcSourceSpec& spec, const DataDrivenParams& params);

/// Device-unique lists whose n_s^n_m parallel sums are pairwise distinct.
/// All lists start at r_off; device 0 is the shared uniform-conductance
/// list, later devices use a slightly narrower conductance step, weighted
/// so that every state combination maps to its own sum. Throws
/// Error("degenerate-distribution") if verification finds a collision.
StateDistribution build_state_distributions(const DcSourceSpec& spec, const DataDrivenParams& params);

constexpr std::size_t default_enumeration_limit = 2'000'000;

/// Number of combinations n_s^n_m, saturating at SIZE_MAX.
std::size_t combination_count(const StateDistribution& dist);

struct GapStatistics {
    double min_gap = 0.0;
    double mean_gap = 0.0;
    double max_gap = 0.0;
    /// Largest adjacent gap inside the central 90% of the output span.
    double empirical_resolution = 0.0;
    std::size_t distinct = 0;
    std::size_t combinations = 0;
};

/// All combination outputs of a source, sorted ascending. `codes[i]` is the
/// mixed-radix state index (device 0 is the least significant digit) of
/// `voltages[i]`.
struct OutputTable {
    std::vector<double> voltages;
    std::vector<std::uint32_t> codes;
    GapStatistics stats;

    double min() const { return voltages.front(); }
    double max() const { return voltages.back(); }
};

/// Two outputs closer than this relative distance count as one value.
constexpr double collision_tolerance = 1e-12;

GapStatistics gap_statistics(const std::vector<double>& sorted_voltages);

/// Throws Error("enumeration-too-large") above `limit` combinations.
OutputTable enumerate_outputs(const DcSourceSpec& spec, const StateDistribution& dist,
                              std::size_t limit = default_enumeration_limit);

/// Gap statistics of all outputs without keeping the table.
GapStatistics output_statistics(const DcSourceSpec& spec, const StateDistribution& dist,
                                std::size_t limit = default_enumeration_limit);

/// First colliding pair of state codes, if any.
std::optional<std::pair<std::uint32_t, std::uint32_t>> find_collision(const OutputTable& table);

std::vector<std::size_t> decode_states(std::uint32_t code, std::size_t devices, std::size_t n_s);

struct Configuration {
    std::vector<std::size_t> states;
    std::vector<double> resistances;
    double voltage = 0.0;
};

/// Nearest enumerated output to `target`, ties toward the lower voltage.
/// Throws Error("target-out-of-range") outside [table.min(), table.max()].
Configuration lookup_configuration(const StateDistribution& dist, const OutputTable& table, double target);

void write_enumeration_csv(const std::string& path, const OutputTable& table);

}  // namespace cryodc
