#pragma once

#include <string>

#include <json.hpp>

#include "cryodc/rng.hpp"

namespace cryodc {

/// Constants of the Data-Driven memristor model. Field names follow the
/// fitted-parameter table; `t_p`/`t_n` and `a_n` keep the signs they are
/// published with, the dynamics only use their magnitudes.
struct DataDrivenParams {
    double r_on = 1.8e3;
    double r_off = 16.0e3;
    double a_p = 2.57e2;
    double a_n = -1.01e2;
    double t_p = -1.81;
    double t_n = -5.53e-1;
    // Window/step smoothing constants. Stored for file fidelity, unused by
    // the ohmic read / relaxation dynamics.
    double a_p_win = 3.33e-1;
    double b_p_win = 1.87;
    double a_n_win = 3.33e-1;
    double b_n_win = 1.87;
    double r_p0 = 9.23e3;
    double r_p1 = -6.34e3;
    double r_n0 = -4.59e3;
    double r_n1 = -1.60e4;
    std::string temperature_tag = "4.2K";

    /// Throws Error("invalid-params") when the bound/sign invariants fail.
    void validate() const;

    bool operator==(const DataDrivenParams&) const = default;
};

/// The 4.2 K fitted set.
DataDrivenParams params_4k();

void to_json(nlohmann::json& j, const DataDrivenParams& p);
void from_json(const nlohmann::json& j, DataDrivenParams& p);

DataDrivenParams load_params(const std::string& path);
void save_params(const std::string& path, const DataDrivenParams& p);

enum class PulseKind { write, read };

struct Pulse {
    double amplitude = 0.0;  // V, signed
    double width = 0.0;      // s
    PulseKind kind = PulseKind::write;

    static constexpr double default_write_width = 200e-9;
    static constexpr double default_read_width = 10e-6;
    static constexpr double default_read_amplitude = 0.2;

    static Pulse write(double amplitude, double width = default_write_width) {
        return {amplitude, width, PulseKind::write};
    }
    static Pulse read(double amplitude = default_read_amplitude, double width = default_read_width) {
        return {amplitude, width, PulseKind::read};
    }
};

/// Read noise grows linearly with resistance above r_on; write noise is a
/// multiplicative fractional error on the post-pulse resistance.
struct VariabilityModel {
    double read_sigma_intercept = 0.0;  // Ohm
    double read_sigma_slope = 0.0;      // Ohm per Ohm
    double write_error_fraction = 0.0;

    static VariabilityModel none() { return {}; }
    /// Sub-percent read and write variability used when nothing else is configured.
    static VariabilityModel typical() { return {1.0, 5e-4, 2e-3}; }

    double read_sigma(double resistance, double r_on) const {
        return read_sigma_intercept + read_sigma_slope * (resistance - r_on);
    }
    bool noise_free() const {
        return read_sigma_intercept == 0.0 && read_sigma_slope == 0.0 && write_error_fraction == 0.0;
    }
    void validate() const;

    bool operator==(const VariabilityModel&) const = default;
};

void to_json(nlohmann::json& j, const VariabilityModel& v);
void from_json(const nlohmann::json& j, VariabilityModel& v);

/// Resistance the device relaxes toward under a constant drive. Throws
/// Error("no-switching-direction") for a zero amplitude.
double boundary_resistance(const DataDrivenParams& p, double amplitude);

/// Non-negative relaxation rate (1/(Ohm*s)); zero for a zero amplitude.
double switching_rate(const DataDrivenParams& p, double amplitude);

/// Noise-free closed-form solution of dR/dt = -k*(R - r_b)^2 over one
/// constant-amplitude pulse. Devices already on the near side of the
/// boundary are left untouched.
double relax_resistance(const DataDrivenParams& p, double resistance, double amplitude, double width);

struct MemristorState {
    double resistance = 16.0e3;
    DataDrivenParams params;
    VariabilityModel variability;
    RandomStream rng;

    MemristorState() = default;
    MemristorState(DataDrivenParams p, VariabilityModel v, std::uint64_t seed, double initial);

    bool operator==(const MemristorState&) const = default;
};

/// Applies a write pulse in place. Precondition: pulse.kind == write.
void apply_write_pulse(MemristorState& state, const Pulse& pulse);

/// Returns a (possibly noisy) measurement; the stored resistance is never
/// modified, only the random stream advances.
double read_resistance(MemristorState& state, const Pulse& pulse);

}  // namespace cryodc
