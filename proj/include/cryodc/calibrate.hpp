#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cryodc/device.hpp"
#include "cryodc/error.hpp"

namespace cryodc {

/// Alternating write/read pulse trains: for each amplitude, `pulses_per_amplitude`
/// write pulses, each followed by one read.
struct PulseTrainProtocol {
    std::vector<double> amplitudes{0.8, -0.8, 0.9, -0.9, 1.0, -1.0, -1.1};
    std::size_t pulses_per_amplitude = 350;
    double write_width = Pulse::default_write_width;
    double read_width = Pulse::default_read_width;
    double read_amplitude = Pulse::default_read_amplitude;
    double initial_resistance = 16.0e3;

    void validate() const;
    std::size_t write_count() const { return amplitudes.size() * pulses_per_amplitude; }
    /// Amplitude of the n-th write (0-based).
    double amplitude_of(std::size_t write_index) const { return amplitudes[write_index / pulses_per_amplitude]; }
};

void to_json(nlohmann::json& j, const PulseTrainProtocol& p);
void from_json(const nlohmann::json& j, PulseTrainProtocol& p);
PulseTrainProtocol load_protocol(const std::string& path);

struct TraceSample {
    std::size_t pulse_index = 0;
    double amplitude = 0.0;  // write amplitude preceding the read; 0 for the initial read
    double width = 0.0;
    double resistance = 0.0;  // Ohm
};

/// Row 0 is the read before any write; row n is the read after write n.
struct ResistanceTrace {
    std::vector<TraceSample> samples;
};

ResistanceTrace read_trace_csv(const std::string& path);
void write_trace_csv(const std::string& path, const ResistanceTrace& trace);

ResistanceTrace synthesize_trace(const DataDrivenParams& params, const PulseTrainProtocol& protocol,
                                 const VariabilityModel& variability, std::uint64_t seed);

/// Magnitude bounds; signs of the fitted parameters are fixed to those of
/// the reference set.
struct FitBounds {
    double resistance_min = 100.0;
    double resistance_max = 1.0e6;
    double rate_min = 1.0;
    double rate_max = 1.0e5;
    double scale_min = 0.1;
    double scale_max = 10.0;
};

constexpr std::size_t fit_parameter_count = 8;
/// Fitted fields, in this order.
constexpr std::array<const char*, fit_parameter_count> fit_parameter_names{"a_p",  "a_n",  "t_p",  "t_n",
                                                                          "r_p0", "r_p1", "r_n0", "r_n1"};

struct FitOptions {
    FitBounds bounds;
    std::size_t starts = 8;
    std::size_t max_iterations = 200;
    /// Converged when the relative cost drop or the step falls below this.
    double tolerance = 1e-10;
};

struct FitReport {
    DataDrivenParams params;
    /// Euclidean norm of the resistance residuals after each write (Ohm).
    double residual_norm = 0.0;
    double rms_residual = 0.0;
    std::size_t iterations = 0;
    std::size_t best_start = 0;
    bool converged = false;
    std::vector<double> start_residuals;
};

nlohmann::json to_json(const FitReport& report);

/// Thrown with code "fit-diverged"; carries the best parameters found.
class FitError : public Error {
public:
    FitError(const std::string& message, FitReport best) : Error("fit-diverged", message), best_(std::move(best)) {}
    const FitReport& best() const noexcept { return best_; }

private:
    FitReport best_;
};

/// Replays `protocol` from the trace's first reading with `params`, noise
/// free; returns the predicted resistance after every write.
std::vector<double> predict_trace(const DataDrivenParams& params, const PulseTrainProtocol& protocol,
                                  double initial_resistance);

double residual_norm(const DataDrivenParams& params, const ResistanceTrace& trace,
                     const PulseTrainProtocol& protocol);

/// Bounded multi-start Levenberg-Marquardt fit of the eight dynamic
/// parameters. `reference` supplies r_on/r_off, the fixed window constants
/// and the parameter signs. Throws Error("underdetermined-protocol") and
/// FitError.
FitReport fit_params(const ResistanceTrace& trace, const PulseTrainProtocol& protocol,
                     const DataDrivenParams& reference = DataDrivenParams{}, const FitOptions& options = {});

}  // namespace cryodc
