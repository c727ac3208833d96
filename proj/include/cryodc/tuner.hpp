#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cryodc/crossbar.hpp"
#include "cryodc/source.hpp"

namespace cryodc {

/// How the first write of a same-polarity run picks its amplitude.
enum class StartMode {
    /// Start at v_p_min / v_n_min and climb by amp_step every write.
    fixed,
    /// Use the controller's device model to pick, before every write, the
    /// amplitude (on the v_min + k*amp_step grid) whose predicted landing
    /// point is closest to the target; climb by amp_step only when the
    /// previous write made no progress.
    predictive,
};

struct TuningPolicy {
    double v_p_min = 0.5;
    double v_n_min = -0.7;
    double amp_step = 0.02;
    double amp_cap = 1.2;
    double tolerance = 0.01;
    std::size_t max_writes = 200;
    std::size_t verify_reads = 20;
    double write_width = Pulse::default_write_width;
    double read_width = Pulse::default_read_width;
    double read_amplitude = Pulse::default_read_amplitude;
    StartMode start = StartMode::fixed;

    void validate() const;

    /// Ladder used for the measured multilevel programming at a temperature
    /// tag ("4.2K", "300K") or for the simulated demo ("sim").
    static TuningPolicy for_tag(const std::string& tag);
    /// Coarse servo round: the simulated-demo ladder at 1 % tolerance.
    static TuningPolicy coarse();
    /// Fine servo round: 5 mV steps, 0.2 % tolerance, model-predictive start.
    static TuningPolicy fine();

    bool operator==(const TuningPolicy&) const = default;
};

void to_json(nlohmann::json& j, const TuningPolicy& p);
void from_json(const nlohmann::json& j, TuningPolicy& p);

enum class Phase { coarse = 0, fine = 1, verify = 2 };

const char* to_string(Phase phase);

struct TraceRow {
    std::size_t pulse_index = 0;
    PulseKind kind = PulseKind::write;
    double amplitude = 0.0;
    double width = 0.0;
    Address device;
    /// Device resistance after a write, measured value for a read.
    double resistance_after = 0.0;

    bool operator==(const TraceRow&) const = default;
};

/// Write/read pulse accounting. All pulses recorded in one ledger share the
/// same write and read widths so the time identity stays exact.
class PulseLedger {
public:
    struct Counts {
        std::size_t writes = 0;
        std::size_t reads = 0;
        bool operator==(const Counts&) const = default;
    };

    explicit PulseLedger(double write_width = Pulse::default_write_width,
                         double read_width = Pulse::default_read_width, bool record_trace = false);

    void record(Phase phase, const Pulse& pulse, Address device, double resistance_after);

    std::size_t write_count() const noexcept { return writes_; }
    std::size_t read_count() const noexcept { return reads_; }
    const Counts& phase(Phase p) const { return phases_[static_cast<std::size_t>(p)]; }
    double write_width() const noexcept { return write_width_; }
    double read_width() const noexcept { return read_width_; }
    /// write_count*write_width + read_count*read_width.
    double cumulative_time() const noexcept;

    bool recording() const noexcept { return record_trace_; }
    const std::vector<TraceRow>& trace() const noexcept { return trace_; }

    /// Adds another ledger's counts (widths must match; traces are appended).
    PulseLedger& operator+=(const PulseLedger& other);

    bool operator==(const PulseLedger&) const = default;

private:
    double write_width_;
    double read_width_;
    bool record_trace_;
    std::size_t writes_ = 0;
    std::size_t reads_ = 0;
    std::array<Counts, 3> phases_{};
    std::vector<TraceRow> trace_;
};

double ledger_time(const PulseLedger& ledger);

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace);

struct ProgramOutcome {
    enum class Status { reached, budget_exhausted };
    Status status = Status::reached;
    std::size_t writes = 0;
    std::size_t reads = 0;
    /// Mean of the verification reads, or the last read when the budget ran out.
    double measured = 0.0;
    /// Every verification read stayed inside the tolerance band.
    bool verified = false;

    bool reached() const noexcept { return status == Status::reached; }
};

/// Closed-loop write/verify programming of one device toward `target`.
/// `phase` tags the loop's pulses in the ledger (coarse or fine). A
/// `known_reading` taken since the device's last write replaces the
/// opening read.
ProgramOutcome program_resistance(Crossbar& xbar, Address addr, double target, const TuningPolicy& policy,
                                  PulseLedger& ledger, Phase phase = Phase::coarse,
                                  std::optional<double> known_reading = std::nullopt);

/// Resistances a policy can settle on within ~50 pulses at its amplitude cap.
struct ReachableBand {
    double low = 0.0;
    double high = 0.0;
    bool contains(double r) const noexcept { return r >= low && r <= high; }
    double clamp(double r) const noexcept { return std::clamp(r, low, high); }
};

ReachableBand reachable_band(const DataDrivenParams& params, const TuningPolicy& policy);

/// Precomputed source: circuit, device model, unique state distribution,
/// the sorted output table, and the sorted conductance sums of the coarse
/// devices (all but the last), each state clamped into `servo_band`.
struct SourceDesign {
    DcSourceSpec spec;
    DataDrivenParams params;
    StateDistribution distribution;
    OutputTable table;
    ReachableBand servo_band;
    std::vector<double> coarse_sums;          // S, ascending
    std::vector<std::uint32_t> coarse_codes;  // mixed radix over devices 0..n_m-2

    static std::shared_ptr<const SourceDesign> build(const DcSourceSpec& spec, const DataDrivenParams& params);
    static std::shared_ptr<const SourceDesign> build(const DcSourceSpec& spec, const DataDrivenParams& params,
                                                     const ReachableBand& servo_band);
};

/// Servo configuration for `target`: coarse-device states from the
/// distribution, clamped into the band, whose conductance sum leaves the last
/// device closest to `last_position` across the conductance span of
/// `servo_band` (0: lowest conductance, 1: highest, 0.5: midpoint). The last
/// entry of `resistances` is that planned last-device resistance, and
/// `states` holds the nearest distribution state for it. Throws
/// Error("target-out-of-range") outside the enumerated output range.
Configuration servo_configuration(const SourceDesign& design, double target, double last_position = 0.5);

struct ServoOutcome {
    enum class Status { reached, budget_exhausted, uncorrectable };
    Status status = Status::reached;
    double target = 0.0;
    double achieved = 0.0;
    /// Corrected last-device resistance before clamping.
    double corrected_last = 0.0;
    /// Coarse round was skipped because the previous configuration still covered the target.
    bool incremental = false;
    std::size_t writes = 0;
    std::size_t reads = 0;
    /// Coarse devices that ran out of writes. Their last reading still feeds
    /// the fine correction, so a miss alone does not fail the servo.
    std::size_t coarse_misses = 0;
    std::string diagnostic;

    double relative_error() const { return std::abs(achieved - target) / std::abs(target); }
};

const char* to_string(ServoOutcome::Status status);

/// Two-round servo: coarse programming of every device but the last toward
/// the nearest precomputed configuration, then fine programming of the last
/// device to the resistance that cancels the measured coarse error. Throws
/// Error("target-out-of-range") when the target lies outside the table.
ServoOutcome program_voltage(const SourceDesign& design, Crossbar& xbar, double target,
                             const TuningPolicy& coarse, const TuningPolicy& fine, PulseLedger& ledger,
                             std::vector<double>* measured = nullptr, double last_position = 0.5);

/// One DC source instance: a crossbar plus the controller's memory of the
/// last measured device resistances.
class ProgrammableSource {
public:
    ProgrammableSource(std::shared_ptr<const SourceDesign> design, const VariabilityModel& variability,
                       std::uint64_t seed, double initial_resistance);

    ServoOutcome program_voltage(double target, const TuningPolicy& coarse, const TuningPolicy& fine,
                                 PulseLedger& ledger);

    /// Keeps the coarse devices when the last device alone can still reach
    /// `target` inside its reachable band; otherwise falls back to a full
    /// program that places the last device at `retune_headroom` of its band
    /// on the side the previous move came from. Issues no pulse when the
    /// last reading of the last device is already within the fine tolerance
    /// of its new target.
    ServoOutcome retune_voltage(double target, const TuningPolicy& coarse, const TuningPolicy& fine,
                                PulseLedger& ledger);

    static constexpr double retune_headroom = 0.85;

    double output_voltage() const;
    const Crossbar& crossbar() const noexcept { return xbar_; }
    Crossbar& crossbar() noexcept { return xbar_; }
    const SourceDesign& design() const noexcept { return *design_; }
    void reseed(std::uint64_t seed) { xbar_.reseed(seed); }

private:
    ServoOutcome full_program(double target, const TuningPolicy& coarse, const TuningPolicy& fine,
                              PulseLedger& ledger, double last_position);

    std::shared_ptr<const SourceDesign> design_;
    Crossbar xbar_;
    std::vector<double> measured_;
    double last_target_ = 0.0;
    bool configured_ = false;
};

}  // namespace cryodc
