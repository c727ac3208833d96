#include "cryodc/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>

#include "cryodc/error.hpp"

namespace cryodc {

void TuningPolicy::validate() const {
    if (!(v_p_min > 0.0)) fail("invalid-policy", "v_p_min must be > 0");
    if (!(v_n_min < 0.0)) fail("invalid-policy", "v_n_min must be < 0");
    if (!(amp_step > 0.0)) fail("invalid-policy", "amp_step must be > 0");
    if (!(amp_cap >= v_p_min && amp_cap >= -v_n_min)) fail("invalid-policy", "amp_cap below the start amplitudes");
    if (!(tolerance > 0.0 && tolerance < 1.0)) fail("invalid-policy", "tolerance must lie in (0, 1)");
    if (verify_reads < 1) fail("invalid-policy", "verify_reads must be >= 1");
    if (!(write_width > 0.0 && read_width > 0.0)) fail("invalid-policy", "pulse widths must be > 0");
}

TuningPolicy TuningPolicy::for_tag(const std::string& tag) {
    TuningPolicy p;
    if (tag == "4.2K" || tag == "4K") {
        p.v_p_min = 0.4;
        p.v_n_min = -0.6;
    } else if (tag == "300K") {
        p.v_p_min = 0.7;
        p.v_n_min = -0.9;
    } else if (tag == "sim") {
        p.v_p_min = 0.5;
        p.v_n_min = -0.7;
    } else {
        fail("invalid-policy", "unknown policy tag '" + tag + "'");
    }
    return p;
}

TuningPolicy TuningPolicy::coarse() { return for_tag("sim"); }

TuningPolicy TuningPolicy::fine() {
    TuningPolicy p;
    p.v_p_min = 0.005;
    p.v_n_min = -0.005;
    p.amp_step = 0.005;
    p.tolerance = 0.002;
    p.verify_reads = 1;
    p.start = StartMode::predictive;
    return p;
}

void to_json(nlohmann::json& j, const TuningPolicy& p) {
    j = nlohmann::json{{"v_p_min", p.v_p_min},
                       {"v_n_min", p.v_n_min},
                       {"amp_step", p.amp_step},
                       {"amp_cap", p.amp_cap},
                       {"tolerance", p.tolerance},
                       {"max_writes", p.max_writes},
                       {"verify_reads", p.verify_reads},
                       {"write_width", p.write_width},
                       {"read_width", p.read_width},
                       {"read_amplitude", p.read_amplitude},
                       {"start", p.start == StartMode::fixed ? "fixed" : "predictive"}};
}

void from_json(const nlohmann::json& j, TuningPolicy& p) {
    p.v_p_min = j.value("v_p_min", p.v_p_min);
    p.v_n_min = j.value("v_n_min", p.v_n_min);
    p.amp_step = j.value("amp_step", p.amp_step);
    p.amp_cap = j.value("amp_cap", p.amp_cap);
    p.tolerance = j.value("tolerance", p.tolerance);
    p.max_writes = j.value("max_writes", p.max_writes);
    p.verify_reads = j.value("verify_reads", p.verify_reads);
    p.write_width = j.value("write_width", p.write_width);
    p.read_width = j.value("read_width", p.read_width);
    p.read_amplitude = j.value("read_amplitude", p.read_amplitude);
    if (j.contains("start")) {
        const auto mode = j.at("start").get<std::string>();
        if (mode == "fixed")
            p.start = StartMode::fixed;
        else if (mode == "predictive")
            p.start = StartMode::predictive;
        else
            fail("config-error", "unknown start mode '" + mode + "'");
    }
    p.validate();
}

const char* to_string(Phase phase) {
    switch (phase) {
        case Phase::coarse: return "coarse";
        case Phase::fine: return "fine";
        case Phase::verify: return "verify";
    }
    return "?";
}

PulseLedger::PulseLedger(double write_width, double read_width, bool record_trace)
    : write_width_(write_width), read_width_(read_width), record_trace_(record_trace) {}

void PulseLedger::record(Phase phase, const Pulse& pulse, Address device, double resistance_after) {
    auto& counts = phases_[static_cast<std::size_t>(phase)];
    if (pulse.kind == PulseKind::write) {
        if (pulse.width != write_width_) fail("ledger-width-mismatch", "write width differs from the ledger's");
        ++writes_;
        ++counts.writes;
    } else {
        if (pulse.width != read_width_) fail("ledger-width-mismatch", "read width differs from the ledger's");
        ++reads_;
        ++counts.reads;
    }
    if (record_trace_)
        trace_.push_back({writes_ + reads_ - 1, pulse.kind, pulse.amplitude, pulse.width, device, resistance_after});
}

double PulseLedger::cumulative_time() const noexcept {
    return static_cast<double>(writes_) * write_width_ + static_cast<double>(reads_) * read_width_;
}

PulseLedger& PulseLedger::operator+=(const PulseLedger& other) {
    if (other.write_width_ != write_width_ || other.read_width_ != read_width_)
        fail("ledger-width-mismatch", "cannot merge ledgers with different pulse widths");
    const auto offset = writes_ + reads_;
    writes_ += other.writes_;
    reads_ += other.reads_;
    for (std::size_t k = 0; k < phases_.size(); ++k) {
        phases_[k].writes += other.phases_[k].writes;
        phases_[k].reads += other.phases_[k].reads;
    }
    if (record_trace_) {
        for (auto row : other.trace_) {
            row.pulse_index += offset;
            trace_.push_back(row);
        }
    }
    return *this;
}

double ledger_time(const PulseLedger& ledger) { return ledger.cumulative_time(); }

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
    std::ofstream out(path);
    if (!out) fail("io-error", "cannot write " + path);
    out.precision(12);
    out << "pulse_index,kind,amplitude_V,width_s,device_row,device_col,resistance_after_Ohm\n";
    for (const auto& row : trace)
        out << row.pulse_index << ',' << (row.kind == PulseKind::write ? "write" : "read") << ',' << row.amplitude
            << ',' << row.width << ',' << row.device.row << ',' << row.device.col << ',' << row.resistance_after
            << '\n';
}

namespace {

// Amplitude ladder state for one programming call.
class AmplitudeLadder {
public:
    AmplitudeLadder(const TuningPolicy& policy, const DataDrivenParams& model) : policy_(policy), model_(model) {}

    double next(int polarity, double measured, double previous_measured, double target) {
        const double base = polarity > 0 ? policy_.v_p_min : -policy_.v_n_min;
        const auto top = static_cast<long>(std::floor((policy_.amp_cap - base) / policy_.amp_step + 1e-9));
        long k = 0;
        if (policy_.start == StartMode::fixed) {
            k = polarity == polarity_ ? std::min(step_ + 1, top) : 0;
        } else {
            k = predict(polarity, base, top, measured, target);
            const bool stalled = polarity == polarity_ &&
                                 std::abs(measured - target) >= std::abs(previous_measured - target);
            if (stalled && k <= step_) k = std::min(step_ + 1, top);
        }
        polarity_ = polarity;
        step_ = k;
        return polarity * (base + static_cast<double>(k) * policy_.amp_step);
    }

private:
    // Grid index whose model-predicted landing point is closest to target.
    // The landing point moves monotonically toward (and past) the target as
    // the amplitude grows, so bisect for the first index that crosses it.
    long predict(int polarity, double base, long top, double measured, double target) const {
        const auto land = [&](long k) {
            const double amp = polarity * (base + static_cast<double>(k) * policy_.amp_step);
            return relax_resistance(model_, measured, amp, policy_.write_width);
        };
        const auto crossed = [&](long k) { return polarity > 0 ? land(k) <= target : land(k) >= target; };
        if (!crossed(top)) return top;
        long lo = -1;
        long hi = top;
        while (hi - lo > 1) {
            const long mid = (lo + hi) / 2;
            if (crossed(mid))
                hi = mid;
            else
                lo = mid;
        }
        if (lo < 0) return hi;
        return std::abs(land(lo) - target) <= std::abs(land(hi) - target) ? lo : hi;
    }

    const TuningPolicy& policy_;
    const DataDrivenParams& model_;
    int polarity_ = 0;
    long step_ = -1;
};

}  // namespace

ProgramOutcome program_resistance(Crossbar& xbar, Address addr, double target, const TuningPolicy& policy,
                                  PulseLedger& ledger, Phase phase, std::optional<double> known_reading) {
    policy.validate();
    auto& dev = xbar.device(addr);
    if (!(target >= dev.params.r_on && target <= dev.params.r_off))
        fail("target-out-of-range", "resistance target " + std::to_string(target) + " Ohm outside [r_on, r_off]");

    const double low = target * (1.0 - policy.tolerance);
    const double high = target * (1.0 + policy.tolerance);
    const Pulse read_pulse = Pulse::read(policy.read_amplitude, policy.read_width);
    const auto inside = [&](double r) { return r >= low && r <= high; };

    ProgramOutcome out;
    const auto read = [&](Phase tag) {
        const double r = read_resistance(dev, read_pulse);
        ledger.record(tag, read_pulse, addr, r);
        ++out.reads;
        return r;
    };

    AmplitudeLadder ladder(policy, dev.params);
    double r = known_reading ? *known_reading : read(phase);
    double previous = r;
    for (;;) {
        if (inside(r)) {
            double sum = r;
            bool stable = true;
            for (std::size_t i = 1; i < policy.verify_reads; ++i) {
                const double v = read(Phase::verify);
                sum += v;
                stable = stable && inside(v);
            }
            out.status = ProgramOutcome::Status::reached;
            out.measured = sum / static_cast<double>(policy.verify_reads);
            out.verified = stable;
            return out;
        }
        if (out.writes >= policy.max_writes) {
            out.status = ProgramOutcome::Status::budget_exhausted;
            out.measured = r;
            return out;
        }
        const int polarity = r > high ? +1 : -1;
        const Pulse w = Pulse::write(ladder.next(polarity, r, previous, target), policy.write_width);
        apply_write_pulse(dev, w);
        ledger.record(phase, w, addr, dev.resistance);
        ++out.writes;
        previous = r;
        r = read(phase);
    }
}

ReachableBand reachable_band(const DataDrivenParams& params, const TuningPolicy& policy) {
    constexpr double settle_pulses = 50.0;
    const double set_floor = boundary_resistance(params, policy.amp_cap);
    const double reset_ceiling = boundary_resistance(params, -policy.amp_cap);
    const double set_margin = 1.0 / (switching_rate(params, policy.amp_cap) * policy.write_width * settle_pulses);
    const double reset_margin =
        1.0 / (switching_rate(params, -policy.amp_cap) * policy.write_width * settle_pulses);
    ReachableBand band{std::min(set_floor + set_margin, params.r_off), std::max(reset_ceiling - reset_margin, params.r_on)};
    if (band.low > band.high) band.low = band.high = 0.5 * (set_floor + reset_ceiling);
    return band;
}

std::shared_ptr<const SourceDesign> SourceDesign::build(const DcSourceSpec& spec, const DataDrivenParams& params) {
    return build(spec, params, reachable_band(params, TuningPolicy::coarse()));
}

std::shared_ptr<const SourceDesign> SourceDesign::build(const DcSourceSpec& spec, const DataDrivenParams& params,
                                                        const ReachableBand& servo_band) {
    auto design = std::make_shared<SourceDesign>();
    design->spec = spec;
    design->params = params;
    design->distribution = build_state_distributions(spec, params);
    design->table = enumerate_outputs(spec, design->distribution);
    design->servo_band = servo_band;

    const auto& states = design->distribution.states;
    const std::size_t coarse = states.size() - 1;
    const std::size_t n_s = design->distribution.states_per_device();
    // States outside the band are planned at the band edge they settle on.
    std::vector<std::pair<double, std::uint32_t>> sums{{0.0, 0u}};
    std::uint32_t weight = 1;
    for (std::size_t k = 0; k < coarse; ++k) {
        if (sums.size() * n_s > default_enumeration_limit)
            fail("enumeration-too-large", "coarse configuration table exceeds the enumeration limit");
        std::vector<std::pair<double, std::uint32_t>> next;
        next.reserve(sums.size() * n_s);
        for (const auto& [g, code] : sums)
            for (std::size_t s = 0; s < n_s; ++s)
                next.emplace_back(g + 1.0 / servo_band.clamp(states[k][s]),
                                  code + static_cast<std::uint32_t>(s) * weight);
        sums = std::move(next);
        weight *= static_cast<std::uint32_t>(n_s);
    }
    std::sort(sums.begin(), sums.end());
    design->coarse_sums.reserve(sums.size());
    design->coarse_codes.reserve(sums.size());
    for (const auto& [g, code] : sums) {
        design->coarse_sums.push_back(g);
        design->coarse_codes.push_back(code);
    }
    return design;
}

Configuration servo_configuration(const SourceDesign& design, double target, double last_position) {
    const auto& table = design.table;
    if (!(target >= table.min() && target <= table.max()))
        fail("target-out-of-range", "target " + std::to_string(target) + " V outside [" +
                                        std::to_string(table.min()) + ", " + std::to_string(table.max()) + "] V");
    const auto& band = design.servo_band;
    const double g_total = design.spec.v_in / (design.spec.r_load * target);
    const double g_plan = 1.0 / band.high + std::clamp(last_position, 0.0, 1.0) * (1.0 / band.low - 1.0 / band.high);
    const auto& sums = design.coarse_sums;
    const double want = g_total - g_plan;
    auto idx = static_cast<std::size_t>(std::lower_bound(sums.begin(), sums.end(), want) - sums.begin());
    if (idx > 0 && (idx == sums.size() || want - sums[idx - 1] <= sums[idx] - want)) --idx;

    const auto& dist = design.distribution;
    const std::size_t n = dist.devices();
    Configuration cfg;
    cfg.states = decode_states(design.coarse_codes[idx], n - 1, dist.states_per_device());
    cfg.resistances.resize(n);
    for (std::size_t k = 0; k + 1 < n; ++k) cfg.resistances[k] = band.clamp(dist.states[k][cfg.states[k]]);
    const double g_last = g_total - sums[idx];
    cfg.resistances[n - 1] = g_last > 0.0 ? 1.0 / g_last : std::numeric_limits<double>::infinity();
    const auto& last = dist.states[n - 1];
    std::size_t nearest = 0;
    for (std::size_t s = 1; s < last.size(); ++s)
        if (std::abs(1.0 / last[s] - g_last) < std::abs(1.0 / last[nearest] - g_last)) nearest = s;
    cfg.states.push_back(nearest);
    cfg.voltage = target;
    return cfg;
}

const char* to_string(ServoOutcome::Status status) {
    switch (status) {
        case ServoOutcome::Status::reached: return "reached";
        case ServoOutcome::Status::budget_exhausted: return "budget-exhausted";
        case ServoOutcome::Status::uncorrectable: return "uncorrectable";
    }
    return "?";
}

namespace {

// Last-device resistance that completes the parallel sum for `target`.
double corrected_last_resistance(const DcSourceSpec& spec, double target, const std::vector<double>& measured) {
    double g = spec.v_in / (spec.r_load * target);
    for (std::size_t k = 0; k + 1 < measured.size(); ++k) g -= 1.0 / measured[k];
    return g > 0.0 ? 1.0 / g : std::numeric_limits<double>::infinity();
}

void fine_round(const SourceDesign& design, Crossbar& xbar, double target, const TuningPolicy& fine,
                PulseLedger& ledger, std::vector<double>& measured, ServoOutcome& out,
                std::optional<double> known_reading = std::nullopt) {
    const auto& params = design.params;
    const auto last = xbar.size() - 1;
    out.corrected_last = corrected_last_resistance(design.spec, target, measured);
    if (!(out.corrected_last >= params.r_on && out.corrected_last <= params.r_off)) {
        out.status = ServoOutcome::Status::uncorrectable;
        out.diagnostic = "corrected last-device resistance " + std::to_string(out.corrected_last) +
                         " Ohm outside [r_on, r_off]; coarse errors too large";
    }
    const auto band = reachable_band(params, fine);
    const double goal = std::clamp(out.corrected_last, band.low, band.high);
    const auto o = program_resistance(xbar, xbar.address_of(last), goal, fine, ledger, Phase::fine, known_reading);
    measured[last] = o.measured;
    out.writes += o.writes;
    out.reads += o.reads;
    if (!o.reached() && out.status == ServoOutcome::Status::reached)
        out.status = ServoOutcome::Status::budget_exhausted;
}

}  // namespace

ServoOutcome program_voltage(const SourceDesign& design, Crossbar& xbar, double target, const TuningPolicy& coarse,
                             const TuningPolicy& fine, PulseLedger& ledger, std::vector<double>* measured_out,
                             double last_position) {
    if (xbar.size() != design.spec.n_m) fail("bad-shape", "crossbar size differs from the source's n_m");
    const auto cfg = servo_configuration(design, target, last_position);

    ServoOutcome out;
    out.target = target;
    std::vector<double> measured(xbar.size(), 0.0);
    for (std::size_t k = 0; k + 1 < xbar.size(); ++k) {
        const auto o = program_resistance(xbar, xbar.address_of(k), cfg.resistances[k], coarse, ledger, Phase::coarse);
        measured[k] = o.measured;
        out.writes += o.writes;
        out.reads += o.reads;
        if (!o.reached()) ++out.coarse_misses;
    }
    fine_round(design, xbar, target, fine, ledger, measured, out);
    out.achieved = output_voltage(design.spec, xbar);
    if (measured_out) *measured_out = std::move(measured);
    return out;
}

ProgrammableSource::ProgrammableSource(std::shared_ptr<const SourceDesign> design,
                                       const VariabilityModel& variability, std::uint64_t seed,
                                       double initial_resistance)
    : design_(std::move(design)) {
    const auto [rows, cols] = design_->spec.crossbar_shape();
    xbar_ = Crossbar(rows, cols, design_->params, variability, seed, initial_resistance);
    measured_.assign(xbar_.size(), 0.0);
}

ServoOutcome ProgrammableSource::program_voltage(double target, const TuningPolicy& coarse, const TuningPolicy& fine,
                                                 PulseLedger& ledger) {
    return full_program(target, coarse, fine, ledger, 0.5);
}

ServoOutcome ProgrammableSource::full_program(double target, const TuningPolicy& coarse, const TuningPolicy& fine,
                                              PulseLedger& ledger, double last_position) {
    auto out = cryodc::program_voltage(*design_, xbar_, target, coarse, fine, ledger, &measured_, last_position);
    configured_ = true;
    last_target_ = target;
    return out;
}

ServoOutcome ProgrammableSource::retune_voltage(double target, const TuningPolicy& coarse, const TuningPolicy& fine,
                                                PulseLedger& ledger) {
    if (configured_) {
        const auto& table = design_->table;
        if (!(target >= table.min() && target <= table.max()))
            fail("target-out-of-range", "target " + std::to_string(target) + " V outside the source range");
        const double r_last = corrected_last_resistance(design_->spec, target, measured_);
        if (reachable_band(design_->params, fine).contains(r_last)) {
            ServoOutcome out;
            out.target = target;
            out.incremental = true;
            // The last reading already satisfies the new target; no pulse needed.
            if (std::abs(measured_.back() - r_last) <= fine.tolerance * r_last) {
                out.corrected_last = r_last;
                out.achieved = output_voltage();
                last_target_ = target;
                return out;
            }
            fine_round(*design_, xbar_, target, fine, ledger, measured_, out, measured_.back());
            out.achieved = output_voltage();
            last_target_ = target;
            return out;
        }
        // Rising outputs need less last-device conductance: start it near the high-conductance edge.
        const double position = target > last_target_ ? retune_headroom : 1.0 - retune_headroom;
        return full_program(target, coarse, fine, ledger, position);
    }
    return program_voltage(target, coarse, fine, ledger);
}

double ProgrammableSource::output_voltage() const { return cryodc::output_voltage(design_->spec, xbar_); }

}  // namespace cryodc
