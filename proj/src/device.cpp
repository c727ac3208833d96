#include "cryodc/device.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cryodc/error.hpp"

namespace cryodc {

void DataDrivenParams::validate() const {
    if (!(r_on > 0.0 && r_on < r_off)) fail("invalid-params", "require 0 < r_on < r_off");
    if (!(a_p > 0.0 && a_n < 0.0)) fail("invalid-params", "require a_p > 0 and a_n < 0");
    if (t_p == 0.0 || t_n == 0.0) fail("invalid-params", "voltage scales t_p, t_n must be non-zero");
}

DataDrivenParams params_4k() { return DataDrivenParams{}; }

void to_json(nlohmann::json& j, const DataDrivenParams& p) {
    j = nlohmann::json{{"r_on", p.r_on},         {"r_off", p.r_off},     {"a_p", p.a_p},
                       {"a_n", p.a_n},           {"t_p", p.t_p},         {"t_n", p.t_n},
                       {"a_p_win", p.a_p_win},   {"b_p_win", p.b_p_win}, {"a_n_win", p.a_n_win},
                       {"b_n_win", p.b_n_win},   {"r_p0", p.r_p0},       {"r_p1", p.r_p1},
                       {"r_n0", p.r_n0},         {"r_n1", p.r_n1},
                       {"temperature_tag", p.temperature_tag}};
}

void from_json(const nlohmann::json& j, DataDrivenParams& p) {
    const auto req = [&](const char* key) {
        if (!j.contains(key)) fail("config-error", std::string("missing device parameter '") + key + "'");
        return j.at(key).get<double>();
    };
    p.r_on = req("r_on");
    p.r_off = req("r_off");
    p.a_p = req("a_p");
    p.a_n = req("a_n");
    p.t_p = req("t_p");
    p.t_n = req("t_n");
    p.a_p_win = req("a_p_win");
    p.b_p_win = req("b_p_win");
    p.a_n_win = req("a_n_win");
    p.b_n_win = req("b_n_win");
    p.r_p0 = req("r_p0");
    p.r_p1 = req("r_p1");
    p.r_n0 = req("r_n0");
    p.r_n1 = req("r_n1");
    p.temperature_tag = j.value("temperature_tag", std::string("4.2K"));
    p.validate();
}

DataDrivenParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("config-error", "cannot open device parameter file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail("config-error", path + ": " + e.what());
    }
    return j.get<DataDrivenParams>();
}

void save_params(const std::string& path, const DataDrivenParams& p) {
    std::ofstream out(path);
    if (!out) fail("io-error", "cannot write " + path);
    out << nlohmann::json(p).dump(2) << '\n';
}

void VariabilityModel::validate() const {
    if (read_sigma_intercept < 0.0 || read_sigma_slope < 0.0 || write_error_fraction < 0.0)
        fail("invalid-variability", "variability terms must be >= 0");
}

void to_json(nlohmann::json& j, const VariabilityModel& v) {
    j = nlohmann::json{{"read_sigma_intercept", v.read_sigma_intercept},
                       {"read_sigma_slope", v.read_sigma_slope},
                       {"write_error_fraction", v.write_error_fraction}};
}

void from_json(const nlohmann::json& j, VariabilityModel& v) {
    v.read_sigma_intercept = j.value("read_sigma_intercept", 0.0);
    v.read_sigma_slope = j.value("read_sigma_slope", 0.0);
    v.write_error_fraction = j.value("write_error_fraction", 0.0);
    v.validate();
}

double boundary_resistance(const DataDrivenParams& p, double amplitude) {
    if (amplitude == 0.0) fail("no-switching-direction", "boundary resistance undefined at 0 V");
    const double raw = amplitude > 0.0 ? p.r_p0 + p.r_p1 * amplitude : p.r_n0 + p.r_n1 * amplitude;
    return std::clamp(raw, p.r_on, p.r_off);
}

double switching_rate(const DataDrivenParams& p, double amplitude) {
    if (amplitude > 0.0) return std::abs(p.a_p) * std::expm1(amplitude / std::abs(p.t_p));
    if (amplitude < 0.0) return std::abs(p.a_n) * std::expm1(-amplitude / std::abs(p.t_n));
    return 0.0;
}

double relax_resistance(const DataDrivenParams& p, double resistance, double amplitude, double width) {
    if (amplitude == 0.0 || width <= 0.0) return resistance;
    const double target = boundary_resistance(p, amplitude);
    // SET only pulls resistance down, RESET only up.
    const bool far_side = amplitude > 0.0 ? resistance > target : resistance < target;
    if (!far_side) return resistance;
    const double gap = resistance - target;
    const double rate = switching_rate(p, amplitude);
    return target + gap / (1.0 + rate * std::abs(gap) * width);
}

MemristorState::MemristorState(DataDrivenParams p, VariabilityModel v, std::uint64_t seed, double initial)
    : resistance(std::clamp(initial, p.r_on, p.r_off)), params(std::move(p)), variability(v), rng(seed) {}

void apply_write_pulse(MemristorState& state, const Pulse& pulse) {
    if (pulse.kind != PulseKind::write) fail("bad-pulse", "apply_write_pulse needs a write pulse");
    if (pulse.amplitude == 0.0 || pulse.width <= 0.0) return;
    double r = relax_resistance(state.params, state.resistance, pulse.amplitude, pulse.width);
    if (state.variability.write_error_fraction > 0.0)
        r *= 1.0 + state.rng.truncated_normal(state.variability.write_error_fraction);
    state.resistance = std::clamp(r, state.params.r_on, state.params.r_off);
}

double read_resistance(MemristorState& state, const Pulse& pulse) {
    if (pulse.kind != PulseKind::read) fail("bad-pulse", "read_resistance needs a read pulse");
    const double sigma = state.variability.read_sigma(state.resistance, state.params.r_on);
    if (sigma <= 0.0) return state.resistance;
    const double r = state.resistance + sigma * state.rng.normal();
    return std::clamp(r, state.params.r_on, state.params.r_off);
}

}  // namespace cryodc
