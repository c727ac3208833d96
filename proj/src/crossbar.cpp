#include "cryodc/crossbar.hpp"

#include <string>

#include "cryodc/error.hpp"

namespace cryodc {

Crossbar::Crossbar(std::size_t rows, std::size_t cols, const DataDrivenParams& params,
                   const VariabilityModel& variability, std::uint64_t seed, double initial_resistance)
    : rows_(rows), cols_(cols) {
    if (rows == 0 || cols == 0) fail("bad-shape", "crossbar needs at least one device");
    params.validate();
    variability.validate();
    devices_.reserve(rows * cols);
    for (std::size_t k = 0; k < rows * cols; ++k)
        devices_.emplace_back(params, variability, derive_seed(seed, k), initial_resistance);
}

std::size_t Crossbar::index_of(Address addr) const {
    if (addr.row >= rows_ || addr.col >= cols_)
        fail("bad-address", "(" + std::to_string(addr.row) + "," + std::to_string(addr.col) + ") outside " +
                                std::to_string(rows_) + "x" + std::to_string(cols_));
    return addr.row * cols_ + addr.col;
}

Address Crossbar::address_of(std::size_t index) const {
    if (index >= devices_.size()) fail("bad-address", "flat index " + std::to_string(index));
    return {index / cols_, index % cols_};
}

std::vector<double> Crossbar::resistances() const {
    std::vector<double> out;
    out.reserve(devices_.size());
    for (const auto& d : devices_) out.push_back(d.resistance);
    return out;
}

std::optional<double> Crossbar::apply_pulse_at(Address addr, const Pulse& pulse) {
    auto& dev = devices_[index_of(addr)];
    if (pulse.kind == PulseKind::read) return read_resistance(dev, pulse);
    apply_write_pulse(dev, pulse);
    return std::nullopt;
}

void Crossbar::write(Address addr, const Pulse& pulse) { apply_write_pulse(devices_[index_of(addr)], pulse); }

double Crossbar::read(Address addr, const Pulse& pulse) { return read_resistance(devices_[index_of(addr)], pulse); }

void Crossbar::reseed(std::uint64_t seed) {
    for (std::size_t k = 0; k < devices_.size(); ++k) devices_[k].rng.reseed(derive_seed(seed, k));
}

void Crossbar::set_variability(const VariabilityModel& variability) {
    variability.validate();
    for (auto& d : devices_) d.variability = variability;
}

double parallel_resistance(std::span<const double> resistances) {
    double conductance = 0.0;
    for (double r : resistances) conductance += 1.0 / r;
    return 1.0 / conductance;
}

double total_resistance(const Crossbar& xbar) {
    double conductance = 0.0;
    for (const auto& d : xbar.devices()) conductance += 1.0 / d.resistance;
    return 1.0 / conductance;
}

nlohmann::json snapshot(const Crossbar& xbar) {
    nlohmann::json j;
    j["rows"] = xbar.rows();
    j["cols"] = xbar.cols();
    j["resistance_Ohm"] = xbar.resistances();
    auto& var = j["variability"] = nlohmann::json::array();
    auto& seeds = j["seeds"] = nlohmann::json::array();
    for (const auto& d : xbar.devices()) {
        var.push_back(d.variability);
        seeds.push_back(d.rng.seed());
    }
    return j;
}

Crossbar restore(const nlohmann::json& snap, const DataDrivenParams& params) {
    const auto rows = snap.at("rows").get<std::size_t>();
    const auto cols = snap.at("cols").get<std::size_t>();
    const auto res = snap.at("resistance_Ohm").get<std::vector<double>>();
    const auto& var = snap.at("variability");
    const auto& seeds = snap.at("seeds");
    if (res.size() != rows * cols || var.size() != res.size() || seeds.size() != res.size())
        fail("bad-snapshot", "array lengths do not match rows*cols");
    Crossbar xbar(rows, cols, params, VariabilityModel::none(), 0, params.r_off);
    for (std::size_t k = 0; k < res.size(); ++k) {
        auto& d = xbar.device(xbar.address_of(k));
        d.resistance = res[k];
        if (res[k] < params.r_on || res[k] > params.r_off)
            fail("bad-snapshot", "resistance outside [r_on, r_off] at index " + std::to_string(k));
        d.variability = var[k].get<VariabilityModel>();
        d.rng.reseed(seeds[k].get<std::uint64_t>());
    }
    return xbar;
}

}  // namespace cryodc
