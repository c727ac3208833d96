#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "cryodc/device.hpp"

namespace cryodc {

struct Address {
    std::size_t row = 0;
    std::size_t col = 0;

    bool operator==(const Address&) const = default;
};

/// Word-line/bit-line array of memristors acting as one parallel feedback
/// resistor. Selection is ideal: a pulse touches only the addressed cell.
class Crossbar {
public:
    Crossbar() = default;

    /// Every device gets a seed derived from `seed` and its flat index.
    Crossbar(std::size_t rows, std::size_t cols, const DataDrivenParams& params,
             const VariabilityModel& variability, std::uint64_t seed, double initial_resistance);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return devices_.size(); }

    /// Row-major position of `addr`; throws Error("bad-address") when out of range.
    std::size_t index_of(Address addr) const;
    Address address_of(std::size_t index) const;

    const MemristorState& device(Address addr) const { return devices_[index_of(addr)]; }
    MemristorState& device(Address addr) { return devices_[index_of(addr)]; }
    std::span<const MemristorState> devices() const noexcept { return devices_; }

    std::vector<double> resistances() const;

    /// Write pulses return nothing, read pulses return the measured value.
    std::optional<double> apply_pulse_at(Address addr, const Pulse& pulse);
    void write(Address addr, const Pulse& pulse);
    double read(Address addr, const Pulse& pulse);

    /// Reseeds every device stream from `seed` (same derivation as the constructor).
    void reseed(std::uint64_t seed);
    void set_variability(const VariabilityModel& variability);

    bool operator==(const Crossbar&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<MemristorState> devices_;
};

/// (sum 1/R)^-1 over all devices.
double total_resistance(const Crossbar& xbar);
double parallel_resistance(std::span<const double> resistances);

nlohmann::json snapshot(const Crossbar& xbar);
Crossbar restore(const nlohmann::json& snap, const DataDrivenParams& params);

}  // namespace cryodc
