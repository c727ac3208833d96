#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace cryodc {

constexpr double elementary_charge = 1.602176634e-19;  // C
constexpr double boltzmann = 1.380649e-23;             // J/K

/// Capacitances of a double quantum dot in the constant-interaction picture.
struct DqdParams {
    double c_g1 = 1.03e-18;
    double c_g2 = 1.03e-18;
    double c_m = 4.0e-19;
    double c_l = 5.0e-18;
    double c_r = 5.0e-18;
    double temperature = 1e-3;  // K
    int n_max = 10;

    double c1() const noexcept { return c_l + c_g1 + c_m; }
    double c2() const noexcept { return c_r + c_g2 + c_m; }
    void validate() const;

    bool operator==(const DqdParams&) const = default;
};

void to_json(nlohmann::json& j, const DqdParams& p);
void from_json(const nlohmann::json& j, DqdParams& p);
DqdParams load_dqd_params(const std::string& path);

struct ChargingEnergies {
    double e_c1 = 0.0;  // J
    double e_c2 = 0.0;
    double e_cm = 0.0;
};

/// Throws Error("unphysical-capacitance") when C1*C2 <= c_m^2.
ChargingEnergies charging_energies(const DqdParams& p);

struct ChargeState {
    int n1 = 0;
    int n2 = 0;
    bool operator==(const ChargeState&) const = default;
};

struct Occupation {
    double n1 = 0.0;
    double n2 = 0.0;
    /// Ground state sits on the n_max search boundary; enlarge n_max.
    bool saturated = false;

    double total() const noexcept { return n1 + n2; }
};

/// Evaluates energies and occupations for one parameter set with the
/// charging energies computed once.
class DqdModel {
public:
    explicit DqdModel(const DqdParams& params);

    const DqdParams& params() const noexcept { return params_; }
    const ChargingEnergies& energies() const noexcept { return energies_; }

    /// Electrostatic energy U(N1, N2) in J at gate voltages (v_g1, v_g2).
    double energy(ChargeState state, double v_g1, double v_g2) const;
    /// Lowest-energy state; ties go to smaller N1+N2, then smaller N1.
    ChargeState ground_state(double v_g1, double v_g2) const;
    /// Integer ground state at T = 0, Boltzmann average otherwise.
    Occupation occupation(double v_g1, double v_g2) const;
    Occupation occupation_at(double v_g1, double v_g2, double temperature) const;

private:
    DqdParams params_;
    ChargingEnergies energies_;
};

double total_energy(const DqdParams& p, ChargeState state, double v_g1, double v_g2);
Occupation occupation(const DqdParams& p, double v_g1, double v_g2);

/// Requested gate-voltage grid: n1 points on gate 1 (columns), n2 on gate 2 (rows).
struct GridSpec {
    double v1_min = 0.0;
    double v1_max = 0.0;
    std::size_t n1 = 1;
    double v2_min = 0.0;
    double v2_max = 0.0;
    std::size_t n2 = 1;

    double v1(std::size_t i) const;
    double v2(std::size_t j) const;
    /// Grid with `resolution` spacing; spans must be multiples of it within 1e-6 relative.
    static GridSpec from_resolution(double v1_min, double v1_max, double v2_min, double v2_max, double resolution);
};

/// Delivered (v_g1, v_g2) for requested grid point (i, j) at nominal (v1, v2).
using VoltageProvider = std::function<std::pair<double, double>(std::size_t i, std::size_t j, double v1, double v2)>;

VoltageProvider ideal_provider();

enum class DerivativeAxes {
    /// Local spacing of the delivered voltages; they must increase along each axis.
    delivered,
    /// Spacing of the requested grid.
    nominal,
};

/// Row-major (index j*n1 + i) maps over the requested grid.
struct StabilityDiagram {
    GridSpec grid;
    std::vector<double> v1;
    std::vector<double> v2;
    std::vector<double> n1;
    std::vector<double> n2;
    /// Sum over both dots of |dN/dV_g1| + |dN/dV_g2|, in electrons per volt.
    std::vector<double> derivative;
    std::size_t saturated = 0;

    std::size_t index(std::size_t i, std::size_t j) const { return j * grid.n1 + i; }
};

StabilityDiagram evaluate_occupations(const DqdModel& model, const GridSpec& grid, const VoltageProvider& provider);
/// Fills `derivative`; throws Error("unsorted-axis") for non-increasing delivered axes.
void differentiate(StabilityDiagram& diagram, DerivativeAxes axes);

StabilityDiagram stability_diagram(const DqdParams& p, const GridSpec& grid, const VoltageProvider& provider,
                                   DerivativeAxes axes = DerivativeAxes::delivered);

/// 4-connected regions of constant rounded (N1, N2).
std::size_t count_plateaus(const StabilityDiagram& diagram);

/// Derivative magnitudes as a CSV matrix: one line per gate-2 row, one
/// column per gate-1 point.
void write_derivative_csv(const std::string& path, const StabilityDiagram& diagram);
void write_occupation_csv(const std::string& path, const StabilityDiagram& diagram);
nlohmann::json diagram_sidecar(const StabilityDiagram& diagram, const DqdParams& params,
                               const nlohmann::json& provider);

}  // namespace cryodc
