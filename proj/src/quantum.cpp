#include "cryodc/quantum.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "cryodc/error.hpp"

namespace cryodc {

void DqdParams::validate() const {
    if (!(c_g1 > 0.0 && c_g2 > 0.0 && c_l > 0.0 && c_r > 0.0))
        fail("invalid-dqd", "gate and lead capacitances must be > 0");
    if (c_m < 0.0) fail("invalid-dqd", "c_m must be >= 0");
    if (temperature < 0.0) fail("invalid-dqd", "temperature must be >= 0");
    if (n_max < 1) fail("invalid-dqd", "n_max must be >= 1");
    if (!(c1() * c2() > c_m * c_m)) fail("unphysical-capacitance", "C1*C2 must exceed c_m^2");
}

void to_json(nlohmann::json& j, const DqdParams& p) {
    j = nlohmann::json{{"c_g1", p.c_g1}, {"c_g2", p.c_g2},
                       {"c_m", p.c_m},   {"c_l", p.c_l},
                       {"c_r", p.c_r},   {"temperature", p.temperature},
                       {"n_max", p.n_max}};
}

void from_json(const nlohmann::json& j, DqdParams& p) {
    p.c_g1 = j.value("c_g1", p.c_g1);
    p.c_g2 = j.value("c_g2", p.c_g2);
    p.c_m = j.value("c_m", p.c_m);
    p.c_l = j.value("c_l", p.c_l);
    p.c_r = j.value("c_r", p.c_r);
    p.temperature = j.value("temperature", p.temperature);
    p.n_max = j.value("n_max", p.n_max);
    p.validate();
}

DqdParams load_dqd_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("config-error", "cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail("config-error", path + ": " + e.what());
    }
    return j.get<DqdParams>();
}

ChargingEnergies charging_energies(const DqdParams& p) {
    const double c1 = p.c1();
    const double c2 = p.c2();
    const double det = c1 * c2 - p.c_m * p.c_m;
    if (!(det > 0.0)) fail("unphysical-capacitance", "C1*C2 must exceed c_m^2");
    const double e2 = elementary_charge * elementary_charge;
    return {e2 * c2 / det, e2 * c1 / det, e2 * p.c_m / det};
}

DqdModel::DqdModel(const DqdParams& params) : params_(params), energies_(charging_energies(params)) {
    params_.validate();
}

double DqdModel::energy(ChargeState s, double v_g1, double v_g2) const {
    // Quadratic form in the charge offsets N_i - q_i with q_i = C_gi V_gi / |e|.
    const double d1 = s.n1 - params_.c_g1 * v_g1 / elementary_charge;
    const double d2 = s.n2 - params_.c_g2 * v_g2 / elementary_charge;
    const auto& e = energies_;
    return 0.5 * d1 * d1 * e.e_c1 + 0.5 * d2 * d2 * e.e_c2 + d1 * d2 * e.e_cm;
}

ChargeState DqdModel::ground_state(double v_g1, double v_g2) const {
    ChargeState best;
    double best_u = std::numeric_limits<double>::infinity();
    // Visiting states by increasing N1+N2, then N1, makes strict '<' implement the tie rule.
    for (int total = 0; total <= 2 * params_.n_max; ++total) {
        for (int n1 = std::max(0, total - params_.n_max); n1 <= std::min(total, params_.n_max); ++n1) {
            const ChargeState s{n1, total - n1};
            const double u = energy(s, v_g1, v_g2);
            if (u < best_u) {
                best_u = u;
                best = s;
            }
        }
    }
    return best;
}

Occupation DqdModel::occupation(double v_g1, double v_g2) const {
    return occupation_at(v_g1, v_g2, params_.temperature);
}

Occupation DqdModel::occupation_at(double v_g1, double v_g2, double temperature) const {
    const auto ground = ground_state(v_g1, v_g2);
    Occupation occ;
    occ.saturated = ground.n1 == params_.n_max || ground.n2 == params_.n_max;
    if (temperature <= 0.0) {
        occ.n1 = ground.n1;
        occ.n2 = ground.n2;
        return occ;
    }
    const double kt = boltzmann * temperature;
    const double u0 = energy(ground, v_g1, v_g2);
    double z = 0.0;
    double m1 = 0.0;
    double m2 = 0.0;
    for (int n2 = 0; n2 <= params_.n_max; ++n2) {
        for (int n1 = 0; n1 <= params_.n_max; ++n1) {
            const double w = std::exp(-(energy({n1, n2}, v_g1, v_g2) - u0) / kt);
            z += w;
            m1 += w * n1;
            m2 += w * n2;
        }
    }
    occ.n1 = m1 / z;
    occ.n2 = m2 / z;
    return occ;
}

double total_energy(const DqdParams& p, ChargeState state, double v_g1, double v_g2) {
    return DqdModel(p).energy(state, v_g1, v_g2);
}

Occupation occupation(const DqdParams& p, double v_g1, double v_g2) { return DqdModel(p).occupation(v_g1, v_g2); }

namespace {
double axis_point(double lo, double hi, std::size_t n, std::size_t i) {
    if (n <= 1) return lo;
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
}

std::size_t axis_count(double lo, double hi, double resolution) {
    if (!(resolution > 0.0) || !(hi >= lo)) fail("config-error", "scan window needs max >= min and resolution > 0");
    const double steps = (hi - lo) / resolution;
    const double rounded = std::round(steps);
    if (std::abs(steps - rounded) > 1e-6 * std::max(1.0, rounded))
        fail("config-error", "resolution does not divide the scan window");
    return static_cast<std::size_t>(rounded) + 1;
}
}  // namespace

double GridSpec::v1(std::size_t i) const { return axis_point(v1_min, v1_max, n1, i); }
double GridSpec::v2(std::size_t j) const { return axis_point(v2_min, v2_max, n2, j); }

GridSpec GridSpec::from_resolution(double v1_min, double v1_max, double v2_min, double v2_max, double resolution) {
    return {v1_min, v1_max, axis_count(v1_min, v1_max, resolution), v2_min, v2_max,
            axis_count(v2_min, v2_max, resolution)};
}

VoltageProvider ideal_provider() {
    return [](std::size_t, std::size_t, double v1, double v2) { return std::pair{v1, v2}; };
}

StabilityDiagram evaluate_occupations(const DqdModel& model, const GridSpec& grid, const VoltageProvider& provider) {
    StabilityDiagram d;
    d.grid = grid;
    const auto cells = grid.n1 * grid.n2;
    d.v1.resize(cells);
    d.v2.resize(cells);
    d.n1.resize(cells);
    d.n2.resize(cells);
    for (std::size_t j = 0; j < grid.n2; ++j) {
        for (std::size_t i = 0; i < grid.n1; ++i) {
            const auto k = d.index(i, j);
            const auto [a, b] = provider(i, j, grid.v1(i), grid.v2(j));
            const auto occ = model.occupation(a, b);
            d.v1[k] = a;
            d.v2[k] = b;
            d.n1[k] = occ.n1;
            d.n2[k] = occ.n2;
            if (occ.saturated) ++d.saturated;
        }
    }
    return d;
}

namespace {
// Central difference with local spacing, one-sided at the ends. `x(i)` and
// `y(i)` address one line of the grid.
template <class X, class Y>
double line_derivative(std::size_t i, std::size_t n, X x, Y y) {
    if (n < 2) return 0.0;
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == n ? i : i + 1;
    return (y(hi) - y(lo)) / (x(hi) - x(lo));
}
}  // namespace

void differentiate(StabilityDiagram& d, DerivativeAxes axes) {
    const auto& g = d.grid;
    const bool delivered = axes == DerivativeAxes::delivered;
    if (delivered) {
        for (std::size_t j = 0; j < g.n2; ++j)
            for (std::size_t i = 1; i < g.n1; ++i)
                if (!(d.v1[d.index(i, j)] > d.v1[d.index(i - 1, j)]))
                    fail("unsorted-axis", "delivered gate-1 voltages not increasing in row " + std::to_string(j));
        for (std::size_t i = 0; i < g.n1; ++i)
            for (std::size_t j = 1; j < g.n2; ++j)
                if (!(d.v2[d.index(i, j)] > d.v2[d.index(i, j - 1)]))
                    fail("unsorted-axis", "delivered gate-2 voltages not increasing in column " + std::to_string(i));
    }
    d.derivative.assign(g.n1 * g.n2, 0.0);
    for (std::size_t j = 0; j < g.n2; ++j) {
        for (std::size_t i = 0; i < g.n1; ++i) {
            const auto x1 = [&](std::size_t a) { return delivered ? d.v1[d.index(a, j)] : g.v1(a); };
            const auto x2 = [&](std::size_t b) { return delivered ? d.v2[d.index(i, b)] : g.v2(b); };
            double sum = 0.0;
            for (const auto* occ : {&d.n1, &d.n2}) {
                sum += std::abs(line_derivative(i, g.n1, x1, [&](std::size_t a) { return (*occ)[d.index(a, j)]; }));
                sum += std::abs(line_derivative(j, g.n2, x2, [&](std::size_t b) { return (*occ)[d.index(i, b)]; }));
            }
            d.derivative[d.index(i, j)] = sum;
        }
    }
}

StabilityDiagram stability_diagram(const DqdParams& p, const GridSpec& grid, const VoltageProvider& provider,
                                   DerivativeAxes axes) {
    const DqdModel model(p);
    auto d = evaluate_occupations(model, grid, provider);
    differentiate(d, axes);
    return d;
}

std::size_t count_plateaus(const StabilityDiagram& d) {
    const auto& g = d.grid;
    const auto cells = g.n1 * g.n2;
    std::vector<long> key(cells);
    for (std::size_t k = 0; k < cells; ++k)
        key[k] = std::lround(d.n1[k]) * 100000L + std::lround(d.n2[k]);
    std::vector<char> seen(cells, 0);
    std::vector<std::size_t> stack;
    std::size_t components = 0;
    for (std::size_t start = 0; start < cells; ++start) {
        if (seen[start]) continue;
        ++components;
        seen[start] = 1;
        stack.push_back(start);
        while (!stack.empty()) {
            const auto k = stack.back();
            stack.pop_back();
            const auto i = k % g.n1;
            const auto j = k / g.n1;
            const auto visit = [&](std::size_t n) {
                if (!seen[n] && key[n] == key[k]) {
                    seen[n] = 1;
                    stack.push_back(n);
                }
            };
            if (i > 0) visit(k - 1);
            if (i + 1 < g.n1) visit(k + 1);
            if (j > 0) visit(k - g.n1);
            if (j + 1 < g.n2) visit(k + g.n1);
        }
    }
    return components;
}

namespace {
void write_matrix(const std::string& path, const StabilityDiagram& d, const std::vector<double>& values) {
    std::ofstream out(path);
    if (!out) fail("io-error", "cannot write " + path);
    out.precision(10);
    for (std::size_t j = 0; j < d.grid.n2; ++j) {
        for (std::size_t i = 0; i < d.grid.n1; ++i) {
            if (i) out << ',';
            out << values[d.index(i, j)];
        }
        out << '\n';
    }
}
}  // namespace

void write_derivative_csv(const std::string& path, const StabilityDiagram& d) { write_matrix(path, d, d.derivative); }

void write_occupation_csv(const std::string& path, const StabilityDiagram& d) {
    std::vector<double> total(d.n1.size());
    for (std::size_t k = 0; k < total.size(); ++k) total[k] = d.n1[k] + d.n2[k];
    write_matrix(path, d, total);
}

nlohmann::json diagram_sidecar(const StabilityDiagram& d, const DqdParams& params, const nlohmann::json& provider) {
    const auto e = charging_energies(params);
    return nlohmann::json{
        {"axes",
         {{"v_g1", {{"min", d.grid.v1_min}, {"max", d.grid.v1_max}, {"points", d.grid.n1}}},
          {"v_g2", {{"min", d.grid.v2_min}, {"max", d.grid.v2_max}, {"points", d.grid.n2}}},
          {"layout", "rows = v_g2 ascending, columns = v_g1 ascending"}}},
        {"dqd", params},
        {"charging_energies_eV",
         {{"e_c1", e.e_c1 / elementary_charge}, {"e_c2", e.e_c2 / elementary_charge},
          {"e_cm", e.e_cm / elementary_charge}}},
        {"saturated_pixels", d.saturated},
        {"plateaus", count_plateaus(d)},
        {"provider", provider}};
}

}  // namespace cryodc
