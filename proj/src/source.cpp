#include "cryodc/source.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "cryodc/error.hpp"

namespace cryodc {

void DcSourceSpec::validate() const {
    if (!(v_in > 0.0)) fail("invalid-spec", "v_in must be > 0");
    if (!(r_load > 0.0)) fail("invalid-spec", "r_load must be > 0");
    if (n_m < 1) fail("invalid-spec", "n_m must be >= 1");
    if (n_s < 2) fail("invalid-spec", "n_s must be >= 2");
}

std::pair<std::size_t, std::size_t> DcSourceSpec::crossbar_shape() const {
    std::size_t rows = static_cast<std::size_t>(std::sqrt(static_cast<double>(n_m)));
    while (rows > 1 && n_m % rows != 0) --rows;
    return {rows, n_m / rows};
}

void to_json(nlohmann::json& j, const DcSourceSpec& s) {
    j = nlohmann::json{{"v_in", s.v_in}, {"r_load", s.r_load}, {"n_m", s.n_m}, {"n_s", s.n_s}};
}

void from_json(const nlohmann::json& j, DcSourceSpec& s) {
    s.v_in = j.value("v_in", s.v_in);
    s.r_load = j.value("r_load", s.r_load);
    s.n_m = j.value("n_m", s.n_m);
    s.n_s = j.value("n_s", s.n_s);
    s.validate();
}

void StateDistribution::validate(const DataDrivenParams& params) const {
    if (states.empty()) fail("invalid-distribution", "no devices");
    const auto n_s = states.front().size();
    for (std::size_t k = 0; k < states.size(); ++k) {
        const auto& list = states[k];
        if (list.size() != n_s || n_s < 2)
            fail("invalid-distribution", "device " + std::to_string(k) + " has a different state count");
        for (std::size_t s = 0; s < list.size(); ++s) {
            if (list[s] < params.r_on || list[s] > params.r_off)
                fail("invalid-distribution", "state outside [r_on, r_off] on device " + std::to_string(k));
            if (s > 0 && !(list[s] > list[s - 1]))
                fail("invalid-distribution", "states not strictly increasing on device " + std::to_string(k));
        }
    }
}

void to_json(nlohmann::json& j, const StateDistribution& d) {
    j = nlohmann::json::object();
    for (std::size_t k = 0; k < d.states.size(); ++k) j[std::to_string(k)] = d.states[k];
}

void from_json(const nlohmann::json& j, StateDistribution& d) {
    d.states.assign(j.size(), {});
    for (const auto& [key, value] : j.items()) {
        const auto k = static_cast<std::size_t>(std::stoul(key));
        if (k >= d.states.size()) fail("invalid-distribution", "device keys must be 0..n-1");
        d.states[k] = value.get<std::vector<double>>();
    }
}

double output_voltage(const DcSourceSpec& spec, double total_resistance) {
    return spec.v_in * total_resistance / spec.r_load;
}

double output_voltage(const DcSourceSpec& spec, const Crossbar& xbar) {
    return output_voltage(spec, total_resistance(xbar));
}

double voltage_range(const DcSourceSpec& spec, const DataDrivenParams& params) {
    return spec.v_in * (params.r_off - params.r_on) / (spec.r_load * static_cast<double>(spec.n_m));
}

double ideal_resolution(const DcSourceSpec& spec, const DataDrivenParams& params) {
    // pow in double stays exact for every count this tool can enumerate and
    // degrades gracefully (no integer overflow) beyond.
    const double levels = std::pow(static_cast<double>(spec.n_s), static_cast<double>(spec.n_m));
    return voltage_range(spec, params) / levels;
}

double max_power(const DcSourceSpec& spec, const DataDrivenParams& params) {
    const double current = spec.v_in / spec.r_load;
    return current * current * params.r_off / static_cast<double>(spec.n_m);
}

double instantaneous_power(const DcSourceSpec& spec, double total_resistance) {
    const double current = spec.v_in / spec.r_load;
    return current * current * total_resistance;
}

std::size_t sources_within_budget(const DcSourceSpec& spec, const DataDrivenParams& params, double budget,
                                  double overhead) {
    const double per_source = max_power(spec, params) + overhead;
    if (!(per_source > 0.0) || budget <= 0.0) return 0;
    return static_cast<std::size_t>(std::floor(budget / per_source));
}

StateDistribution shared_distribution(const DcSourceSpec& spec, const DataDrivenParams& params) {
    spec.validate();
    const double g_off = 1.0 / params.r_off;
    const double step = (1.0 / params.r_on - g_off) / static_cast<double>(spec.n_s - 1);
    std::vector<double> list(spec.n_s);
    // Ascending resistance = descending conductance.
    for (std::size_t s = 0; s < spec.n_s; ++s) {
        const auto level = spec.n_s - 1 - s;
        list[s] = level == 0 ? params.r_off : (level == spec.n_s - 1 ? params.r_on : 1.0 / (g_off + step * level));
    }
    return StateDistribution{std::vector<std::vector<double>>(spec.n_m, list)};
}

std::size_t combination_count(const StateDistribution& dist) {
    std::size_t count = 1;
    const auto n_s = dist.states_per_device();
    for (std::size_t k = 0; k < dist.devices(); ++k) {
        if (count > std::numeric_limits<std::size_t>::max() / n_s) return std::numeric_limits<std::size_t>::max();
        count *= n_s;
    }
    return count;
}

StateDistribution build_state_distributions(const DcSourceSpec& spec, const DataDrivenParams& params) {
    spec.validate();
    params.validate();
    const double g_off = 1.0 / params.r_off;
    const double span = 1.0 / params.r_on - g_off;
    const double n_s = static_cast<double>(spec.n_s);
    const auto top = spec.n_s - 1;

    // Level s of device k sits at g_off + s*(base + eta*n_s^w_k) with w_0 =
    // n_m-1 the largest weight. With eta*n_s^n_m = base, sums of equal
    // digit total are separated by the mixed-radix term and sums of
    // different digit totals by at least base - eta*(n_s^n_m - 1) > 0.
    // Device 0 then spans the full window with a uniform step span/top.
    const double base = span / (static_cast<double>(top) * (1.0 + 1.0 / n_s));
    StateDistribution dist;
    dist.states.resize(spec.n_m);
    for (std::size_t k = 0; k < spec.n_m; ++k) {
        const double weight = std::pow(n_s, static_cast<double>(spec.n_m - 1 - k)) / std::pow(n_s, spec.n_m);
        const double step = base * (1.0 + weight);
        auto& list = dist.states[k];
        list.resize(spec.n_s);
        for (std::size_t s = 0; s < spec.n_s; ++s) {
            const auto level = top - s;
            list[s] = level == 0 ? params.r_off : 1.0 / (g_off + step * static_cast<double>(level));
        }
        if (k == 0) list.front() = params.r_on;
    }
    dist.validate(params);

    if (combination_count(dist) <= default_enumeration_limit) {
        const auto table = enumerate_outputs(spec, dist);
        if (const auto hit = find_collision(table)) {
            const auto a = decode_states(hit->first, spec.n_m, spec.n_s);
            const auto b = decode_states(hit->second, spec.n_m, spec.n_s);
            std::string msg = "states ";
            for (auto s : a) msg += std::to_string(s);
            msg += " and ";
            for (auto s : b) msg += std::to_string(s);
            fail("degenerate-distribution", msg + " give the same output");
        }
    }
    return dist;
}

std::vector<std::size_t> decode_states(std::uint32_t code, std::size_t devices, std::size_t n_s) {
    std::vector<std::size_t> states(devices);
    for (std::size_t k = 0; k < devices; ++k) {
        states[k] = code % n_s;
        code /= static_cast<std::uint32_t>(n_s);
    }
    return states;
}

GapStatistics gap_statistics(const std::vector<double>& v) {
    GapStatistics st;
    st.combinations = v.size();
    if (v.empty()) return st;
    st.distinct = 1;
    if (v.size() == 1) return st;

    st.min_gap = std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        const double gap = v[i] - v[i - 1];
        st.min_gap = std::min(st.min_gap, gap);
        st.max_gap = std::max(st.max_gap, gap);
        sum += gap;
        if (gap > collision_tolerance * std::abs(v[i])) ++st.distinct;
    }
    st.mean_gap = sum / static_cast<double>(v.size() - 1);

    const double lo = v.front() + 0.05 * (v.back() - v.front());
    const double hi = v.back() - 0.05 * (v.back() - v.front());
    const auto first = std::lower_bound(v.begin(), v.end(), lo);
    const auto last = std::upper_bound(v.begin(), v.end(), hi);
    if (last - first >= 2) {
        double band_max = 0.0;
        for (auto it = first + 1; it != last; ++it) band_max = std::max(band_max, *it - *(it - 1));
        st.empirical_resolution = band_max;
    } else {
        st.empirical_resolution = st.max_gap;
    }
    return st;
}

OutputTable enumerate_outputs(const DcSourceSpec& spec, const StateDistribution& dist, std::size_t limit) {
    spec.validate();
    const auto devices = dist.devices();
    const auto n_s = dist.states_per_device();
    if (devices == 0 || n_s == 0) fail("invalid-distribution", "empty distribution");
    const auto count = combination_count(dist);
    if (count > limit || count > std::numeric_limits<std::uint32_t>::max())
        fail("enumeration-too-large", std::to_string(count) + " combinations exceed the limit of " +
                                          std::to_string(limit) + "; use sampling");

    std::vector<std::vector<double>> g(devices, std::vector<double>(n_s));
    for (std::size_t k = 0; k < devices; ++k)
        for (std::size_t s = 0; s < n_s; ++s) g[k][s] = 1.0 / dist.states[k][s];

    std::vector<std::pair<double, std::uint32_t>> rows(count);
    std::vector<std::size_t> digit(devices, 0);
    const double gain = spec.v_in / spec.r_load;
    for (std::size_t code = 0; code < count; ++code) {
        double conductance = 0.0;
        for (std::size_t k = 0; k < devices; ++k) conductance += g[k][digit[k]];
        rows[code] = {gain / conductance, static_cast<std::uint32_t>(code)};
        for (std::size_t k = 0; k < devices; ++k) {
            if (++digit[k] < n_s) break;
            digit[k] = 0;
        }
    }
    std::sort(rows.begin(), rows.end());

    OutputTable table;
    table.voltages.resize(count);
    table.codes.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        table.voltages[i] = rows[i].first;
        table.codes[i] = rows[i].second;
    }
    table.stats = gap_statistics(table.voltages);
    return table;
}

GapStatistics output_statistics(const DcSourceSpec& spec, const StateDistribution& dist, std::size_t limit) {
    spec.validate();
    const auto devices = dist.devices();
    const auto n_s = dist.states_per_device();
    if (devices == 0 || n_s == 0) fail("invalid-distribution", "empty distribution");
    const auto count = combination_count(dist);
    if (count > limit)
        fail("enumeration-too-large", std::to_string(count) + " combinations exceed the limit of " +
                                          std::to_string(limit));
    // Build conductance sums device by device; cheaper than re-adding every digit.
    std::vector<double> sums{0.0};
    sums.reserve(count);
    for (std::size_t k = 0; k < devices; ++k) {
        std::vector<double> next;
        next.reserve(sums.size() * n_s);
        for (std::size_t s = 0; s < n_s; ++s) {
            const double g = 1.0 / dist.states[k][s];
            for (double base : sums) next.push_back(base + g);
        }
        sums = std::move(next);
    }
    const double gain = spec.v_in / spec.r_load;
    for (auto& v : sums) v = gain / v;
    std::sort(sums.begin(), sums.end());
    return gap_statistics(sums);
}

std::optional<std::pair<std::uint32_t, std::uint32_t>> find_collision(const OutputTable& table) {
    const auto& v = table.voltages;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] - v[i - 1] <= collision_tolerance * std::abs(v[i])) return std::pair{table.codes[i - 1], table.codes[i]};
    return std::nullopt;
}

Configuration lookup_configuration(const StateDistribution& dist, const OutputTable& table, double target) {
    if (table.voltages.empty()) fail("invalid-distribution", "empty output table");
    if (!(target >= table.min() && target <= table.max()))
        fail("target-out-of-range", "target " + std::to_string(target) + " V outside [" +
                                        std::to_string(table.min()) + ", " + std::to_string(table.max()) + "] V");
    const auto& v = table.voltages;
    auto idx = static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), target) - v.begin());
    if (idx > 0 && (idx == v.size() || target - v[idx - 1] <= v[idx] - target)) --idx;

    Configuration cfg;
    cfg.voltage = v[idx];
    cfg.states = decode_states(table.codes[idx], dist.devices(), dist.states_per_device());
    cfg.resistances.resize(dist.devices());
    for (std::size_t k = 0; k < dist.devices(); ++k) cfg.resistances[k] = dist.states[k][cfg.states[k]];
    return cfg;
}

void write_enumeration_csv(const std::string& path, const OutputTable& table) {
    std::ofstream out(path);
    if (!out) fail("io-error", "cannot write " + path);
    out.precision(17);
    out << "index,voltage_V,gap_to_next_V\n";
    for (std::size_t i = 0; i < table.voltages.size(); ++i) {
        out << i << ',' << table.voltages[i] << ',';
        if (i + 1 < table.voltages.size()) out << table.voltages[i + 1] - table.voltages[i];
        out << '\n';
    }
}

}  // namespace cryodc
