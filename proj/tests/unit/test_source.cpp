#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "cryodc/error.hpp"
#include "cryodc/source.hpp"

using namespace cryodc;

namespace {

// Recursive walk over every state tuple, device 0 first.
std::vector<double> brute_force(const DcSourceSpec& spec, const StateDistribution& dist) {
    std::vector<double> out;
    std::function<void(std::size_t, double)> walk = [&](std::size_t k, double g) {
        if (k == dist.devices()) {
            out.push_back(spec.v_in / spec.r_load / g);
            return;
        }
        for (double r : dist.states[k]) walk(k + 1, g + 1.0 / r);
    };
    walk(0, 0.0);
    std::sort(out.begin(), out.end());
    return out;
}

DcSourceSpec spec_of(std::size_t n_m, std::size_t n_s) {
    DcSourceSpec s;
    s.n_m = n_m;
    s.n_s = n_s;
    return s;
}

}  // namespace

TEST_CASE("circuit figures") {
    const auto p = params_4k();
    const DcSourceSpec s;
    CHECK(max_power(s, p) == doctest::Approx(1.7778e-3).epsilon(1e-4));
    CHECK(std::abs(max_power(s, p) - 1.77e-3) / 1.77e-3 < 0.01);
    CHECK(voltage_range(s, p) == doctest::Approx(1.5778).epsilon(1e-4));
    CHECK(ideal_resolution(s, p) == doctest::Approx(1.5778 / 1953125.0).epsilon(1e-4));
    CHECK(ideal_resolution(s, p) <= 1e-6);
    // 1.5 W / (1.778 mW + 50 uW) = 820.6
    CHECK(sources_within_budget(s, p, 1.5, 50e-6) == 820);
    CHECK(sources_within_budget(s, p, 0.0, 50e-6) == 0);
    CHECK(output_voltage(s, 1000.0) == doctest::Approx(1.0));
}

TEST_CASE("enumeration equals brute force") {
    const auto p = params_4k();
    for (std::size_t n_m = 1; n_m <= 4; ++n_m) {
        for (std::size_t n_s = 2; n_s <= 3; ++n_s) {
            CAPTURE(n_m);
            CAPTURE(n_s);
            const auto spec = spec_of(n_m, n_s);
            for (const auto& dist : {shared_distribution(spec, p), build_state_distributions(spec, p)}) {
                const auto table = enumerate_outputs(spec, dist);
                CHECK(table.voltages == brute_force(spec, dist));
                CHECK(std::is_sorted(table.voltages.begin(), table.voltages.end()));
                // Codes decode to the tuple that produced each voltage.
                for (std::size_t i = 0; i < table.voltages.size(); ++i) {
                    const auto st = decode_states(table.codes[i], n_m, n_s);
                    double g = 0.0;
                    for (std::size_t k = 0; k < n_m; ++k) g += 1.0 / dist.states[k][st[k]];
                    CHECK(spec.v_in / spec.r_load / g == table.voltages[i]);
                }
            }
        }
    }
}

TEST_CASE("shared distribution collides, unique one does not") {
    const auto p = params_4k();
    const auto spec = spec_of(3, 3);
    const auto shared = enumerate_outputs(spec, shared_distribution(spec, p));
    CHECK(shared.stats.distinct < shared.stats.combinations);
    CHECK(find_collision(shared).has_value());
    const auto unique = enumerate_outputs(spec, build_state_distributions(spec, p));
    CHECK(unique.stats.distinct == 27);
    CHECK_FALSE(find_collision(unique).has_value());
}

TEST_CASE("9 x 5 unique distribution") {
    const auto p = params_4k();
    const DcSourceSpec spec;
    const auto dist = build_state_distributions(spec, p);
    CHECK_NOTHROW(dist.validate(p));
    CHECK(dist.devices() == 9);
    CHECK(dist.states_per_device() == 5);
    const auto table = enumerate_outputs(spec, dist);
    CHECK(table.stats.combinations == 1953125);
    CHECK(table.stats.distinct == 1953125);
    const auto stats = output_statistics(spec, dist);
    CHECK(stats.distinct == table.stats.distinct);
    CHECK(stats.empirical_resolution == table.stats.empirical_resolution);
    CHECK(table.min() >= 1e-3 * p.r_on / 9.0);
    CHECK(table.min() < 0.25);
    CHECK(table.max() == doctest::Approx(1e-3 * p.r_off / 9.0));
}

TEST_CASE("gap statistics") {
    const std::vector<double> v{0.0, 1.0, 1.0, 3.0, 4.0, 10.0};
    const auto st = gap_statistics(v);
    CHECK(st.combinations == 6);
    CHECK(st.distinct == 5);
    CHECK(st.min_gap == 0.0);
    CHECK(st.max_gap == 6.0);
    CHECK(st.mean_gap == doctest::Approx(2.0));
    // Central band [0.5, 9.5] holds 1, 1, 3, 4.
    CHECK(st.empirical_resolution == 2.0);
}

TEST_CASE("configuration lookup") {
    const auto p = params_4k();
    const auto spec = spec_of(3, 3);
    const auto dist = build_state_distributions(spec, p);
    const auto table = enumerate_outputs(spec, dist);
    const double target = 0.5 * (table.voltages[10] + table.voltages[11]) - 1e-12;
    const auto cfg = lookup_configuration(dist, table, target);
    CHECK(cfg.voltage == table.voltages[10]);
    CHECK(cfg.states.size() == 3);
    CHECK_THROWS_AS(lookup_configuration(dist, table, table.max() * 1.01), Error);
    CHECK_THROWS_AS(lookup_configuration(dist, table, table.min() * 0.99), Error);
}

TEST_CASE("limits and validation") {
    const auto p = params_4k();
    CHECK_THROWS_AS(spec_of(0, 5).validate(), Error);
    const auto spec = spec_of(9, 5);
    CHECK_THROWS_AS(enumerate_outputs(spec, build_state_distributions(spec, p), 1000), Error);
    StateDistribution bad{{{20000.0, 1000.0}}};
    CHECK_THROWS_AS(bad.validate(p), Error);
}
