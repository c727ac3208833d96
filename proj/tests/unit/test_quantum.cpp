#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "cryodc/error.hpp"
#include "cryodc/quantum.hpp"

using namespace cryodc;

namespace {

// Exhaustive minimum over the (0..n_max)^2 box, first minimum in
// (total, n1) order.
ChargeState brute_ground(const DqdModel& m, double v1, double v2) {
    const int n = m.params().n_max;
    ChargeState best{0, 0};
    double best_u = std::numeric_limits<double>::infinity();
    for (int total = 0; total <= 2 * n; ++total)
        for (int a = std::max(0, total - n); a <= std::min(n, total); ++a) {
            const double u = m.energy({a, total - a}, v1, v2);
            if (u < best_u) {
                best_u = u;
                best = {a, total - a};
            }
        }
    return best;
}

}  // namespace

TEST_CASE("charging energies") {
    const DqdParams p;
    const auto e = charging_energies(p);
    CHECK(e.e_c1 == e.e_c2);
    CHECK(e.e_c1 / elementary_charge == doctest::Approx(25.01e-3).epsilon(1e-3));
    CHECK(e.e_cm / elementary_charge == doctest::Approx(1.556e-3).epsilon(1e-3));
    // Closed form from the capacitance matrix.
    const double c1 = p.c1(), c2 = p.c2(), cm = p.c_m;
    CHECK(e.e_c1 == doctest::Approx(elementary_charge * elementary_charge * c2 / (c1 * c2 - cm * cm)).epsilon(1e-14));
    CHECK(elementary_charge / p.c_g1 == doctest::Approx(0.1556).epsilon(1e-3));
    // No lead or gate capacitance: C1*C2 == c_m^2.
    DqdParams bad = p;
    bad.c_l = bad.c_r = bad.c_g1 = bad.c_g2 = 0.0;
    CHECK_THROWS_AS(charging_energies(bad), Error);
}

TEST_CASE("second differences of U give the charging energies") {
    const DqdModel m{DqdParams{}};
    const auto e = m.energies();
    for (double v1 : {0.0, 0.21, 0.47}) {
        for (double v2 : {0.0, 0.33}) {
            const double d1 = m.energy({3, 2}, v1, v2) + m.energy({1, 2}, v1, v2) - 2 * m.energy({2, 2}, v1, v2);
            const double d2 = m.energy({2, 3}, v1, v2) + m.energy({2, 1}, v1, v2) - 2 * m.energy({2, 2}, v1, v2);
            const double dm = m.energy({3, 3}, v1, v2) - m.energy({3, 2}, v1, v2) - m.energy({2, 3}, v1, v2) +
                              m.energy({2, 2}, v1, v2);
            CHECK(std::abs(d1 - e.e_c1) / e.e_c1 < 1e-9);
            CHECK(std::abs(d2 - e.e_c2) / e.e_c2 < 1e-9);
            CHECK(std::abs(dm - e.e_cm) / e.e_cm < 1e-9);
        }
    }
}

TEST_CASE("ground state equals exhaustive minimum") {
    DqdParams p;
    p.temperature = 0.0;
    const DqdModel m(p);
    for (double v1 = 0.0; v1 < 1.2; v1 += 0.0137)
        for (double v2 = 0.0; v2 < 1.2; v2 += 0.0291) CHECK(m.ground_state(v1, v2) == brute_ground(m, v1, v2));
}

TEST_CASE("gate period") {
    DqdParams p;
    p.temperature = 0.0;
    const DqdModel m(p);
    const double period = elementary_charge / p.c_g1;
    for (double v1 : {0.05, 0.2, 0.37}) {
        const auto a = m.ground_state(v1, 0.3);
        const auto b = m.ground_state(v1 + period, 0.3);
        CHECK(b.n1 == a.n1 + 1);
        CHECK(b.n2 == a.n2);
    }
}

TEST_CASE("no mutual capacitance decouples the dots") {
    DqdParams p;
    p.c_m = 0.0;
    const auto d = stability_diagram(p, GridSpec{0.0, 0.6, 61, 0.0, 0.6, 41}, ideal_provider());
    for (std::size_t j = 1; j < d.grid.n2; ++j)
        for (std::size_t i = 0; i < d.grid.n1; ++i) CHECK(d.n1[d.index(i, j)] == d.n1[d.index(i, 0)]);
    for (std::size_t i = 1; i < d.grid.n1; ++i)
        for (std::size_t j = 0; j < d.grid.n2; ++j) CHECK(d.n2[d.index(i, j)] == d.n2[d.index(0, j)]);
}

TEST_CASE("zero-temperature limit") {
    DqdParams p;
    const DqdModel m(p);
    // Points away from charge-transition lines.
    for (auto [v1, v2] : {std::pair{0.05, 0.05}, {0.25, 0.1}, {0.4, 0.42}, {0.55, 0.2}}) {
        const auto g = m.ground_state(v1, v2);
        for (double t : {1e-3, 1e-4, 1e-6}) {
            const auto o = m.occupation_at(v1, v2, t);
            CHECK(std::abs(o.n1 - g.n1) < 1e-6);
            CHECK(std::abs(o.n2 - g.n2) < 1e-6);
        }
        const auto z = m.occupation_at(v1, v2, 0.0);
        CHECK(z.n1 == g.n1);
        CHECK(z.n2 == g.n2);
    }
    // On a transition line a warm dot sits halfway between the two states.
    p.c_m = 0.0;
    const DqdModel flat(p);
    const double edge = 0.5 * elementary_charge / p.c_g1;
    CHECK(flat.occupation_at(edge, 0.05, 1.0).n1 == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("saturation flag") {
    DqdParams p;
    p.n_max = 2;
    const DqdModel m(p);
    CHECK(m.occupation(1.5, 0.0).saturated);
    CHECK_FALSE(m.occupation(0.1, 0.1).saturated);
}

TEST_CASE("grids and derivatives") {
    const auto g = GridSpec::from_resolution(0.3, 0.65, 0.3, 0.65, 100e-6);
    CHECK(g.n1 == 3501);
    CHECK(g.v1(3500) == doctest::Approx(0.65));
    CHECK_THROWS_AS(GridSpec::from_resolution(0.3, 0.65, 0.3, 0.65, 3e-4), Error);

    const auto d = stability_diagram(DqdParams{}, GridSpec{0.0, 0.7, 141, 0.0, 0.7, 141}, ideal_provider());
    double nonzero = 0;
    for (double x : d.derivative) nonzero += x > 0 ? 1 : 0;
    // Lines are thin: a small fraction of pixels carries the derivative.
    CHECK(nonzero > 0);
    CHECK(nonzero < 0.2 * d.derivative.size());
    // Honeycomb with several charge cells.
    CHECK(count_plateaus(d) >= 9);

    StabilityDiagram bad = d;
    std::swap(bad.v1[0], bad.v1[1]);
    CHECK_THROWS_AS(differentiate(bad, DerivativeAxes::delivered), Error);
    CHECK_NOTHROW(differentiate(bad, DerivativeAxes::nominal));
}

TEST_CASE("plateau count on a hand-built map") {
    StabilityDiagram d;
    d.grid = GridSpec{0, 1, 3, 0, 1, 2};
    d.n1 = {0, 0, 1, 1, 0, 1};
    d.n2 = {0, 0, 0, 0, 0, 0};
    // Cells: {0,1,4}, {2,5}, {3}.
    CHECK(count_plateaus(d) == 3);
}
