#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "cryodc/device.hpp"
#include "cryodc/error.hpp"

using namespace cryodc;

namespace {

// Fixed-step RK4 on dR/dt = -k (R - r_b)|R - r_b|, switched off once the
// device is on the near side of the boundary.
double integrate(const DataDrivenParams& p, double r, double v, double width, int steps = 4000) {
    const double rb = boundary_resistance(p, v);
    const double k = switching_rate(p, v);
    const bool far = v > 0 ? r > rb : r < rb;
    if (!far) return r;
    const auto f = [&](double x) { return -k * (x - rb) * std::abs(x - rb); };
    const double h = width / steps;
    for (int s = 0; s < steps; ++s) {
        const double k1 = f(r);
        const double k2 = f(r + 0.5 * h * k1);
        const double k3 = f(r + 0.5 * h * k2);
        const double k4 = f(r + h * k3);
        r += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return r;
}

}  // namespace

TEST_CASE("4.2 K parameter set") {
    const auto p = params_4k();
    CHECK(p.r_on == 1800.0);
    CHECK(p.r_off == 16000.0);
    CHECK(p.a_p == 257.0);
    CHECK(p.a_n == -101.0);
    CHECK(p.t_p == -1.81);
    CHECK(p.t_n == -0.553);
    CHECK(p.r_p0 == 9230.0);
    CHECK(p.r_p1 == -6340.0);
    CHECK(p.r_n0 == -4590.0);
    CHECK(p.r_n1 == -16000.0);
    CHECK_NOTHROW(p.validate());
}

TEST_CASE("boundary and rate") {
    const auto p = params_4k();
    CHECK(boundary_resistance(p, 1.0) == doctest::Approx(2890.0));
    CHECK(boundary_resistance(p, -1.0) == doctest::Approx(11410.0));
    // Clamped to the window at large drive.
    CHECK(boundary_resistance(p, 2.0) == p.r_on);
    CHECK(boundary_resistance(p, -2.0) == p.r_off);
    CHECK_THROWS_AS(boundary_resistance(p, 0.0), Error);
    CHECK(switching_rate(p, 0.8) == doctest::Approx(257.0 * std::expm1(0.8 / 1.81)));
    CHECK(switching_rate(p, 0.8) == doctest::Approx(142.84).epsilon(1e-4));
    CHECK(switching_rate(p, -0.6) == doctest::Approx(197.90).epsilon(1e-4));
    CHECK(switching_rate(p, 0.0) == 0.0);
}

TEST_CASE("closed-form update") {
    const auto p = params_4k();
    // 9230 Ohm, 1 V, 200 ns: r_b = 2890, k = 257*expm1(1/1.81).
    const double k = 257.0 * std::expm1(1.0 / 1.81);
    const double expected = 2890.0 + 6340.0 / (1.0 + k * 6340.0 * 200e-9);
    CHECK(relax_resistance(p, 9230.0, 1.0, 200e-9) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(relax_resistance(p, 9230.0, 1.0, 200e-9) == doctest::Approx(8001.44).epsilon(1e-5));
    // Near side: untouched.
    CHECK(relax_resistance(p, 2000.0, 1.0, 1e-6) == 2000.0);
    CHECK(relax_resistance(p, 15000.0, -1.0, 1e-6) == 15000.0);
    CHECK(relax_resistance(p, 9000.0, 0.0, 1e-6) == 9000.0);
}

TEST_CASE("closed form matches numerical integration") {
    const auto p = params_4k();
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> amp(-1.2, 1.2), width(1e-9, 10e-6), res(p.r_on, p.r_off);
    double worst = 0.0;
    for (int n = 0; n < 1000; ++n) {
        double v = amp(gen);
        if (std::abs(v) < 1e-3) v = 0.5;
        const double r0 = res(gen), w = width(gen);
        const double a = relax_resistance(p, r0, v, w);
        const double b = integrate(p, r0, v, w);
        worst = std::max(worst, std::abs(a - b) / b);
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("writes stay inside the window and are monotone in width") {
    const auto p = params_4k();
    MemristorState s(p, VariabilityModel::none(), 1, 16e3);
    double prev = s.resistance;
    for (int k = 0; k < 200; ++k) {
        apply_write_pulse(s, Pulse::write(1.2));
        CHECK(s.resistance <= prev);
        CHECK(s.resistance >= p.r_on);
        prev = s.resistance;
    }
    for (int k = 0; k < 200; ++k) {
        apply_write_pulse(s, Pulse::write(-1.2));
        CHECK(s.resistance >= prev);
        CHECK(s.resistance <= p.r_off);
        prev = s.resistance;
    }
    CHECK(relax_resistance(p, 12000.0, 0.9, 1e-6) <= relax_resistance(p, 12000.0, 0.9, 1e-7));
}

TEST_CASE("reads are non-destructive and match the noise model") {
    const auto p = params_4k();
    const VariabilityModel v{20.0, 0.01, 0.0};
    MemristorState s(p, v, 42, 9000.0);
    const int n = 20000;
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < n; ++k) {
        const double r = read_resistance(s, Pulse::read());
        sum += r;
        sq += r * r;
    }
    CHECK(s.resistance == 9000.0);
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    const double sigma = v.read_sigma(9000.0, p.r_on);
    CHECK(std::abs(mean - 9000.0) < 4.0 * sigma / std::sqrt(double(n)));
    CHECK(sd == doctest::Approx(sigma).epsilon(0.03));

    MemristorState quiet(p, VariabilityModel::none(), 1, 9000.0);
    CHECK(read_resistance(quiet, Pulse::read()) == 9000.0);
    CHECK_THROWS_AS(read_resistance(quiet, Pulse::write(1.0)), Error);
    CHECK_THROWS_AS(apply_write_pulse(quiet, Pulse::read()), Error);
}

TEST_CASE("same seed, same trajectory") {
    const auto p = params_4k();
    MemristorState a(p, VariabilityModel::typical(), 99, 16e3), b(p, VariabilityModel::typical(), 99, 16e3);
    for (int k = 0; k < 50; ++k) {
        apply_write_pulse(a, Pulse::write(0.9));
        apply_write_pulse(b, Pulse::write(0.9));
        CHECK(read_resistance(a, Pulse::read()) == read_resistance(b, Pulse::read()));
    }
    CHECK(a == b);
}

TEST_CASE("parameter validation and JSON") {
    auto p = params_4k();
    p.r_on = 20000.0;
    CHECK_THROWS_AS(p.validate(), Error);
    const auto path = std::filesystem::temp_directory_path() / "cryodc_params_test.json";
    save_params(path.string(), params_4k());
    CHECK(load_params(path.string()) == params_4k());
    CHECK(load_params(CRYODC_DATA_DIR "/params_4k.json") == params_4k());
    nlohmann::json j = params_4k();
    j.erase("r_p0");
    CHECK_THROWS_AS(j.get<DataDrivenParams>(), Error);
}
