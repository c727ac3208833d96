// One PASS/FAIL line per acceptance criterion; exit status is the number of
// failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "cryodc/calibrate.hpp"
#include "cryodc/config.hpp"
#include "cryodc/experiments.hpp"
#include "cryodc/quantum.hpp"
#include "cryodc/scan.hpp"

using namespace cryodc;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, const std::function<Verdict()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2d %s: %s (%.2f s)\n", v.pass ? "PASS" : "FAIL", id, title, v.detail.c_str(), secs);
    std::fflush(stdout);
    failures += v.pass ? 0 : 1;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

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

double rk4(const DataDrivenParams& p, double r, double v, double width) {
    const double rb = boundary_resistance(p, v);
    const double k = switching_rate(p, v);
    if (!(v > 0 ? r > rb : r < rb)) return r;
    const auto f = [&](double x) { return -k * (x - rb) * std::abs(x - rb); };
    const int steps = 4000;
    const double h = width / steps;
    for (int s = 0; s < steps; ++s) {
        const double k1 = f(r), k2 = f(r + 0.5 * h * k1), k3 = f(r + 0.5 * h * k2), k4 = f(r + h * k3);
        r += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

ExperimentConfig base_config() {
    auto cfg = load_config(CRYODC_DATA_DIR "/default_config.json");
    return cfg;
}

}  // namespace

int main() {
    const auto p = params_4k();
    const DcSourceSpec spec;

    criterion(1, "max power", [&] {
        const double w = max_power(spec, p);
        const double rel = std::abs(w - 1.77e-3) / 1.77e-3;
        return Verdict{rel < 0.01 && std::abs(w - 1.778e-3) < 0.5e-6,
                       fmt("%.4f mW, %.2f%% from 1.77 mW", w * 1e3, rel * 100)};
    });

    criterion(2, "range and ideal resolution", [&] {
        const double dv = voltage_range(spec, p);
        const double dr = ideal_resolution(spec, p);
        const double formula = spec.v_in * (p.r_off - p.r_on) / (spec.r_load * 9.0);
        return Verdict{dv == formula && std::abs(dv - 1.5778) < 5e-5 && dv >= 1.0 && dr <= 1e-6 &&
                           dr == formula / 1953125.0,
                       fmt("range %.4f V, resolution %.4f uV", dv, dr * 1e6)};
    });

    criterion(3, "enumeration oracle", [&] {
        bool equal = true;
        for (std::size_t n_m = 1; n_m <= 4; ++n_m)
            for (std::size_t n_s = 2; n_s <= 3; ++n_s) {
                DcSourceSpec s;
                s.n_m = n_m;
                s.n_s = n_s;
                for (const auto& d : {shared_distribution(s, p), build_state_distributions(s, p)})
                    equal = equal && enumerate_outputs(s, d).voltages == brute_force(s, d);
            }
        const auto dist = build_state_distributions(spec, p);
        dist.validate(p);
        const auto table = enumerate_outputs(spec, dist);
        const bool unique = table.stats.distinct == 1953125 && !find_collision(table);
        return Verdict{equal && unique, fmt("brute force %s, 9x5 distinct %zu of 1953125", equal ? "equal" : "differs",
                                            table.stats.distinct)};
    });

    criterion(4, "multilevel convergence", [&] {
        const auto policy = TuningPolicy::for_tag("sim");
        const auto run = run_staircase(p, policy, VariabilityModel::none(), 1, 16e3,
                                       staircase_targets(p, policy, 11), false);
        std::vector<double> w;
        bool all = true;
        for (const auto& o : run.outcomes) {
            w.push_back(double(o.writes));
            all = all && o.reached();
        }
        std::sort(w.begin(), w.end());
        const double median = w[w.size() / 2];
        return Verdict{all && w.back() <= 200 && median >= 25 && median <= 100,
                       fmt("11 states reached=%s, max %.0f writes, median %.0f (measured devices ~50)", all ? "yes" : "no",
                           w.back(), median)};
    });

    criterion(5, "servo within 2.5%", [&] {
        const auto cfg = base_config();
        const auto t = servo_sweep(cfg);
        const double frac = t.summary["fraction_within"].get<double>();
        return Verdict{frac >= 0.99,
                       fmt("%zu targets %.2f-%.2f V step %.0f mV: %.2f%% within, max error %.3f%%", t.rows.size(),
                           cfg.servo_v_min, cfg.servo_v_max, cfg.servo_step * 1e3, frac * 100,
                           t.summary["max_relative_error"].get<double>() * 100)};
    });

    criterion(6, "variability study", [&] {
        auto cfg = base_config();
        cfg.variability_levels = {0.0, 0.01, 0.02, 0.05, 0.10};
        cfg.repetitions = 100;
        const auto t = variability_sweep(cfg);
        const auto sd = t.column("std_resolution_V");
        const auto mean = t.column("mean_resolution_V");
        std::string d = "mean/sd (mV):";
        for (std::size_t k = 0; k < sd.size(); ++k) d += fmt(" %.1f/%.2f", mean[k] * 1e3, sd[k] * 1e3);
        return Verdict{t.summary["std_nondecreasing"].get<bool>() && t.summary["mean_monotone"].get<bool>(), d};
    });

    criterion(7, "ODE oracle", [&] {
        std::mt19937_64 gen(2024);
        std::uniform_real_distribution<double> amp(-1.2, 1.2), width(1e-9, 10e-6), res(p.r_on, p.r_off);
        double worst = 0.0;
        for (int n = 0; n < 1000; ++n) {
            double v = amp(gen);
            if (v == 0.0) v = 0.5;
            const double r0 = res(gen), w = width(gen);
            const double b = rk4(p, r0, v, w);
            worst = std::max(worst, std::abs(relax_resistance(p, r0, v, w) - b) / b);
        }
        return Verdict{worst < 1e-3, fmt("1000 cases, worst relative difference %.2e", worst)};
    });

    criterion(8, "DQD properties", [&] {
        const DqdParams dp;
        const DqdModel m(dp);
        const auto e = m.energies();
        const bool a = e.e_c1 == e.e_c2;
        const double d2 = m.energy({3, 1}, 0.2, 0.3) + m.energy({1, 1}, 0.2, 0.3) - 2 * m.energy({2, 1}, 0.2, 0.3);
        const double b_err = std::abs(d2 - e.e_c1) / e.e_c1;
        DqdParams free = dp;
        free.c_m = 0.0;
        const auto d = stability_diagram(free, GridSpec{0.0, 0.7, 71, 0.0, 0.7, 71}, ideal_provider());
        bool c = true;
        for (std::size_t j = 0; j < 71; ++j)
            for (std::size_t i = 0; i < 71; ++i) c = c && d.n1[d.index(i, j)] == d.n1[d.index(i, 0)];
        double t_err = 0.0;
        for (auto [v1, v2] : {std::pair{0.05, 0.05}, {0.25, 0.1}, {0.4, 0.42}}) {
            const auto g = m.ground_state(v1, v2);
            const auto o = m.occupation_at(v1, v2, 1e-4);
            t_err = std::max({t_err, std::abs(o.n1 - g.n1), std::abs(o.n2 - g.n2)});
        }
        return Verdict{a && b_err < 1e-9 && c && t_err < 1e-6,
                       fmt("E_C1=E_C2 %s (%.3f meV), 2nd-diff err %.1e, c_m=0 rows independent %s, T->0 err %.1e",
                           a ? "yes" : "no", e.e_c1 / elementary_charge * 1e3, b_err, c ? "yes" : "no", t_err)};
    });

    criterion(9, "acquisition trade-off", [&] {
        auto cfg = base_config();
        std::vector<double> times;
        for (double step : {1e-3, 1e-4, 1e-5}) {
            cfg.window = {0.40, 0.402, 0.40, 0.402, step};
            times.push_back(run_scan(cfg).acquisition_time);
        }
        const bool increasing = times[0] < times[1] && times[1] < times[2];
        cfg = base_config();
        const auto res = run_scan(cfg);
        const double t = res.acquisition_time;
        return Verdict{increasing && t >= 10.0 && t <= 300.0,
                       fmt("2 mV window: %.3g < %.3g < %.3g s; %.2f-%.2f V at 100 uV (%s, %zu flagged): %.1f s",
                           times[0], times[1], times[2], cfg.window.v1_min, cfg.window.v1_max, to_string(res.mode),
                           res.flagged, t)};
    });

    criterion(10, "calibration round trip", [&] {
        const PulseTrainProtocol proto;
        const auto r = fit_params(synthesize_trace(p, proto, VariabilityModel::none(), 1), proto, p);
        double worst = 0.0;
        for (auto [f, ref] : {std::pair{r.params.r_p0, p.r_p0}, {r.params.r_p1, p.r_p1}, {r.params.r_n0, p.r_n0},
                              {r.params.r_n1, p.r_n1}})
            worst = std::max(worst, std::abs(f - ref) / std::abs(ref));
        return Verdict{worst < 0.05, fmt("worst boundary-parameter error %.2e", worst)};
    });

    criterion(11, "scan determinism", [&] {
        const auto root = fs::temp_directory_path() / "cryodc_acceptance";
        fs::remove_all(root);
        fs::create_directories(root);
        const std::string sim = CRYODC_SIM_PATH;
        for (const char* run : {"a", "b"}) {
            const auto cmd = fmt("SIM_SEED=5 \"%s\" scan --config \"%s\" --out \"%s\" > /dev/null", sim.c_str(),
                                 CRYODC_DATA_DIR "/default_config.json", (root / run).c_str());
            if (std::system(cmd.c_str()) != 0) return Verdict{false, "sim scan failed"};
        }
        std::size_t compared = 0;
        for (const auto& entry : fs::directory_iterator(root / "a")) {
            const auto name = entry.path().filename();
            if (name == "manifest.json") continue;
            if (slurp(root / "a" / name) != slurp(root / "b" / name))
                return Verdict{false, "differs: " + name.string()};
            ++compared;
        }
        auto ma = nlohmann::json::parse(slurp(root / "a" / "manifest.json"));
        auto mb = nlohmann::json::parse(slurp(root / "b" / "manifest.json"));
        ma.erase("wall_clock_s");
        mb.erase("wall_clock_s");
        const bool seeded = ma["seed"] == 5;
        return Verdict{compared == 5 && ma == mb && seeded,
                       fmt("%zu files byte-identical, manifests equal apart from wall clock", compared)};
    });

    std::printf("%d failed\n", failures);
    return failures;
}
