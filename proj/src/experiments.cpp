#include "cryodc/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "cryodc/error.hpp"
#include "cryodc/version.hpp"

namespace cryodc {

std::vector<double> Table::column(const std::string& col) const {
    const auto it = std::find(columns.begin(), columns.end(), col);
    if (it == columns.end()) fail("bad-column", "no column '" + col + "' in " + name);
    const auto k = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[k]);
    return out;
}

void write_table_csv(const std::string& path, const Table& t) {
    std::ofstream out(path);
    if (!out) fail("io-error", "cannot write " + path);
    out.precision(12);
    for (std::size_t k = 0; k < t.columns.size(); ++k) out << (k ? "," : "") << t.columns[k];
    out << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t k = 0; k < r.size(); ++k) {
            if (k) out << ',';
            if (std::isfinite(r[k])) out << r[k];
        }
        out << '\n';
    }
}

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"resolution-map", "range-tradeoff", "variability-sweep",
                                                "multilevel-demo", "power-budget",   "servo-sweep"};
    return names;
}

namespace {

std::size_t worker_count(const ExperimentConfig& cfg, std::size_t jobs) {
    const std::size_t hw = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    return std::max<std::size_t>(1, std::min(hw, jobs));
}

// Runs body(i) for i in [0, n) on a small pool; results go to caller-owned slots.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F body) {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t i = next++; i < n; i = next++) body(i);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

Table resolution_map(const ExperimentConfig& cfg) {
    Table t{"resolution-map",
            {"n_m", "n_s", "ideal_resolution_V", "empirical_resolution_V", "max_gap_V", "distinct"},
            {},
            {}};
    for (std::size_t n_m = 1; n_m <= 9; ++n_m) {
        for (std::size_t n_s = 2; n_s <= 5; ++n_s) {
            DcSourceSpec spec = cfg.spec;
            spec.n_m = n_m;
            spec.n_s = n_s;
            const auto dist = build_state_distributions(spec, cfg.params);
            const auto stats = output_statistics(spec, dist);
            t.rows.push_back({double(n_m), double(n_s), ideal_resolution(spec, cfg.params), stats.empirical_resolution,
                              stats.max_gap, double(stats.distinct)});
        }
    }
    DcSourceSpec nine = cfg.spec;
    nine.n_m = 9;
    nine.n_s = 5;
    t.summary = {{"ideal_resolution_9x5_V", ideal_resolution(nine, cfg.params)}, {"target_line_V", 100e-6}};
    return t;
}

Table range_tradeoff(const ExperimentConfig& cfg) {
    Table t{"range-tradeoff", {"n_m", "voltage_range_V", "ideal_resolution_V"}, {}, {}};
    for (std::size_t n_m = 1; n_m <= 9; ++n_m) {
        DcSourceSpec spec = cfg.spec;
        spec.n_m = n_m;
        t.rows.push_back({double(n_m), voltage_range(spec, cfg.params), ideal_resolution(spec, cfg.params)});
    }
    t.summary = {{"n_s", cfg.spec.n_s}};
    return t;
}

Table variability_samples(const ExperimentConfig& cfg) {
    const auto base = build_state_distributions(cfg.spec, cfg.params);
    const auto levels = cfg.variability_levels;
    const std::size_t reps = cfg.repetitions;
    std::vector<double> metric(levels.size() * reps);
    parallel_for(metric.size(), worker_count(cfg, metric.size()), [&](std::size_t job) {
        const auto li = job / reps;
        const auto rep = job % reps;
        RandomStream rng(derive_seed(derive_seed(cfg.seed, 0x7661726961ULL + li), rep));
        auto dist = base;
        for (auto& list : dist.states)
            for (auto& r : list) r *= 1.0 + rng.truncated_normal(levels[li]);
        metric[job] = output_statistics(cfg.spec, dist).empirical_resolution;
    });
    Table t{"variability-samples", {"level", "repetition", "empirical_resolution_V"}, {}, {}};
    for (std::size_t job = 0; job < metric.size(); ++job)
        t.rows.push_back({levels[job / reps], double(job % reps), metric[job]});
    return t;
}

Table variability_sweep(const ExperimentConfig& cfg) {
    const auto samples = variability_samples(cfg);
    const std::size_t reps = cfg.repetitions;
    Table t{"variability-sweep", {"level", "mean_resolution_V", "std_resolution_V"}, {}, {}};
    for (std::size_t li = 0; li < cfg.variability_levels.size(); ++li) {
        std::vector<double> v;
        for (std::size_t r = 0; r < reps; ++r) v.push_back(samples.rows[li * reps + r][2]);
        t.rows.push_back({cfg.variability_levels[li], mean_of(v), stddev_of(v)});
    }
    const auto mean = t.column("mean_resolution_V");
    const auto sd = t.column("std_resolution_V");
    bool sd_up = true, mean_up = true, mean_down = true;
    for (std::size_t k = 1; k < t.rows.size(); ++k) {
        sd_up = sd_up && sd[k] >= sd[k - 1];
        mean_up = mean_up && mean[k] >= mean[k - 1];
        mean_down = mean_down && mean[k] <= mean[k - 1];
    }
    t.summary = {{"repetitions", reps},
                 {"std_nondecreasing", sd_up},
                 {"mean_monotone", mean_up || mean_down},
                 {"metric", "max adjacent gap in the central 90% of the output span"}};
    return t;
}

std::vector<double> staircase_targets(const DataDrivenParams& params, const TuningPolicy& policy, std::size_t count) {
    const auto band = reachable_band(params, policy);
    std::vector<double> out;
    const double g_lo = 1.0 / band.high;
    const double g_hi = 1.0 / band.low;
    for (std::size_t k = 0; k < count; ++k) {
        const double f = count == 1 ? 0.5 : static_cast<double>(k) / static_cast<double>(count - 1);
        out.push_back(1.0 / (g_lo + f * (g_hi - g_lo)));
    }
    return out;
}

StaircaseRun run_staircase(const DataDrivenParams& params, const TuningPolicy& policy,
                           const VariabilityModel& variability, std::uint64_t seed, double initial,
                           const std::vector<double>& targets, bool record_trace) {
    StaircaseRun run;
    run.targets = targets;
    run.ledger = PulseLedger(policy.write_width, policy.read_width, record_trace);
    Crossbar xbar(1, 1, params, variability, seed, initial);
    for (double target : targets) {
        run.outcomes.push_back(program_resistance(xbar, {0, 0}, target, policy, run.ledger));
        run.final_resistance.push_back(xbar.device({0, 0}).resistance);
    }
    return run;
}

Table multilevel_demo(const ExperimentConfig& cfg, StaircaseRun* keep) {
    const auto policy = TuningPolicy::for_tag(cfg.staircase_tag);
    auto run = run_staircase(cfg.params, policy, cfg.variability, cfg.seed, cfg.initial_resistance,
                             staircase_targets(cfg.params, policy, cfg.staircase_levels), true);
    Table t{"multilevel-demo", {"state", "target_Ohm", "measured_Ohm", "final_Ohm", "writes", "reads", "reached"}, {}, {}};
    std::vector<double> writes;
    for (std::size_t k = 0; k < run.targets.size(); ++k) {
        const auto& o = run.outcomes[k];
        t.rows.push_back({double(k), run.targets[k], o.measured, run.final_resistance[k], double(o.writes),
                          double(o.reads), o.reached() ? 1.0 : 0.0});
        writes.push_back(double(o.writes));
    }
    auto sorted = writes;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted.empty() ? 0.0
                                         : (sorted.size() % 2 ? sorted[sorted.size() / 2]
                                                              : 0.5 * (sorted[sorted.size() / 2 - 1] +
                                                                       sorted[sorted.size() / 2]));
    t.summary = {{"policy", policy},
                 {"median_writes", median},
                 {"max_writes", sorted.empty() ? 0.0 : sorted.back()},
                 {"ledger_time_s", run.ledger.cumulative_time()}};
    if (keep) *keep = std::move(run);
    return t;
}

Table power_budget(const ExperimentConfig& cfg) {
    Table t{"power-budget", {"n_m", "max_power_W", "sources_within_budget"}, {}, {}};
    for (std::size_t n_m = 1; n_m <= 9; ++n_m) {
        DcSourceSpec spec = cfg.spec;
        spec.n_m = n_m;
        t.rows.push_back({double(n_m), max_power(spec, cfg.params),
                          double(sources_within_budget(spec, cfg.params, cfg.cooling_budget, cfg.opamp_overhead))});
    }
    t.summary = {{"cooling_budget_W", cfg.cooling_budget},
                 {"opamp_overhead_W", cfg.opamp_overhead},
                 {"n_m", cfg.spec.n_m},
                 {"max_power_W", max_power(cfg.spec, cfg.params)},
                 {"sources", sources_within_budget(cfg.spec, cfg.params, cfg.cooling_budget, cfg.opamp_overhead)}};
    return t;
}

Table servo_sweep(const ExperimentConfig& cfg) {
    const auto design = SourceDesign::build(cfg.spec, cfg.params);
    const auto count = static_cast<std::size_t>(std::floor((cfg.servo_v_max - cfg.servo_v_min) / cfg.servo_step + 1e-9)) + 1;
    ProgrammableSource servo(design, cfg.variability, derive_seed(cfg.seed, 0), cfg.initial_resistance);
    const auto [rows, cols] = cfg.spec.crossbar_shape();
    Crossbar coarse_only(rows, cols, cfg.params, cfg.variability, derive_seed(cfg.seed, 0), cfg.initial_resistance);
    PulseLedger ledger(cfg.coarse.write_width, cfg.coarse.read_width);
    PulseLedger coarse_ledger(cfg.coarse.write_width, cfg.coarse.read_width);

    Table t{"servo-sweep",
            {"target_V", "achieved_V", "relative_error", "status", "writes", "reads", "coarse_only_V",
             "coarse_only_error"},
            {},
            {}};
    std::size_t within = 0;
    double worst = 0.0, worst_coarse = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        const double target = cfg.servo_v_min + static_cast<double>(k) * cfg.servo_step;
        const auto o = servo.program_voltage(target, cfg.coarse, cfg.fine, ledger);
        const auto plan = servo_configuration(*design, target);
        for (std::size_t d = 0; d < coarse_only.size(); ++d)
            program_resistance(coarse_only, coarse_only.address_of(d), design->servo_band.clamp(plan.resistances[d]),
                               cfg.coarse, coarse_ledger);
        const double v_coarse = output_voltage(cfg.spec, coarse_only);
        const double e_coarse = std::abs(v_coarse - target) / target;
        t.rows.push_back({target, o.achieved, o.relative_error(), double(static_cast<int>(o.status)), double(o.writes),
                          double(o.reads), v_coarse, e_coarse});
        within += o.relative_error() <= 0.025 ? 1 : 0;
        worst = std::max(worst, o.relative_error());
        worst_coarse = std::max(worst_coarse, e_coarse);
    }
    t.summary = {{"targets", count},
                 {"within_2_5_percent", within},
                 {"fraction_within", static_cast<double>(within) / static_cast<double>(count)},
                 {"max_relative_error", worst},
                 {"max_coarse_only_error", worst_coarse},
                 {"status_codes", {{"0", "reached"}, {"1", "budget-exhausted"}, {"2", "uncorrectable"}}},
                 {"ledger", {{"writes", ledger.write_count()}, {"reads", ledger.read_count()},
                             {"ledger_time_s", ledger.cumulative_time()}}}};
    return t;
}

nlohmann::json run_experiment(const std::string& name, const ExperimentConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    cfg.validate();
    fs::create_directories(out_dir);
    const auto file = [&](const std::string& leaf) { return (fs::path(out_dir) / leaf).string(); };
    std::vector<std::string> written;
    Table t;
    if (name == "resolution-map") {
        t = resolution_map(cfg);
    } else if (name == "range-tradeoff") {
        t = range_tradeoff(cfg);
    } else if (name == "variability-sweep") {
        const auto samples = variability_samples(cfg);
        write_table_csv(file("variability-samples.csv"), samples);
        written.push_back("variability-samples.csv");
        t = variability_sweep(cfg);
    } else if (name == "multilevel-demo") {
        StaircaseRun run;
        t = multilevel_demo(cfg, &run);
        write_trace_csv(file("multilevel-trace.csv"), run.ledger.trace());
        written.push_back("multilevel-trace.csv");
    } else if (name == "power-budget") {
        t = power_budget(cfg);
    } else if (name == "servo-sweep") {
        t = servo_sweep(cfg);
    } else {
        fail("usage-error", "unknown experiment '" + name + "'");
    }
    write_table_csv(file(name + ".csv"), t);
    written.push_back(name + ".csv");

    nlohmann::json files = nlohmann::json::object();
    for (const auto& leaf : written) files[leaf] = file_checksum(file(leaf));
    nlohmann::json summary{{"experiment", name},
                           {"version", version_string},
                           {"config_hash", config_hash(cfg)},
                           {"seed", cfg.seed},
                           {"summary", t.summary},
                           {"files", files}};
    std::ofstream out(file(name + ".json"));
    out << summary.dump(2) << '\n';
    return summary;
}

}  // namespace cryodc
