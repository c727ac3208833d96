#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cryodc/calibrate.hpp"
#include "cryodc/config.hpp"
#include "cryodc/error.hpp"
#include "cryodc/experiments.hpp"
#include "cryodc/scan.hpp"
#include "cryodc/version.hpp"

using namespace cryodc;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_config = 2;

// Any failure while reading or validating the config is a config error.
ExperimentConfig config_from(const std::string& path) {
    try {
        if (!path.empty()) return load_config(path);
        auto cfg = default_config();
        cfg.validate();
        return cfg;
    } catch (const Error& e) {
        if (e.code() == "config-error") throw;
        throw Error("config-error", e.what());
    }
}

int cmd_scan(const std::string& config_path, double resolution, const std::string& out, std::size_t threads) {
    auto cfg = config_from(config_path);
    if (resolution > 0.0) cfg.window.resolution = resolution;
    if (!out.empty()) cfg.output_dir = out;
    if (threads) cfg.threads = threads;
    try {
        cfg.validate();
    } catch (const Error& e) {
        if (e.code() == "config-error") throw;
        throw Error("config-error", e.what());
    }

    const auto start = std::chrono::steady_clock::now();
    const auto res = run_scan(cfg);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto manifest = write_scan_outputs(res, cfg, cfg.output_dir, wall);
    std::cout << nlohmann::json{{"mode", manifest["mode"]},
                                {"acquisition_time_s", res.acquisition_time},
                                {"flagged_pixels", res.flagged},
                                {"plateaus", res.plateaus},
                                {"out", cfg.output_dir}}
                     .dump(2)
              << '\n';
    return scan_exit_code(res);
}

int cmd_experiment(const std::string& name, const std::string& config_path, const std::string& out) {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        std::cerr << "sim: unknown experiment '" << name << "'; expected one of:";
        for (const auto& n : names) std::cerr << ' ' << n;
        std::cerr << '\n';
        return exit_failure;
    }
    const auto cfg = config_from(config_path);
    const auto summary = run_experiment(name, cfg, out.empty() ? cfg.output_dir : out);
    std::cout << summary.dump(2) << '\n';
    return exit_ok;
}

int cmd_fit(const std::string& trace_path, const std::string& protocol_path, const std::string& params_path,
            const std::string& out) {
    const auto protocol = load_protocol(protocol_path);
    const auto trace = read_trace_csv(trace_path);
    const auto reference = params_path.empty() ? params_4k() : load_params(params_path);
    nlohmann::json report;
    int code = exit_ok;
    try {
        report = to_json(fit_params(trace, protocol, reference));
    } catch (const FitError& e) {
        std::cerr << "sim: " << e.what() << '\n';
        report = to_json(e.best());
        code = exit_failure;
    }
    if (!out.empty()) {
        std::ofstream f(out);
        if (!f) fail("io-error", "cannot write " + out);
        f << report.dump(2) << '\n';
    }
    std::cout << report.dump(2) << '\n';
    return code;
}

int cmd_enumerate(std::size_t n_m, std::size_t n_s, const std::string& config_path, const std::string& out) {
    auto cfg = config_from(config_path);
    cfg.spec.n_m = n_m;
    cfg.spec.n_s = n_s;
    try {
        cfg.spec.validate();
    } catch (const Error& e) {
        throw Error("config-error", e.what());
    }
    const auto dist = build_state_distributions(cfg.spec, cfg.params);
    const auto table = enumerate_outputs(cfg.spec, dist);
    if (!out.empty()) write_enumeration_csv(out, table);
    const auto& s = table.stats;
    std::cout << nlohmann::json{{"n_m", n_m},
                                {"n_s", n_s},
                                {"combinations", s.combinations},
                                {"distinct", s.distinct},
                                {"unique", s.distinct == s.combinations},
                                {"v_min_V", table.min()},
                                {"v_max_V", table.max()},
                                {"voltage_range_V", voltage_range(cfg.spec, cfg.params)},
                                {"ideal_resolution_V", ideal_resolution(cfg.spec, cfg.params)},
                                {"min_gap_V", s.min_gap},
                                {"mean_gap_V", s.mean_gap},
                                {"max_gap_V", s.max_gap},
                                {"empirical_resolution_V", s.empirical_resolution},
                                {"distribution", dist}}
                     .dump(2)
              << '\n';
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Memristor DC source and double-quantum-dot simulator"};
    app.set_version_flag("--version", version_string);
    app.require_subcommand(1);

    std::string config_path, out, trace_path, protocol_path, params_path, name;
    double resolution = 0.0;
    std::size_t threads = 0, n_m = 9, n_s = 5;

    auto* scan = app.add_subcommand("scan", "Acquire a stability diagram with two programmable sources");
    scan->add_option("--config", config_path, "Experiment config JSON");
    scan->add_option("--resolution", resolution, "Gate-voltage step (V)");
    scan->add_option("--out", out, "Output directory");
    scan->add_option("--threads", threads, "Worker threads (0: all cores)");

    auto* exp = app.add_subcommand("experiment", "Produce one figure's data table");
    exp->add_option("name", name, "Experiment name")->required();
    exp->add_option("--config", config_path, "Experiment config JSON");
    exp->add_option("--out", out, "Output directory");

    auto* fit = app.add_subcommand("fit", "Fit device parameters to a pulse-train resistance trace");
    fit->add_option("--trace", trace_path, "Trace CSV")->required()->check(CLI::ExistingFile);
    fit->add_option("--protocol", protocol_path, "Protocol JSON")->required()->check(CLI::ExistingFile);
    fit->add_option("--params", params_path, "Reference parameters (window and signs)")->check(CLI::ExistingFile);
    fit->add_option("--out", out, "Write fitted parameters here");

    auto* en = app.add_subcommand("enumerate", "Enumerate all outputs of one source");
    en->add_option("--nm", n_m, "Memristors per source");
    en->add_option("--ns", n_s, "States per memristor");
    en->add_option("--config", config_path, "Experiment config JSON");
    en->add_option("--out", out, "Write the sorted output table as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_failure;
    }

    try {
        if (*scan) return cmd_scan(config_path, resolution, out, threads);
        if (*exp) return cmd_experiment(name, config_path, out);
        if (*fit) return cmd_fit(trace_path, protocol_path, params_path, out);
        if (*en) return cmd_enumerate(n_m, n_s, config_path, out);
    } catch (const Error& e) {
        std::cerr << "sim: " << e.what() << '\n';
        const auto& c = e.code();
        const bool config = c == "config-error" || c == "invalid-params" || c == "invalid-protocol";
        return config ? exit_config : exit_failure;
    } catch (const std::exception& e) {
        std::cerr << "sim: " << e.what() << '\n';
        return exit_failure;
    }
    return exit_failure;
}
