#include "cryodc/scan.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "cryodc/error.hpp"
#include "cryodc/version.hpp"

namespace cryodc {

const char* to_string(ScanMode mode) { return mode == ScanMode::exact ? "exact" : "sampled"; }

namespace {

struct RowResult {
    std::vector<double> v1, v2, n1, n2;
    std::vector<std::uint8_t> flags;
    std::size_t saturated = 0;
    PulseLedger ledger;
    double setup_time = 0.0;
};

struct Axis {
    std::size_t stride = 1;
    std::size_t points = 1;
};

Axis sample_axis(std::size_t n, std::size_t cap) {
    if (n <= cap) return {1, n};
    const std::size_t stride = (n - 1 + cap - 2) / (cap - 1);
    return {stride, (n - 1) / stride + 1};
}

struct RowJob {
    const ExperimentConfig& cfg;
    std::shared_ptr<const SourceDesign> design;
    DqdModel model;
    GridSpec requested;
    Axis cols;
};

// Walks every requested column of requested row `j`; occupations are kept
// on the sampled columns only.
RowResult scan_row(const RowJob& job, std::size_t j) {
    const auto& cfg = job.cfg;
    const auto& g = job.requested;
    RowResult row;
    row.ledger = PulseLedger(cfg.coarse.write_width, cfg.coarse.read_width);
    ProgrammableSource gate1(job.design, cfg.variability, derive_seed(cfg.seed, 2 * j), cfg.initial_resistance);
    ProgrammableSource gate2(job.design, cfg.variability, derive_seed(cfg.seed, 2 * j + 1), cfg.initial_resistance);

    const auto o2 = gate2.program_voltage(g.v2(j), cfg.coarse, cfg.fine, row.ledger);
    const bool row_flag = o2.status != ServoOutcome::Status::reached;
    const double v2 = gate2.output_voltage();

    for (std::size_t i = 0; i < g.n1; ++i) {
        const double target = g.v1(i);
        const auto o1 = i == 0 ? gate1.program_voltage(target, cfg.coarse, cfg.fine, row.ledger)
                               : gate1.retune_voltage(target, cfg.coarse, cfg.fine, row.ledger);
        if (i == 0) row.setup_time = row.ledger.cumulative_time();
        if (i % job.cols.stride != 0 || i / job.cols.stride >= job.cols.points) continue;
        const double v1 = gate1.output_voltage();
        const auto occ = job.model.occupation(v1, v2);
        row.v1.push_back(v1);
        row.v2.push_back(v2);
        row.n1.push_back(occ.n1);
        row.n2.push_back(occ.n2);
        row.saturated += occ.saturated ? 1 : 0;
        row.flags.push_back(row_flag || o1.status != ServoOutcome::Status::reached ? 1 : 0);
    }
    return row;
}

}  // namespace

ScanResult run_scan(const ExperimentConfig& cfg, std::shared_ptr<const SourceDesign> design) {
    cfg.validate();
    if (!design) design = SourceDesign::build(cfg.spec, cfg.params);
    ScanResult res;
    res.requested = cfg.window.grid();
    const auto& req = res.requested;
    const Axis cols = sample_axis(req.n1, cfg.max_pixels_per_axis);
    const Axis rows_axis = sample_axis(req.n2, cfg.max_pixels_per_axis);
    res.mode = cols.stride > 1 || rows_axis.stride > 1 ? ScanMode::sampled : ScanMode::exact;
    GridSpec programmed{req.v1_min, req.v1((cols.points - 1) * cols.stride), cols.points,
                        req.v2_min, req.v2((rows_axis.points - 1) * rows_axis.stride), rows_axis.points};

    RowJob job{cfg, design, DqdModel(cfg.dqd), req, cols};
    std::vector<RowResult> rows(programmed.n2);
    std::size_t threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, rows.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t k = next++; k < rows.size(); k = next++)
                        rows[k] = scan_row(job, k * rows_axis.stride);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    auto& d = res.diagram;
    d.grid = programmed;
    res.ledger = PulseLedger(cfg.coarse.write_width, cfg.coarse.read_width);
    double setup = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        auto& r = rows[k];
        d.v1.insert(d.v1.end(), r.v1.begin(), r.v1.end());
        d.v2.insert(d.v2.end(), r.v2.begin(), r.v2.end());
        d.n1.insert(d.n1.end(), r.n1.begin(), r.n1.end());
        d.n2.insert(d.n2.end(), r.n2.begin(), r.n2.end());
        d.saturated += r.saturated;
        res.flags.insert(res.flags.end(), r.flags.begin(), r.flags.end());
        for (std::size_t i = 0; i < programmed.n1; ++i) {
            res.v1_target.push_back(req.v1(i * cols.stride));
            res.v2_target.push_back(req.v2(k * rows_axis.stride));
        }
        res.ledger += r.ledger;
        setup += r.setup_time;
    }
    differentiate(d, DerivativeAxes::nominal);
    res.flagged = static_cast<std::size_t>(std::count(res.flags.begin(), res.flags.end(), 1));
    res.plateaus = count_plateaus(d);

    const double walked_rows = static_cast<double>(rows.size());
    const double row_time = res.ledger.cumulative_time() / walked_rows;
    res.row_setup_time = setup / walked_rows;
    res.step_time = req.n1 > 1 ? (row_time - res.row_setup_time) / static_cast<double>(req.n1 - 1) : 0.0;
    res.acquisition_time = res.mode == ScanMode::exact ? res.ledger.cumulative_time()
                                                       : row_time * static_cast<double>(req.n2);
    return res;
}

int scan_exit_code(const ScanResult& result) { return result.flagged ? 3 : 0; }

nlohmann::json ledger_json(const PulseLedger& l) {
    nlohmann::json phases = nlohmann::json::object();
    for (auto p : {Phase::coarse, Phase::fine, Phase::verify})
        phases[to_string(p)] = {{"writes", l.phase(p).writes}, {"reads", l.phase(p).reads}};
    return nlohmann::json{{"writes", l.write_count()},
                          {"reads", l.read_count()},
                          {"write_width_s", l.write_width()},
                          {"read_width_s", l.read_width()},
                          {"ledger_time_s", l.cumulative_time()},
                          {"phases", phases}};
}

nlohmann::json write_scan_outputs(const ScanResult& res, const ExperimentConfig& cfg, const std::string& dir,
                                  double wall_clock_seconds) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
    const auto& d = res.diagram;

    write_derivative_csv(path("derivative.csv"), d);
    write_occupation_csv(path("occupation.csv"), d);
    {
        std::ofstream out(path("pixels.csv"));
        if (!out) fail("io-error", "cannot write " + path("pixels.csv"));
        out.precision(12);
        out << "row,col,v1_target_V,v2_target_V,v1_V,v2_V,n1,n2,flagged\n";
        for (std::size_t j = 0; j < d.grid.n2; ++j)
            for (std::size_t i = 0; i < d.grid.n1; ++i) {
                const auto k = d.index(i, j);
                out << j << ',' << i << ',' << res.v1_target[k] << ',' << res.v2_target[k] << ',' << d.v1[k] << ','
                    << d.v2[k] << ',' << d.n1[k] << ',' << d.n2[k] << ',' << int(res.flags[k]) << '\n';
            }
    }
    const nlohmann::json provider{{"kind", "programmable-sources"},
                                  {"mode", to_string(res.mode)},
                                  {"raster", "outer v_g2 (source 2 programmed once per row), inner v_g1 "
                                             "(source 1 retuned per pixel)"},
                                  {"derivative_axes", "nominal"},
                                  {"requested_points", {res.requested.n1, res.requested.n2}},
                                  {"resolution_V", cfg.window.resolution},
                                  {"flagged_pixels", res.flagged}};
    {
        std::ofstream out(path("diagram.json"));
        out << diagram_sidecar(d, cfg.dqd, provider).dump(2) << '\n';
    }
    {
        auto j = ledger_json(res.ledger);
        j["mode"] = to_string(res.mode);
        j["acquisition_time_s"] = res.acquisition_time;
        j["row_setup_time_s"] = res.row_setup_time;
        j["step_time_s"] = res.step_time;
        std::ofstream out(path("ledger.json"));
        out << j.dump(2) << '\n';
    }

    nlohmann::json files = nlohmann::json::object();
    for (const char* name : {"derivative.csv", "occupation.csv", "pixels.csv", "diagram.json", "ledger.json"})
        files[name] = file_checksum(path(name));
    nlohmann::json manifest{{"tool", "sim"},
                            {"version", version_string},
                            {"config_hash", config_hash(cfg)},
                            {"seed", cfg.seed},
                            {"mode", to_string(res.mode)},
                            {"files", files},
                            {"ledger", ledger_json(res.ledger)},
                            {"acquisition_time_s", res.acquisition_time},
                            {"flagged_pixels", res.flagged},
                            {"plateaus", res.plateaus},
                            {"wall_clock_s", wall_clock_seconds}};
    std::ofstream out(path("manifest.json"));
    out << manifest.dump(2) << '\n';
    return manifest;
}

}  // namespace cryodc
