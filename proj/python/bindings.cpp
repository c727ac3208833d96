#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cryodc/calibrate.hpp"
#include "cryodc/config.hpp"
#include "cryodc/device.hpp"
#include "cryodc/experiments.hpp"
#include "cryodc/quantum.hpp"
#include "cryodc/scan.hpp"
#include "cryodc/source.hpp"
#include "cryodc/version.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace cryodc;

// Structured values cross the boundary as JSON text; the Python package
// turns them into dicts.
namespace {

DataDrivenParams params_from(const std::string& text) {
    return text.empty() ? params_4k() : json::parse(text).get<DataDrivenParams>();
}

DcSourceSpec spec_from(const std::string& text) {
    return text.empty() ? DcSourceSpec{} : json::parse(text).get<DcSourceSpec>();
}

ExperimentConfig config_from(const std::string& text) {
    if (text.empty()) return default_config();
    auto cfg = json::parse(text).get<ExperimentConfig>();
    cfg.validate();
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Memristor DC source and double-quantum-dot simulator";
    m.attr("__version__") = version_string;

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

    m.def("params_4k", [] { return json(params_4k()).dump(); });
    m.def("default_config", [] { return json(default_config()).dump(); });

    m.def("boundary_resistance", [](double v, const std::string& p) { return boundary_resistance(params_from(p), v); },
          py::arg("amplitude"), py::arg("params") = "");
    m.def("switching_rate", [](double v, const std::string& p) { return switching_rate(params_from(p), v); },
          py::arg("amplitude"), py::arg("params") = "");
    m.def("relax_resistance",
          [](double r, double v, double w, const std::string& p) { return relax_resistance(params_from(p), r, v, w); },
          py::arg("resistance"), py::arg("amplitude"), py::arg("width"), py::arg("params") = "");

    m.def("voltage_range", [](const std::string& s, const std::string& p) { return voltage_range(spec_from(s), params_from(p)); },
          py::arg("spec") = "", py::arg("params") = "");
    m.def("ideal_resolution",
          [](const std::string& s, const std::string& p) { return ideal_resolution(spec_from(s), params_from(p)); },
          py::arg("spec") = "", py::arg("params") = "");
    m.def("max_power", [](const std::string& s, const std::string& p) { return max_power(spec_from(s), params_from(p)); },
          py::arg("spec") = "", py::arg("params") = "");
    m.def("sources_within_budget",
          [](double budget, double overhead, const std::string& s, const std::string& p) {
              return sources_within_budget(spec_from(s), params_from(p), budget, overhead);
          },
          py::arg("budget"), py::arg("overhead"), py::arg("spec") = "", py::arg("params") = "");

    m.def("enumerate_outputs",
          [](std::size_t n_m, std::size_t n_s, const std::string& p) {
              DcSourceSpec spec;
              spec.n_m = n_m;
              spec.n_s = n_s;
              const auto params = params_from(p);
              const auto table = enumerate_outputs(spec, build_state_distributions(spec, params));
              const auto& s = table.stats;
              return py::make_tuple(table.voltages,
                                    json{{"combinations", s.combinations},
                                         {"distinct", s.distinct},
                                         {"min_gap_V", s.min_gap},
                                         {"max_gap_V", s.max_gap},
                                         {"empirical_resolution_V", s.empirical_resolution}}
                                        .dump());
          },
          py::arg("n_m"), py::arg("n_s"), py::arg("params") = "");

    m.def("charging_energies",
          [](const std::string& d) {
              const auto e = charging_energies(d.empty() ? DqdParams{} : json::parse(d).get<DqdParams>());
              return py::make_tuple(e.e_c1, e.e_c2, e.e_cm);
          },
          py::arg("dqd") = "");
    m.def("occupation",
          [](double v1, double v2, const std::string& d) {
              const auto o = occupation(d.empty() ? DqdParams{} : json::parse(d).get<DqdParams>(), v1, v2);
              return py::make_tuple(o.n1, o.n2);
          },
          py::arg("v_g1"), py::arg("v_g2"), py::arg("dqd") = "");

    m.def("run_scan",
          [](const std::string& cfg_text, const std::string& out) {
              const auto cfg = config_from(cfg_text);
              ScanResult res;
              {
                  py::gil_scoped_release release;
                  res = run_scan(cfg);
              }
              return write_scan_outputs(res, cfg, out, 0.0).dump();
          },
          py::arg("config"), py::arg("out"));
    m.def("run_experiment",
          [](const std::string& name, const std::string& cfg_text, const std::string& out) {
              const auto cfg = config_from(cfg_text);
              py::gil_scoped_release release;
              return run_experiment(name, cfg, out).dump();
          },
          py::arg("name"), py::arg("config"), py::arg("out"));

    m.def("synthesize_trace",
          [](const std::string& path, const std::string& protocol, const std::string& p, std::uint64_t seed) {
              const auto proto = protocol.empty() ? PulseTrainProtocol{} : json::parse(protocol).get<PulseTrainProtocol>();
              write_trace_csv(path, synthesize_trace(params_from(p), proto, VariabilityModel{}, seed));
          },
          py::arg("path"), py::arg("protocol") = "", py::arg("params") = "", py::arg("seed") = 1);
    m.def("fit_params",
          [](const std::string& trace_path, const std::string& protocol) {
              const auto proto = protocol.empty() ? PulseTrainProtocol{} : json::parse(protocol).get<PulseTrainProtocol>();
              const auto trace = read_trace_csv(trace_path);
              py::gil_scoped_release release;
              return to_json(fit_params(trace, proto)).dump();
          },
          py::arg("trace"), py::arg("protocol") = "");
}
