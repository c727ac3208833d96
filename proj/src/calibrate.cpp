#include "cryodc/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

namespace cryodc {

void PulseTrainProtocol::validate() const {
    if (amplitudes.empty()) fail("invalid-protocol", "protocol needs at least one amplitude");
    if (pulses_per_amplitude < 1) fail("invalid-protocol", "pulses_per_amplitude must be >= 1");
    if (!(write_width > 0.0) || !(read_width > 0.0)) fail("invalid-protocol", "pulse widths must be > 0");
    if (!(initial_resistance > 0.0)) fail("invalid-protocol", "initial_resistance must be > 0");
}

void to_json(nlohmann::json& j, const PulseTrainProtocol& p) {
    j = nlohmann::json{{"amplitudes_V", p.amplitudes},
                       {"pulses_per_amplitude", p.pulses_per_amplitude},
                       {"write_width_s", p.write_width},
                       {"read_width_s", p.read_width},
                       {"read_amplitude_V", p.read_amplitude},
                       {"initial_resistance_Ohm", p.initial_resistance}};
}

void from_json(const nlohmann::json& j, PulseTrainProtocol& p) {
    p.amplitudes = j.value("amplitudes_V", p.amplitudes);
    p.pulses_per_amplitude = j.value("pulses_per_amplitude", p.pulses_per_amplitude);
    p.write_width = j.value("write_width_s", p.write_width);
    p.read_width = j.value("read_width_s", p.read_width);
    p.read_amplitude = j.value("read_amplitude_V", p.read_amplitude);
    p.initial_resistance = j.value("initial_resistance_Ohm", p.initial_resistance);
    p.validate();
}

PulseTrainProtocol load_protocol(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("config-error", "cannot open protocol file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail("config-error", path + ": " + e.what());
    }
    return j.get<PulseTrainProtocol>();
}

ResistanceTrace read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("config-error", "cannot open trace " + path);
    ResistanceTrace trace;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line_no == 1) continue;  // header
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        TraceSample s;
        if (!(row >> s.pulse_index >> s.amplitude >> s.width >> s.resistance))
            fail("config-error", path + ":" + std::to_string(line_no) + ": expected 4 numeric columns");
        trace.samples.push_back(s);
    }
    return trace;
}

void write_trace_csv(const std::string& path, const ResistanceTrace& trace) {
    std::ofstream out(path);
    if (!out) fail("io-error", "cannot write " + path);
    out.precision(17);
    out << "pulse_index,amplitude_V,width_s,resistance_Ohm\n";
    for (const auto& s : trace.samples)
        out << s.pulse_index << ',' << s.amplitude << ',' << s.width << ',' << s.resistance << '\n';
}

ResistanceTrace synthesize_trace(const DataDrivenParams& params, const PulseTrainProtocol& protocol,
                                 const VariabilityModel& variability, std::uint64_t seed) {
    protocol.validate();
    MemristorState device(params, variability, seed, protocol.initial_resistance);
    const auto read = Pulse::read(protocol.read_amplitude, protocol.read_width);
    ResistanceTrace trace;
    trace.samples.reserve(protocol.write_count() + 1);
    trace.samples.push_back({0, 0.0, 0.0, read_resistance(device, read)});
    for (std::size_t n = 0; n < protocol.write_count(); ++n) {
        const double a = protocol.amplitude_of(n);
        apply_write_pulse(device, Pulse::write(a, protocol.write_width));
        trace.samples.push_back({n + 1, a, protocol.write_width, read_resistance(device, read)});
    }
    return trace;
}

std::vector<double> predict_trace(const DataDrivenParams& params, const PulseTrainProtocol& protocol,
                                  double initial_resistance) {
    std::vector<double> out(protocol.write_count());
    double r = std::clamp(initial_resistance, params.r_on, params.r_off);
    for (std::size_t n = 0; n < out.size(); ++n) {
        r = std::clamp(relax_resistance(params, r, protocol.amplitude_of(n), protocol.write_width), params.r_on,
                       params.r_off);
        out[n] = r;
    }
    return out;
}

namespace {

void check_trace(const ResistanceTrace& trace, const PulseTrainProtocol& protocol) {
    protocol.validate();
    if (trace.samples.size() != protocol.write_count() + 1)
        fail("trace-mismatch", "trace has " + std::to_string(trace.samples.size()) + " rows, protocol implies " +
                                   std::to_string(protocol.write_count() + 1));
}

}  // namespace

double residual_norm(const DataDrivenParams& params, const ResistanceTrace& trace,
                     const PulseTrainProtocol& protocol) {
    check_trace(trace, protocol);
    const auto pred = predict_trace(params, protocol, trace.samples.front().resistance);
    double sum = 0.0;
    for (std::size_t n = 0; n < pred.size(); ++n) {
        const double d = pred[n] - trace.samples[n + 1].resistance;
        sum += d * d;
    }
    return std::sqrt(sum);
}

nlohmann::json to_json(const FitReport& r) {
    nlohmann::json j = r.params;
    j["fit"] = {{"residual_norm_Ohm", r.residual_norm},
                {"rms_residual_Ohm", r.rms_residual},
                {"iterations", r.iterations},
                {"best_start", r.best_start},
                {"converged", r.converged},
                {"start_residuals_Ohm", r.start_residuals},
                {"fitted", fit_parameter_names}};
    return j;
}

namespace {

using Vec = Eigen::Matrix<double, fit_parameter_count, 1>;
using Mat = Eigen::Matrix<double, fit_parameter_count, fit_parameter_count>;

// Parameters travel as log magnitudes; signs stay those of the reference.
struct Problem {
    const ResistanceTrace& trace;
    const PulseTrainProtocol& protocol;
    DataDrivenParams reference;
    std::array<double, fit_parameter_count> sign{};
    Vec lower;
    Vec upper;

    DataDrivenParams decode(const Vec& x) const {
        auto p = reference;
        double* fields[fit_parameter_count] = {&p.a_p, &p.a_n, &p.t_p, &p.t_n, &p.r_p0, &p.r_p1, &p.r_n0, &p.r_n1};
        for (std::size_t i = 0; i < fit_parameter_count; ++i) *fields[i] = sign[i] * std::exp(x[i]);
        return p;
    }

    Eigen::VectorXd residuals(const Vec& x) const {
        const auto pred = predict_trace(decode(x), protocol, trace.samples.front().resistance);
        Eigen::VectorXd r(static_cast<Eigen::Index>(pred.size()));
        for (std::size_t n = 0; n < pred.size(); ++n) r[static_cast<Eigen::Index>(n)] = pred[n] - trace.samples[n + 1].resistance;
        return r;
    }

    Vec project(Vec x) const { return x.cwiseMax(lower).cwiseMin(upper); }
};

struct StartResult {
    Vec x;
    double cost = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool converged = false;
};

StartResult levenberg_marquardt(const Problem& pb, Vec x, const FitOptions& opt) {
    StartResult res;
    x = pb.project(x);
    Eigen::VectorXd r = pb.residuals(x);
    double cost = 0.5 * r.squaredNorm();
    double lambda = 1e-3;
    const auto m = r.size();
    Eigen::MatrixXd jac(m, static_cast<Eigen::Index>(fit_parameter_count));

    for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
        if (cost == 0.0) {
            res.converged = true;
            break;
        }
        for (std::size_t i = 0; i < fit_parameter_count; ++i) {
            const double h = 1e-6;
            Vec xh = x;
            const bool back = x[i] + h > pb.upper[i];
            xh[i] += back ? -h : h;
            jac.col(static_cast<Eigen::Index>(i)) = (pb.residuals(xh) - r) / (back ? -h : h);
        }
        const Mat a = jac.transpose() * jac;
        const Vec g = jac.transpose() * r;
        bool accepted = false;
        while (lambda < 1e12) {
            Mat damped = a;
            for (std::size_t i = 0; i < fit_parameter_count; ++i)
                damped(i, i) += lambda * std::max(a(i, i), 1e-12);
            const Vec step = damped.ldlt().solve(-g);
            const Vec trial = pb.project(x + step);
            const Eigen::VectorXd r_trial = pb.residuals(trial);
            const double c_trial = 0.5 * r_trial.squaredNorm();
            if (std::isfinite(c_trial) && c_trial < cost) {
                const double drop = (cost - c_trial) / cost;
                const double moved = (trial - x).cwiseAbs().maxCoeff();
                x = trial;
                r = r_trial;
                cost = c_trial;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (drop < opt.tolerance || moved < opt.tolerance) res.converged = true;
                break;
            }
            lambda *= 4.0;
        }
        // No downhill step at any damping: a (possibly bound-constrained) minimum.
        if (!accepted) res.converged = true;
        if (res.converged) break;
    }
    res.x = x;
    res.cost = cost;
    return res;
}

double halton(std::size_t index, unsigned base) {
    double f = 1.0;
    double out = 0.0;
    while (index > 0) {
        f /= base;
        out += f * static_cast<double>(index % base);
        index /= base;
    }
    return out;
}

// Straight-line fit through the last reading of each train of one polarity.
std::pair<double, double> boundary_line(const ResistanceTrace& trace, const PulseTrainProtocol& protocol,
                                        bool positive) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (std::size_t t = 0; t < protocol.amplitudes.size(); ++t) {
        const double v = protocol.amplitudes[t];
        if ((v > 0.0) != positive || v == 0.0) continue;
        const double y = trace.samples[(t + 1) * protocol.pulses_per_amplitude].resistance;
        sx += v;
        sy += y;
        sxx += v * v;
        sxy += v * y;
        n += 1;
    }
    const double det = n * sxx - sx * sx;
    if (n < 2 || det == 0.0) return {sy / std::max(n, 1.0), 0.0};
    const double slope = (n * sxy - sx * sy) / det;
    return {(sy - slope * sx) / n, slope};
}

}  // namespace

FitReport fit_params(const ResistanceTrace& trace, const PulseTrainProtocol& protocol,
                     const DataDrivenParams& reference, const FitOptions& options) {
    check_trace(trace, protocol);
    std::vector<double> pos, neg;
    for (double v : protocol.amplitudes) {
        auto& side = v > 0.0 ? pos : neg;
        if (v != 0.0 && std::find(side.begin(), side.end(), v) == side.end()) side.push_back(v);
    }
    if (pos.size() < 2 || neg.size() < 2)
        fail("underdetermined-protocol", "need >= 2 distinct positive and >= 2 distinct negative amplitudes");
    const auto [lo, hi] = std::minmax_element(trace.samples.begin(), trace.samples.end(),
                                              [](const auto& a, const auto& b) { return a.resistance < b.resistance; });
    if (hi->resistance - lo->resistance <= 1e-9 * std::abs(hi->resistance))
        fail("underdetermined-protocol", "trace never switches; nothing to fit");
    if (options.starts < 1) fail("invalid-options", "need at least one start");

    const auto& b = options.bounds;
    Problem pb{trace, protocol, reference, {}, {}, {}};
    const double ref_values[fit_parameter_count] = {reference.a_p,  reference.a_n,  reference.t_p,  reference.t_n,
                                                    reference.r_p0, reference.r_p1, reference.r_n0, reference.r_n1};
    for (std::size_t i = 0; i < fit_parameter_count; ++i) {
        pb.sign[i] = ref_values[i] < 0.0 ? -1.0 : 1.0;
        const double mn = i < 2 ? b.rate_min : (i < 4 ? b.scale_min : b.resistance_min);
        const double mx = i < 2 ? b.rate_max : (i < 4 ? b.scale_max : b.resistance_max);
        pb.lower[i] = std::log(mn);
        pb.upper[i] = std::log(mx);
    }

    Vec heuristic;
    {
        const auto [p0, p1] = boundary_line(trace, protocol, true);
        const auto [n0, n1] = boundary_line(trace, protocol, false);
        const double mags[fit_parameter_count] = {100.0, 100.0, 1.0, 1.0, p0, p1, n0, n1};
        for (std::size_t i = 0; i < fit_parameter_count; ++i) {
            // A regression value of the wrong sign carries no magnitude information.
            const double m = mags[i] * pb.sign[i] > 0.0 ? std::abs(mags[i]) : std::exp(pb.lower[i]);
            heuristic[i] = std::log(std::max(m, 1e-300));
        }
    }

    static constexpr unsigned primes[fit_parameter_count] = {2, 3, 5, 7, 11, 13, 17, 19};
    std::vector<StartResult> results;
    FitReport report;
    for (std::size_t s = 0; s < options.starts; ++s) {
        Vec x0 = heuristic;
        if (s > 0)
            for (std::size_t i = 0; i < fit_parameter_count; ++i)
                x0[i] = pb.lower[i] + halton(s, primes[i]) * (pb.upper[i] - pb.lower[i]);
        results.push_back(levenberg_marquardt(pb, x0, options));
        report.start_residuals.push_back(std::sqrt(2.0 * results.back().cost));
    }
    std::size_t best = 0;
    for (std::size_t s = 1; s < results.size(); ++s)
        if (results[s].cost < results[best].cost) best = s;

    report.params = pb.decode(results[best].x);
    report.residual_norm = std::sqrt(2.0 * results[best].cost);
    report.rms_residual = report.residual_norm / std::sqrt(static_cast<double>(protocol.write_count()));
    report.iterations = results[best].iterations;
    report.best_start = best;
    report.converged = results[best].converged;
    if (!report.converged || !std::isfinite(report.residual_norm))
        throw FitError("no start converged within " + std::to_string(options.max_iterations) + " iterations",
                       report);
    return report;
}

}  // namespace cryodc
