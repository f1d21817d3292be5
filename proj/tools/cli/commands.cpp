#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "fockfringe/constants.hpp"
#include "fockfringe/errors.hpp"
#include "fockfringe/profile_io.hpp"
#include "worker_pool.hpp"

namespace fockfringe::cli {

namespace fs = std::filesystem;
using io::format_double;

namespace {

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) {
        return "parse";
    }
    if (dynamic_cast<const IoError*>(&e)) {
        return "io";
    }
    if (dynamic_cast<const CapacityError*>(&e)) {
        return "capacity";
    }
    if (dynamic_cast<const DomainError*>(&e)) {
        return "domain";
    }
    if (dynamic_cast<const DegenerateError*>(&e)) {
        return "degenerate";
    }
    if (dynamic_cast<const ArityError*>(&e)) {
        return "arity";
    }
    if (dynamic_cast<const NoCrossingError*>(&e)) {
        return "no_crossing";
    }
    if (dynamic_cast<const AmbiguousCrossingError*>(&e)) {
        return "ambiguous_crossing";
    }
    return "error";
}

// Library errors raised inside `f` leave with the exit code of the stage.
template <class F>
decltype(auto) stage(ExitCode code, F&& f) {
    try {
        return f();
    } catch (const CommandError&) {
        throw;
    } catch (const Error& e) {
        throw CommandError(code, error_kind(e), e.what());
    } catch (const fs::filesystem_error& e) {
        throw CommandError(code, "io", e.what());
    }
}

class Stopwatch {
public:
    double lap() {
        const auto now = std::chrono::steady_clock::now();
        const double seconds = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        return seconds;
    }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

void prepare_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create output directory " + dir.string());
    }
}

std::string profile_name(std::size_t index) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "profile_%04zu.csv", index);
    return buffer;
}

std::ofstream open_table(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    return out;
}

void close_table(std::ofstream& out, const fs::path& path) {
    if (!out.flush()) {
        throw IoError("failed writing " + path.string());
    }
}

// Writes a numeric table; cells are pre-formatted strings.
void write_table(const fs::path& path, const std::string& header, const std::vector<std::vector<std::string>>& rows) {
    auto out = open_table(path);
    out << header << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << (i ? "," : "") << row[i];
        }
        out << '\n';
    }
    close_table(out, path);
}

struct NumericTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name, const fs::path& path) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw ParseError(path.string() + ":1: missing column '" + name + "'");
        }
        return static_cast<std::size_t>(it - header.begin());
    }
};

NumericTable read_numeric_table(const fs::path& path) {
    if (!fs::exists(path)) {
        throw IoError("missing input " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string() + " for reading");
    }
    NumericTable table;
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(path.string() + ":1: empty file");
    }
    table.header = io::split_csv_line(line);
    int number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto at = path.string() + ":" + std::to_string(number);
        const auto cells = io::split_csv_line(line);
        if (cells.size() != table.header.size()) {
            throw ParseError(at + ": expected " + std::to_string(table.header.size()) + " fields, got " +
                             std::to_string(cells.size()));
        }
        std::vector<double> row;
        for (const auto& cell : cells) {
            row.push_back(io::parse_double(cell, at));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string flag(bool value) { return value ? "1" : "0"; }

std::string join(const std::vector<std::string>& items, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out += (i ? sep : "") + items[i];
    }
    return out;
}

void finish_summary(RunSummary& summary, const fs::path& out, const std::string& summary_name,
                    const std::string& timings_name) {
    summary.files.push_back(summary_name);
    summary.files.push_back(timings_name);
    std::vector<std::string> names;
    for (const auto& f : summary.files) {
        names.push_back(f.string());
    }
    auto values = summary.values;
    values["config_hash"] = summary.config_hash;
    values["files"] = join(names, ",");
    io::write_key_values(out / summary_name, values);

    std::map<std::string, std::string> timings;
    for (const auto& [name, seconds] : summary.timings) {
        timings["seconds." + name] = format_double(seconds);
    }
    io::write_key_values(out / timings_name, timings);
}

double quadratic_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
    const double denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    const double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    const double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    if (!(a < 0.0)) {
        return x1;
    }
    return std::clamp(-b / (2.0 * a), x0, x2);
}

struct FitOutcome {
    std::vector<io::ManifestRow> manifest;
    std::vector<FringeFit> fringe_fits;
    VisibilityTrace trace;
    CtFitResult ct;
    std::optional<PeakOccupationFit> peak;
    std::string peak_status;
    std::optional<std::pair<double, double>> temperature; // K, K
    std::string temperature_status;
    RevivalAnalysis revivals;
};

} // namespace

std::string failure_line(const CommandError& error) {
    std::string message = error.what();
    std::replace(message.begin(), message.end(), '\n', ' ');
    std::replace(message.begin(), message.end(), '\r', ' ');
    return "error code=" + std::to_string(static_cast<int>(error.code())) + " kind=" + error.kind() +
           " message=" + message;
}

RevivalAnalysis analyze_revivals(const VisibilityTrace& trace, double threshold) {
    RevivalAnalysis result;
    const std::size_t n = trace.size();
    auto usable = [&](std::size_t i) { return !trace.failed[i]; };
    std::size_t i = 0;
    while (i < n) {
        if (!usable(i) || trace.contrast[i] < threshold) {
            ++i;
            continue;
        }
        std::size_t best = i;
        std::size_t j = i;
        while (j < n && !(usable(j) && trace.contrast[j] < threshold)) {
            if (usable(j) && trace.contrast[j] > trace.contrast[best]) {
                best = j;
            }
            ++j;
        }
        double t = trace.times[best];
        if (best > 0 && best + 1 < n && usable(best - 1) && usable(best + 1)) {
            t = quadratic_vertex(trace.times[best - 1], trace.contrast[best - 1], trace.times[best],
                                 trace.contrast[best], trace.times[best + 1], trace.contrast[best + 1]);
        }
        result.times.push_back(t);
        result.phases.push_back(trace.phase[best]);
        i = j;
    }
    if (result.times.size() >= 2) {
        result.spacing = (result.times.back() - result.times.front()) / static_cast<double>(result.times.size() - 1);
    }
    for (std::size_t k = 1; k < result.phases.size(); ++k) {
        result.phase_jumps.push_back(std::abs(std::remainder(result.phases[k] - result.phases[k - 1], constants::two_pi)));
    }
    return result;
}

RunSummary cmd_simulate(const ScenarioConfig& config, const fs::path& out, int workers) {
    Stopwatch clock;
    RunSummary summary;
    struct Setup {
        OccupationDistribution dist;
        SplitterParams params;
        TOFGeometry geom;
        NoiseSpec noise;
        std::vector<double> times;
        double scale;
    };
    const auto setup = stage(ExitCode::config, [&] {
        config.validate();
        prepare_directory(out);
        const auto mixture = config.mixture();
        return Setup{config.distribution(), config.splitter(), config.geometry(), config.noise(), config.times(),
                     mixture ? band_mixture_contrast_scale(*mixture) : 1.0};
    });
    summary.config_hash = config_hash(config);
    summary.timings.emplace_back("setup", clock.lap());

    const std::size_t count = setup.times.size();
    std::vector<FringeProfile> profiles(count);
    stage(ExitCode::numerical, [&] {
        parallel_for(count, workers, [&](std::size_t i) {
            const double t = setup.times[i];
            const double contrast = setup.scale * closed_form_visibility(setup.dist, setup.params, t);
            const double phase = phase_trace(setup.dist, setup.params, t);
            profiles[i] = synthesize_profile(setup.geom, contrast, phase, config.amplitude, setup.noise, i);
        });
    });
    summary.timings.emplace_back("synthesize", clock.lap());

    std::vector<io::ManifestRow> manifest(count);
    stage(ExitCode::config, [&] {
        save_config(out / "config.txt", config);
        parallel_for(count, workers, [&](std::size_t i) {
            const auto name = profile_name(i);
            io::write_profile_csv(out / name, profiles[i]);
            manifest[i] = {static_cast<int>(i), setup.times[i], name, profiles[i].truth->contrast,
                           profiles[i].truth->phase};
        });
        io::write_manifest(out / io::kManifestName, manifest);
    });
    summary.timings.emplace_back("write", clock.lap());

    summary.files.push_back("config.txt");
    summary.files.push_back(io::kManifestName);
    for (const auto& row : manifest) {
        summary.files.push_back(row.file);
    }
    summary.values["scenario"] = to_string(config.kind);
    summary.values["profiles"] = std::to_string(count);
    summary.values["revival_period_us"] = format_double(setup.params.revival_period() * 1e6);
    const auto fractions = setup.dist.fractions();
    for (std::size_t n = 0; n < fractions.size(); ++n) {
        summary.values["true.f" + std::to_string(n)] = format_double(fractions[n]);
    }
    stage(ExitCode::config, [&] { finish_summary(summary, out, "simulate_summary.txt", "simulate_timings.txt"); });
    return summary;
}

RunSummary cmd_fit(const fs::path& dataset, const ScenarioConfig& config, const fs::path& out, int workers) {
    Stopwatch clock;
    RunSummary summary;
    stage(ExitCode::config, [&] {
        config.validate();
        prepare_directory(out);
    });
    summary.config_hash = config_hash(config);

    FitOutcome result;
    std::vector<FringeProfile> profiles;
    stage(ExitCode::data, [&] {
        if (!fs::is_directory(dataset)) {
            throw IoError("dataset directory " + dataset.string() + " does not exist");
        }
        result.manifest = io::read_manifest(dataset / io::kManifestName);
        if (result.manifest.empty()) {
            throw ArityError("dataset " + (dataset / io::kManifestName).string() + " lists no profiles");
        }
        std::stable_sort(result.manifest.begin(), result.manifest.end(),
                         [](const auto& a, const auto& b) { return a.time < b.time; });
        for (std::size_t i = 1; i < result.manifest.size(); ++i) {
            if (!(result.manifest[i].time > result.manifest[i - 1].time)) {
                throw DomainError((dataset / io::kManifestName).string() + ": repeated time " +
                                  format_double(result.manifest[i].time));
            }
        }
        profiles.resize(result.manifest.size());
        parallel_for(profiles.size(), workers, [&](std::size_t i) {
            profiles[i] = io::read_profile_csv(dataset / result.manifest[i].file);
        });
    });
    summary.timings.emplace_back("read", clock.lap());

    std::vector<double> times;
    for (const auto& row : result.manifest) {
        times.push_back(row.time);
    }
    result.fringe_fits.resize(profiles.size());
    stage(ExitCode::numerical, [&] {
        parallel_for(profiles.size(), workers, [&](std::size_t i) {
            try {
                result.fringe_fits[i] = fit_fringe(profiles[i]);
            } catch (const Error&) {
                result.fringe_fits[i] = FringeFit{};
            }
        });
        result.trace = assemble_trace(times, result.fringe_fits);
    });
    summary.timings.emplace_back("fringe_fit", clock.lap());

    stage(ExitCode::numerical, [&] { result.ct = fit_visibility_model(result.trace, config.fit_options()); });
    summary.timings.emplace_back("visibility_fit", clock.lap());

    try {
        result.peak = fit_tf_poisson(result.ct, config.fit_profile_dimension());
        result.peak_status = result.peak->degenerate ? "degenerate" : "ok";
    } catch (const Error& e) {
        result.peak_status = std::string("unavailable: ") + e.what();
    }
    try {
        const double f2 = result.ct.fraction(2);
        const double u = result.ct.interaction;
        const double t = estimate_temperature(f2, u);
        const double f2_err = result.ct.fraction_errors.size() > 1 ? result.ct.fraction_errors[1] : 0.0;
        const double dt_df2 = t / (f2 * std::log(1.0 / f2));
        const double dt_du = t / u;
        result.temperature = {{t, std::hypot(dt_df2 * f2_err, dt_du * result.ct.interaction_error)}};
        result.temperature_status = "ok";
    } catch (const Error& e) {
        result.temperature_status = std::string("unavailable: ") + e.what();
    }
    result.revivals = analyze_revivals(result.trace);
    summary.timings.emplace_back("derived", clock.lap());

    stage(ExitCode::config, [&] {
        std::vector<std::vector<std::string>> rows;
        for (std::size_t i = 0; i < result.fringe_fits.size(); ++i) {
            const auto& fit = result.fringe_fits[i];
            const auto& p = fit.params;
            rows.push_back({std::to_string(result.manifest[i].index), format_double(times[i]),
                            format_double(p.amplitude), format_double(fit.error(0)), format_double(p.center),
                            format_double(fit.error(1)), format_double(p.sigma), format_double(fit.error(2)),
                            format_double(p.delta), format_double(fit.error(3)), format_double(p.contrast),
                            format_double(fit.error(4)), format_double(p.phase), format_double(fit.error(5)),
                            format_double(fit.residual_rms), flag(fit.converged), flag(fit.phase_identifiable),
                            flag(result.trace.failed[i])});
        }
        write_table(out / "fringe_fits.csv",
                    "index,t_s,A,A_err,x0_m,x0_err,sigma_m,sigma_err,delta_m,delta_err,C,C_err,phi_rad,phi_err,"
                    "residual_rms,converged,phase_identifiable,failed",
                    rows);

        rows.clear();
        const auto& tr = result.trace;
        for (std::size_t i = 0; i < tr.size(); ++i) {
            rows.push_back({format_double(tr.times[i]), format_double(tr.contrast[i]),
                            format_double(tr.contrast_error[i]), format_double(tr.phase[i]),
                            format_double(tr.phase_error[i]), flag(tr.low_signal[i]), flag(tr.failed[i])});
        }
        write_table(out / "trace.csv", "t_s,C,C_err,phi_rad,phi_err,low_signal,failed", rows);

        std::vector<io::ParamRow> params;
        const auto& ct = result.ct;
        for (int n = 1; n <= ct.max_atoms(); ++n) {
            params.push_back({"f" + std::to_string(n), ct.fraction(n), ct.fraction_errors[static_cast<std::size_t>(n - 1)]});
        }
        params.push_back({"U_over_h_hz", ct.interaction / constants::two_pi, ct.interaction_error / constants::two_pi});
        params.push_back({"gamma_per_s", ct.dephasing, ct.dephasing_error});
        io::write_param_csv(out / "ct_fit.csv", params);

        std::vector<io::ParamRow> derived;
        if (result.peak) {
            derived.push_back({"peak_mean", result.peak->peak_mean, result.peak->uncertainty});
        }
        if (result.temperature) {
            derived.push_back({"temperature_nK", result.temperature->first * 1e9, result.temperature->second * 1e9});
        }
        io::write_param_csv(out / "derived.csv", derived);
    });
    summary.timings.emplace_back("write", clock.lap());
    summary.files = {"fringe_fits.csv", "trace.csv", "ct_fit.csv", "derived.csv"};

    auto& v = summary.values;
    const auto& ct = result.ct;
    v["dataset"] = dataset.string();
    v["profiles"] = std::to_string(result.trace.size());
    v["failed_profiles"] = std::to_string(std::count(result.trace.failed.begin(), result.trace.failed.end(), true));
    v["low_signal_points"] =
        std::to_string(std::count(result.trace.low_signal.begin(), result.trace.low_signal.end(), true));
    for (int n = 1; n <= ct.max_atoms(); ++n) {
        v["f" + std::to_string(n)] = format_double(ct.fraction(n));
        v["f" + std::to_string(n) + "_err"] = format_double(ct.fraction_errors[static_cast<std::size_t>(n - 1)]);
    }
    v["U_over_h_hz"] = format_double(ct.interaction / constants::two_pi);
    v["U_over_h_hz_err"] = format_double(ct.interaction_error / constants::two_pi);
    v["U_fixed"] = flag(ct.interaction_fixed);
    v["gamma_per_s"] = format_double(ct.dephasing);
    v["gamma_per_s_err"] = format_double(ct.dephasing_error);
    v["reduced_chi_squared"] = format_double(ct.reduced_chi_squared);
    v["converged"] = flag(ct.converged);
    const double revival_period = constants::two_pi / ct.interaction;
    v["revival_period_us"] = format_double(revival_period * 1e6);
    v["peak_mean.status"] = result.peak_status;
    if (result.peak) {
        v["peak_mean"] = format_double(result.peak->peak_mean);
        v["peak_mean_err"] = format_double(result.peak->uncertainty);
    }
    v["temperature.status"] = result.temperature_status;
    if (result.temperature) {
        v["temperature_nK"] = format_double(result.temperature->first * 1e9);
        v["temperature_nK_err"] = format_double(result.temperature->second * 1e9);
    }
    const auto& rev = result.revivals;
    v["revival.count"] = std::to_string(rev.times.size());
    std::vector<std::string> revival_times;
    for (double t : rev.times) {
        revival_times.push_back(format_double(t * 1e6));
    }
    v["revival.times_us"] = join(revival_times, ";");
    if (rev.times.size() >= 2) {
        v["revival.spacing_us"] = format_double(rev.spacing * 1e6);
        v["revival.spacing_over_period"] = format_double(rev.spacing / revival_period);
    }
    std::vector<std::string> jumps;
    int pi_jumps = 0;
    for (double j : rev.phase_jumps) {
        jumps.push_back(format_double(j));
        pi_jumps += std::abs(j - constants::pi) <= kPiJumpTolerance ? 1 : 0;
    }
    v["revival.phase_jumps_rad"] = join(jumps, ";");
    v["revival.pi_jumps"] = std::to_string(pi_jumps);

    stage(ExitCode::config, [&] { finish_summary(summary, out, "summary.txt", "timings.txt"); });
    return summary;
}

RunSummary cmd_pipeline(const ScenarioConfig& config, const fs::path& out, int workers) {
    const auto simulated = cmd_simulate(config, out, workers);
    auto fitted = cmd_fit(out, config, out, workers);
    for (const auto& [name, seconds] : simulated.timings) {
        fitted.timings.emplace_back("simulate." + name, seconds);
    }
    return fitted;
}

OracleReport cmd_oracle(int max_atoms, int grid_size, const SplitterParams& params) {
    if (max_atoms > kMaxAtomsPerSite) {
        throw CapacityError("oracle max N " + std::to_string(max_atoms) + " exceeds the cap of " +
                            std::to_string(kMaxAtomsPerSite));
    }
    if (max_atoms < 1) {
        throw DomainError("oracle max N must be at least 1");
    }
    if (grid_size < 2) {
        throw DomainError("oracle grid needs at least 2 points");
    }
    params.validate();
    const double period = params.revival_period();
    OracleReport report;
    report.pass = true;
    for (int atoms = 1; atoms <= max_atoms; ++atoms) {
        OracleRow row;
        row.atoms = atoms;
        const auto state = binomial_split(atoms, 0.5);
        const auto pure = OccupationDistribution::pure(atoms, atoms);
        for (double tilt : {0.0, constants::two_pi * 4900.0}) {
            SplitterParams p = params;
            p.tilt = tilt;
            p.dephasing = 0.0;
            for (int k = 0; k < grid_size; ++k) {
                const double t = 2.0 * period * k / (grid_size - 1);
                const auto evolved = evolve(state, p, t);
                row.norm_deviation = std::max(row.norm_deviation, std::abs(evolved.norm_squared() - 1.0));
                const auto sample = one_body_coherence(evolved, t);
                const double expected = std::pow(std::abs(std::cos(p.interaction * t)), atoms - 1);
                row.modulus_deviation = std::max(row.modulus_deviation, std::abs(sample.contrast - expected));
                // arg() of a near-zero coherence carries only rounding noise
                if (sample.contrast > 1e-4) {
                    const double offset = std::remainder(std::arg(sample.coherence) - tilt * t, constants::pi);
                    row.phase_deviation = std::max(row.phase_deviation, std::abs(offset));
                }
                row.periodicity_deviation =
                    std::max(row.periodicity_deviation,
                             std::abs(closed_form_visibility(pure, p, t + period) - closed_form_visibility(pure, p, t)));
            }
        }
        row.pass = row.modulus_deviation <= kOracleModulusTolerance && row.phase_deviation <= kOraclePhaseTolerance &&
                   row.norm_deviation <= kOracleNormTolerance && row.periodicity_deviation <= kOraclePeriodicityTolerance;
        report.pass = report.pass && row.pass;
        report.rows.push_back(row);
    }
    return report;
}

void write_oracle_report(std::ostream& out, const OracleReport& report) {
    for (const auto& row : report.rows) {
        out << "N=" << row.atoms << " modulus=" << format_double(row.modulus_deviation)
            << " phase=" << format_double(row.phase_deviation) << " norm=" << format_double(row.norm_deviation)
            << " periodicity=" << format_double(row.periodicity_deviation) << ' ' << (row.pass ? "PASS" : "FAIL")
            << '\n';
    }
    out << "oracle " << (report.pass ? "PASS" : "FAIL") << '\n';
}

RunSummary cmd_figures(const ScenarioConfig& config, const fs::path& results, const fs::path& out) {
    Stopwatch clock;
    RunSummary summary;
    stage(ExitCode::config, [&] {
        config.validate();
        prepare_directory(out);
    });
    summary.config_hash = config_hash(config);

    struct Inputs {
        std::vector<io::ParamRow> ct;
        NumericTable trace;
        fs::path trace_path;
    };
    const auto inputs = stage(ExitCode::data, [&] {
        const auto ct_path = results / "ct_fit.csv";
        if (!fs::exists(ct_path)) {
            throw IoError("missing input " + ct_path.string());
        }
        Inputs in{io::read_param_csv(ct_path), read_numeric_table(results / "trace.csv"), results / "trace.csv"};
        return in;
    });

    stage(ExitCode::numerical, [&] {
        const auto params = config.splitter();
        std::map<std::string, io::ParamRow> ct;
        for (const auto& row : inputs.ct) {
            ct[row.name] = row;
        }
        auto lookup = [&](const std::string& name) {
            const auto it = ct.find(name);
            if (it == ct.end()) {
                throw ParseError((results / "ct_fit.csv").string() + ": missing parameter '" + name + "'");
            }
            return it->second;
        };
        std::vector<double> fitted{0.0};
        std::vector<double> fitted_err{0.0};
        for (int n = 1; ct.contains("f" + std::to_string(n)); ++n) {
            fitted.push_back(lookup("f" + std::to_string(n)).value);
            fitted_err.push_back(lookup("f" + std::to_string(n)).uncertainty);
        }
        if (fitted.size() < 2) {
            throw ParseError((results / "ct_fit.csv").string() + ": no occupation fractions");
        }
        const int fit_nmax = static_cast<int>(fitted.size()) - 1;
        SplitterParams fit_params = params;
        fit_params.interaction = constants::two_pi * lookup("U_over_h_hz").value;
        fit_params.dephasing = lookup("gamma_per_s").value;
        const auto fitted_dist = OccupationDistribution::normalized(fitted);

        // Beam-splitter calibration with the 50/50 crossing as its own row.
        {
            std::vector<double> offsets;
            for (int i = 0; i <= 60; ++i) {
                offsets.push_back(-0.2 + 0.6 * i / 60.0);
            }
            const auto curves = calibration_curves(config.calibration(), offsets);
            const double crossing = find_crossing(curves.offsets, curves.left, curves.right);
            const double at_crossing = config.calibration().left_fraction(crossing);
            std::vector<std::vector<std::string>> rows;
            bool marked = false;
            for (std::size_t i = 0; i < offsets.size(); ++i) {
                if (!marked && crossing <= offsets[i]) {
                    rows.push_back({format_double(crossing), format_double(at_crossing),
                                    format_double(1.0 - at_crossing), "crossing"});
                    marked = true;
                }
                rows.push_back({format_double(offsets[i]), format_double(curves.left[i]),
                                format_double(curves.right[i]), ""});
            }
            write_table(out / "fig2c.csv", "offset_lambda,left,right,marker", rows);
        }

        // Collapse and revival for the three prepared states plus the fitted model.
        {
            const int nmax = config.max_atoms;
            const auto mott = OccupationDistribution::pure(1, nmax);
            const auto poisson = poisson_distribution(1.0, nmax);
            const auto pairs = OccupationDistribution::pure(2, nmax);
            const auto mixture = config.mixture();
            const double pair_scale = mixture ? band_mixture_contrast_scale(*mixture) : 1.0;
            const double stop = 3.0 * params.revival_period();
            std::vector<std::vector<std::string>> curve_rows;
            std::vector<std::vector<std::string>> phase_rows;
            for (int i = 0; i <= 600; ++i) {
                const double t = stop * i / 600.0;
                const double pairs_c = pair_scale * closed_form_visibility(pairs, params, t);
                curve_rows.push_back({format_double(t * 1e6), format_double(closed_form_visibility(mott, params, t)),
                                      format_double(closed_form_visibility(poisson, params, t)),
                                      format_double(pairs_c), format_double(2.0 * pairs_c),
                                      format_double(closed_form_visibility(fitted_dist, fit_params, t))});
                phase_rows.push_back({format_double(t * 1e6), format_double(phase_trace(mott, params, t)),
                                      format_double(phase_trace(poisson, params, t)),
                                      format_double(phase_trace(pairs, params, t))});
            }
            write_table(out / "fig3c.csv", "t_us,C_mott,C_poisson,C_pairs,C_pairs_x2,C_fit", curve_rows);
            write_table(out / "fig3d.csv", "t_us,phi_mott,phi_poisson,phi_pairs", phase_rows);

            const auto& tr = inputs.trace;
            const auto t_col = tr.column("t_s", inputs.trace_path);
            const auto c_col = tr.column("C", inputs.trace_path);
            const auto ce_col = tr.column("C_err", inputs.trace_path);
            const auto p_col = tr.column("phi_rad", inputs.trace_path);
            const auto pe_col = tr.column("phi_err", inputs.trace_path);
            const auto f_col = tr.column("failed", inputs.trace_path);
            std::vector<std::vector<std::string>> measured;
            for (const auto& row : tr.rows) {
                if (row[f_col] != 0.0) {
                    continue;
                }
                measured.push_back({format_double(row[t_col] * 1e6), format_double(row[c_col]),
                                    format_double(row[ce_col]), format_double(row[p_col]), format_double(row[pe_col]),
                                    format_double(closed_form_visibility(fitted_dist, fit_params, row[t_col]))});
            }
            write_table(out / "fig3_measured.csv", "t_us,C,C_err,phi_rad,phi_err,C_fit", measured);
        }

        // Occupation histogram: fit, configured truth and the Poisson reference.
        {
            const auto truth = config.distribution().occupied_fractions();
            const auto reference = poisson_distribution(1.0, fit_nmax).occupied_fractions();
            std::vector<std::vector<std::string>> rows;
            for (int n = 1; n <= fit_nmax; ++n) {
                const auto k = static_cast<std::size_t>(n);
                rows.push_back({std::to_string(n), format_double(fitted[k]), format_double(fitted_err[k]),
                                format_double(k <= truth.size() ? truth[k - 1] : 0.0),
                                format_double(reference[k - 1])});
            }
            write_table(out / "fig4a.csv", "N,f_fit,f_fit_err,f_config,f_poisson", rows);
        }

        // Occupations against condensate atom number: TF curve with no free parameters plus the fitted point.
        {
            std::string header = "source,N_BEC,peak_mean,peak_mean_err";
            for (int n = 1; n <= fit_nmax; ++n) {
                header += ",f" + std::to_string(n) + ",f" + std::to_string(n) + "_err";
            }
            const auto dim = config.fit_profile_dimension();
            std::vector<std::vector<std::string>> rows;
            for (int i = 0; i <= 40; ++i) {
                auto trap = config.trap();
                trap.atom_number = 2e3 * std::pow(50.0, i / 40.0);
                const double n0 = tf_peak_occupation(trap);
                const auto occupied = tf_weighted_poisson({n0, dim}, fit_nmax).occupied_fractions();
                std::vector<std::string> row{"tf_curve", format_double(trap.atom_number), format_double(n0), "0"};
                for (double f : occupied) {
                    row.push_back(format_double(f));
                    row.push_back("0");
                }
                rows.push_back(std::move(row));
            }
            const auto peak = fit_tf_poisson(std::span<const double>(fitted).subspan(1),
                                             std::span<const double>(fitted_err).subspan(1), dim);
            std::vector<std::string> row{"fit", format_double(config.trap_atom_number), format_double(peak.peak_mean),
                                         format_double(peak.uncertainty)};
            for (int n = 1; n <= fit_nmax; ++n) {
                row.push_back(format_double(fitted[static_cast<std::size_t>(n)]));
                row.push_back(format_double(fitted_err[static_cast<std::size_t>(n)]));
            }
            rows.push_back(std::move(row));
            write_table(out / "fig4b.csv", header, rows);
        }
    });
    summary.timings.emplace_back("figures", clock.lap());
    summary.files = {"fig2c.csv", "fig3c.csv", "fig3d.csv", "fig3_measured.csv", "fig4a.csv", "fig4b.csv"};
    summary.values["results"] = results.string();
    stage(ExitCode::config, [&] { finish_summary(summary, out, "figures_summary.txt", "figures_timings.txt"); });
    return summary;
}

namespace {

struct Flags {
    std::string config;
    std::string scenario;
    std::string out;
    std::optional<std::uint64_t> seed;
    int workers = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
    std::optional<double> fix_u_hz;
    std::optional<int> nmax;
    std::optional<int> dimension;
    std::string dataset;
    std::string results;
    int max_n = 8;
    int grid = 200;
};

ScenarioConfig effective_config(const Flags& flags, const fs::path* dataset) {
    if (!flags.config.empty() && !flags.scenario.empty()) {
        throw DomainError("give either --config or --scenario, not both");
    }
    ScenarioConfig config;
    if (!flags.config.empty()) {
        config = load_config(flags.config);
    } else if (dataset && fs::exists(*dataset / "config.txt")) {
        config = load_config(*dataset / "config.txt");
    } else {
        config = ScenarioConfig::preset(flags.scenario.empty() ? ScenarioKind::mott
                                                               : scenario_kind_from_string(flags.scenario));
    }
    if (flags.seed) {
        config.seed = *flags.seed;
    }
    if (!flags.out.empty()) {
        config.output_dir = flags.out;
    }
    if (flags.fix_u_hz) {
        config.fit_fix_u_over_h_khz = *flags.fix_u_hz / 1e3;
    }
    if (flags.nmax) {
        config.fit_max_atoms = *flags.nmax;
    }
    if (flags.dimension) {
        config.fit_dimension = *flags.dimension;
    }
    config.validate();
    return config;
}

void print_summary(std::ostream& out, const std::string& command, const RunSummary& summary, const fs::path& dir) {
    out << command << ": " << summary.files.size() << " files in " << dir.string() << " (config " << summary.config_hash
        << ")\n";
    for (const auto& [key, value] : summary.values) {
        out << key << '=' << value << '\n';
    }
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Double-well Fock-state interferometry: simulate fringe data and recover occupation statistics",
                 "fockfringe"};
    app.require_subcommand(1);
    Flags flags;

    auto add_common = [&](CLI::App* sub, bool with_seed) {
        sub->add_option("--config", flags.config, "Scenario config file (key=value)");
        sub->add_option("--out", flags.out, "Output directory");
        sub->add_option("--workers", flags.workers, "Worker threads")->check(CLI::Range(1, 1024));
        if (with_seed) {
            sub->add_option("--seed", flags.seed, "Noise seed (overrides noise.seed)");
            sub->add_option("--scenario", flags.scenario, "Preset when no config is given")
                ->check(CLI::IsMember({"mott", "fast-poisson", "constructed-pairs", "custom"}));
        }
    };
    auto add_fit_flags = [&](CLI::App* sub) {
        sub->add_option("--fix-u", flags.fix_u_hz, "Hold U/h fixed at this value in Hz");
        sub->add_option("--nmax", flags.nmax, "Largest site occupation in the C(t) fit")->check(CLI::Range(1, 1000));
        sub->add_option("--dimension", flags.dimension, "TF profile dimension for the occupation fit")
            ->check(CLI::IsMember({2, 3}));
    };

    auto* simulate = app.add_subcommand("simulate", "Write a synthetic profile dataset");
    add_common(simulate, true);
    auto* fit = app.add_subcommand("fit", "Fit a profile dataset");
    fit->add_option("dataset", flags.dataset, "Dataset directory (contains manifest.csv)")->required();
    add_common(fit, false);
    add_fit_flags(fit);
    auto* pipeline = app.add_subcommand("pipeline", "simulate followed by fit in one directory");
    add_common(pipeline, true);
    add_fit_flags(pipeline);
    auto* oracle = app.add_subcommand("oracle", "Check brute-force coherence against the closed form");
    oracle->add_option("--max-n", flags.max_n, "Largest atom number checked");
    oracle->add_option("--grid", flags.grid, "Time points over two revival periods");
    oracle->add_option("--config", flags.config, "Scenario config (for U)");
    oracle->add_option("--out", flags.out, "Directory for oracle.txt");
    auto* figures = app.add_subcommand("figures", "Export plot data from fit results");
    figures->add_option("--results", flags.results, "Directory written by fit")->required();
    add_common(figures, false);

    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return 0;
        }
        err << failure_line(CommandError(ExitCode::config, "usage", e.what())) << '\n';
        return static_cast<int>(ExitCode::config);
    }

    try {
        if (simulate->parsed() || pipeline->parsed()) {
            const auto config = stage(ExitCode::config, [&] { return effective_config(flags, nullptr); });
            const fs::path dir = config.output_dir;
            if (simulate->parsed()) {
                print_summary(out, "simulate", cmd_simulate(config, dir, flags.workers), dir);
            } else {
                print_summary(out, "pipeline", cmd_pipeline(config, dir, flags.workers), dir);
            }
        } else if (fit->parsed()) {
            const fs::path dataset = flags.dataset;
            const auto config = stage(ExitCode::config, [&] { return effective_config(flags, &dataset); });
            const fs::path dir = flags.out.empty() ? dataset : fs::path(flags.out);
            print_summary(out, "fit", cmd_fit(dataset, config, dir, flags.workers), dir);
        } else if (oracle->parsed()) {
            const auto report = stage(ExitCode::config, [&] {
                const auto config = flags.config.empty() ? ScenarioConfig::preset(ScenarioKind::mott)
                                                         : load_config(flags.config);
                return cmd_oracle(flags.max_n, flags.grid, config.splitter());
            });
            write_oracle_report(out, report);
            if (!flags.out.empty()) {
                stage(ExitCode::config, [&] {
                    prepare_directory(flags.out);
                    std::ofstream file(fs::path(flags.out) / "oracle.txt", std::ios::binary | std::ios::trunc);
                    write_oracle_report(file, report);
                    if (!file.flush()) {
                        throw IoError("failed writing " + (fs::path(flags.out) / "oracle.txt").string());
                    }
                });
            }
            if (!report.pass) {
                err << failure_line(CommandError(ExitCode::numerical, "oracle", "oracle identity violated")) << '\n';
                return static_cast<int>(ExitCode::numerical);
            }
        } else if (figures->parsed()) {
            const fs::path results = flags.results;
            const auto config = stage(ExitCode::config, [&] { return effective_config(flags, &results); });
            const fs::path dir = flags.out.empty() ? results : fs::path(flags.out);
            print_summary(out, "figures", cmd_figures(config, results, dir), dir);
        }
    } catch (const CommandError& e) {
        err << failure_line(e) << '\n';
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        err << failure_line(CommandError(ExitCode::numerical, "internal", e.what())) << '\n';
        return static_cast<int>(ExitCode::numerical);
    }
    return 0;
}

} // namespace fockfringe::cli
