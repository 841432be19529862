// Command-line front end: simulation, model curves, collapse Monte Carlo,
// fitting, atom-number scans, and manifest-verified reruns.  Every run that
// produces files also writes <first-output>.manifest.json recording the
// command, the fully resolved configuration, seeds, and output digests.
//
// Exit codes: 0 success, 2 usage, 3 configuration, 4 input-data/fit,
// 5 runtime, 6 rerun verification mismatch.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "selftrap/collapse.hpp"
#include "selftrap/config.hpp"
#include "selftrap/core_model.hpp"
#include "selftrap/csv.hpp"
#include "selftrap/dynamics.hpp"
#include "selftrap/estimation.hpp"
#include "selftrap/manifest.hpp"
#include "selftrap/params.hpp"
#include "selftrap/trap_physics.hpp"
#include "selftrap/units.hpp"

namespace {

using namespace selftrap;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitData = 4;
constexpr int kExitRuntime = 5;
constexpr int kExitVerify = 6;

int run_cli(const std::vector<std::string>& args);

// Options shared by every subcommand.
struct CommonArgs {
    std::string config_path = "defaults";
    std::optional<std::uint64_t> seed;
    int threads = 0;
};

void add_common_options(CLI::App* cmd, CommonArgs& common) {
    cmd->add_option("--config", common.config_path,
                    "configuration file path, or 'defaults'")
        ->capture_default_str();
    cmd->add_option("--seed", common.seed, "master seed (overrides the config)");
    cmd->add_option("--threads", common.threads,
                    "worker threads (0 = all cores); outputs do not depend on it")
        ->capture_default_str();
}

ResolvedConfig load_config(const CommonArgs& common) {
    ResolvedConfig cfg =
        common.config_path == "defaults" ? ResolvedConfig{} : parse_config(common.config_path);
    if (common.seed) cfg.set("seed", static_cast<double>(*common.seed));
    return cfg;
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

RunManifest start_manifest(const std::vector<std::string>& args, const ResolvedConfig& cfg,
                           const CommonArgs& common) {
    RunManifest manifest;
    manifest.command.push_back("selftrap");
    manifest.command.insert(manifest.command.end(), args.begin(), args.end());
    manifest.config = cfg.entries;
    manifest.seed = static_cast<std::uint64_t>(cfg.get("seed"));
    manifest.threads = common.threads;
    manifest.started_utc = utc_timestamp();
    return manifest;
}

void finish_manifest(RunManifest& manifest, const std::vector<std::string>& outputs) {
    for (const auto& path : outputs) manifest.add_output(path);
    manifest.finished_utc = utc_timestamp();
    write_manifest(outputs.front() + ".manifest.json", manifest);
}

std::vector<double> parse_number_list(const std::string& text, const std::string& flag) {
    std::vector<double> values;
    std::size_t begin = 0;
    while (begin <= text.size()) {
        const std::size_t comma = text.find(',', begin);
        const std::string cell = text.substr(begin, comma - begin);
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        if (cell.empty() || end == cell.c_str() || *end != '\0')
            throw CLI::ValidationError(flag, "'" + cell + "' is not a number");
        values.push_back(v);
        if (comma == std::string::npos) break;
        begin = comma + 1;
    }
    if (values.empty()) throw CLI::ValidationError(flag, "empty list");
    return values;
}

std::vector<double> parse_grid(const std::string& text, const std::string& flag) {
    // lo:hi:n, inclusive linear grid
    const std::size_t c1 = text.find(':');
    const std::size_t c2 = c1 == std::string::npos ? std::string::npos : text.find(':', c1 + 1);
    if (c2 == std::string::npos)
        throw CLI::ValidationError(flag, "expected lo:hi:n, got '" + text + "'");
    const double lo = std::strtod(text.substr(0, c1).c_str(), nullptr);
    const double hi = std::strtod(text.substr(c1 + 1, c2 - c1 - 1).c_str(), nullptr);
    const long n = std::strtol(text.substr(c2 + 1).c_str(), nullptr, 10);
    if (!(n >= 1) || !(hi >= lo))
        throw CLI::ValidationError(flag, "bad grid '" + text + "'");
    std::vector<double> grid(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i)
        grid[static_cast<std::size_t>(i)] =
            n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return grid;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    CommonArgs common;
    std::string out;
    std::size_t traces = 1;
    std::optional<double> delta_c_mhz, eta_over_kappa, power_uw, n_atoms, record_until_ms,
        temperature_uk;
    std::optional<std::size_t> macroparticles;
};

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv) {
    ResolvedConfig cfg;
    SystemParams params;
    ProtocolConfig protocol;
    DriveConfig drive;
    try {
        cfg = load_config(a.common);
        if (a.delta_c_mhz) cfg.set("delta_c_MHz", *a.delta_c_mhz);
        if (a.eta_over_kappa) {
            cfg.set("eta_over_kappa", *a.eta_over_kappa);
            cfg.set("power_uW", -1.0);
        }
        if (a.power_uw) cfg.set("power_uW", *a.power_uw);
        if (a.n_atoms) cfg.set("n_atoms", *a.n_atoms);
        if (a.record_until_ms) cfg.set("record_until_ms", *a.record_until_ms);
        if (a.temperature_uk) cfg.set("temperature_uK", *a.temperature_uk);
        if (a.macroparticles)
            cfg.set("n_macroparticles", static_cast<double>(*a.macroparticles));
        params = cfg.system();
        print_warnings(params.validate());
        protocol = cfg.protocol();
        protocol.validate();
        drive = cfg.drive();
        drive.validate();
    } catch (const std::exception& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        RunManifest manifest = start_manifest(argv, cfg, a.common);
        const EnsembleResult result =
            run_protocol_ensemble(protocol, drive, params, a.traces, a.common.threads);
        const TransmissionTrace& trace = result.average;
        print_warnings(trace.warnings);

        CsvTable table;
        table.columns = {"t_ms",           "photon_number",
                         "transmission_norm", "n_eff",
                         "trapped_fraction", "resonant_photon_number",
                         "empty_photon_number"};
        table.data.resize(table.columns.size());
        for (std::size_t i = 0; i < trace.size(); ++i) {
            table.data[0].push_back(trace.t_ms[i]);
            table.data[1].push_back(trace.photon_number[i]);
            table.data[2].push_back(trace.transmission_norm(i));
            table.data[3].push_back(trace.n_eff[i]);
            table.data[4].push_back(trace.trapped_fraction[i]);
            table.data[5].push_back(trace.resonant_photon_number);
            table.data[6].push_back(trace.empty_photon_number);
        }
        write_csv(a.out, table);
        finish_manifest(manifest, {a.out});
        std::cerr << "simulate: " << a.traces << " trace(s), " << trace.size()
                  << " samples -> " << a.out << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

// --------------------------------------------------------------- trap-curve

struct TrapCurveArgs {
    CommonArgs common;
    std::string out;
    std::string powers = "0.02:3.0:50";
    std::string delta_c_mhz = "-1,-2,-3";
    std::string d0 = "0.475,0.627,0.884";
    std::string d1 = "0.759,1.12,1.32";
    std::optional<double> temperature_uk;
};

int cmd_trap_curve(const TrapCurveArgs& a, const std::vector<std::string>& argv) {
    ResolvedConfig cfg;
    SystemParams params;
    CalibrationAnchor anchor;
    double temperature = 0.0;
    std::vector<double> powers, detunings, d0s, d1s;
    try {
        cfg = load_config(a.common);
        if (a.temperature_uk) cfg.set("temperature_uK", *a.temperature_uk);
        params = cfg.system();
        print_warnings(params.validate());
        anchor = cfg.anchor();
        temperature = cfg.get("temperature_uK");
        powers = parse_grid(a.powers, "--powers");
        detunings = parse_number_list(a.delta_c_mhz, "--delta-c-mhz");
        d0s = parse_number_list(a.d0, "--d0");
        d1s = parse_number_list(a.d1, "--d1");
        auto broadcast = [&](std::vector<double>& v, const char* flag) {
            if (v.size() == 1) v.assign(detunings.size(), v[0]);
            if (v.size() != detunings.size())
                throw ConfigError(std::string(flag) +
                                  ": need one value, or one per cavity detuning");
        };
        broadcast(d0s, "--d0");
        broadcast(d1s, "--d1");
    } catch (const std::exception& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        RunManifest manifest = start_manifest(argv, cfg, a.common);
        CsvTable table;
        table.columns = {"power_uW", "delta_c_mhz", "d0", "d1", "saturation", "tau_ms"};
        table.data.resize(table.columns.size());
        for (std::size_t k = 0; k < detunings.size(); ++k) {
            const HeatingModel model =
                HeatingModel::with_temperature_uK(d0s[k], d1s[k], temperature);
            const double delta_c = mhz_to_angular(detunings[k]);
            for (double power : powers) {
                const double s =
                    saturation_from_power(power, anchor, delta_c, anchor.n_eff_u0, params);
                const double tau = empirical_trapping_time_ms(s, model, params).value_or(0.0);
                table.data[0].push_back(power);
                table.data[1].push_back(detunings[k]);
                table.data[2].push_back(d0s[k]);
                table.data[3].push_back(d1s[k]);
                table.data[4].push_back(s);
                table.data[5].push_back(tau);
            }
        }
        write_csv(a.out, table);
        finish_manifest(manifest, {a.out});
        std::cerr << "trap-curve: " << detunings.size() << " curve(s) x " << powers.size()
                  << " powers -> " << a.out << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

// ----------------------------------------------------------------- collapse

struct CollapseArgs {
    CommonArgs common;
    std::string out;
    double a_param = 2.775;
    double tau_ms = 2.0;
    double delta_c_mhz = -1.87;
    double n0_u0_mhz = -1.0;
    double n0 = 10000.0;
    int traces = 50;
    double t_end_ms = 0.0;  // 0 = automatic
    int samples = 400;
};

int cmd_collapse(const CollapseArgs& a, const std::vector<std::string>& argv) {
    ResolvedConfig cfg;
    DecayModelParams model;
    try {
        cfg = load_config(a.common);
        const double kappa = mhz_to_angular(cfg.get("kappa_MHz"));
        model.delta_c_tilde = mhz_to_angular(a.delta_c_mhz) / kappa;
        model.u0_tilde = a.n0 > 0.0 ? mhz_to_angular(a.n0_u0_mhz) / kappa / a.n0 : 0.0;
        model.n0 = a.n0;
        model.a_param = a.a_param;
        model.tau_ms = a.tau_ms;
        model.kappa = kappa;
        model.validate();
        if (a.traces < 1) throw ConfigError("--traces must be >= 1");
    } catch (const std::exception& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        RunManifest manifest = start_manifest(argv, cfg, a.common);
        double t_end = a.t_end_ms;
        if (t_end <= 0.0) {
            // Cover the full decay: the slowest per-atom rate bounds it.
            const double slow = std::exp(
                -model.a_param / (model.delta_c_tilde * model.delta_c_tilde + 1.0));
            t_end = 5.0 * model.tau_ms / std::max(slow, 1e-6);
        }
        const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get("seed"));
        const DecayCurve curve = mean_decay_curve(model, t_end, a.traces, seed, a.samples);

        CsvTable table;
        table.columns = {"t_ms", "n_mean", "n_meanfield", "transmission_norm"};
        table.data.resize(table.columns.size());
        for (std::size_t i = 0; i < curve.t_ms.size(); ++i) {
            table.data[0].push_back(curve.t_ms[i]);
            table.data[1].push_back(curve.n_mean[i]);
            table.data[2].push_back(curve.n_meanfield[i]);
            table.data[3].push_back(normalized_transmission(curve.n_mean[i], model));
        }
        write_csv(a.out, table);
        finish_manifest(manifest, {a.out});
        std::cerr << "collapse: " << a.traces << " trajectories, n0 = " << a.n0 << " -> "
                  << a.out << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

// -------------------------------------------------------------- fit-heating

struct FitHeatingArgs {
    CommonArgs common;
    std::string data;
    std::string report;
    std::string out;  // optional fitted-curve CSV
    double delta_c_mhz = -2.0;
    std::optional<double> temperature_uk;
};

nlohmann::ordered_json fit_result_json(const FitResult& fit) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json params;
    for (const auto& [name, value] : fit.parameters) params[name] = value;
    j["parameters"] = params;
    j["residual_rms"] = fit.residual_rms;
    j["n_evaluations"] = fit.n_evaluations;
    j["converged"] = fit.converged;
    j["parameter_bounds_hit"] = fit.parameter_bounds_hit;
    return j;
}

void write_report(const std::string& path, const nlohmann::ordered_json& j) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("report: cannot open '" + path + "' for writing");
    file << j.dump(2) << '\n';
    if (!file) throw std::runtime_error("report: write to '" + path + "' failed");
}

int cmd_fit_heating(const FitHeatingArgs& a, const std::vector<std::string>& argv) {
    ResolvedConfig cfg;
    SystemParams params;
    CalibrationAnchor anchor;
    double temperature = 0.0;
    try {
        cfg = load_config(a.common);
        if (a.temperature_uk) cfg.set("temperature_uK", *a.temperature_uk);
        params = cfg.system();
        print_warnings(params.validate());
        anchor = cfg.anchor();
        temperature = cfg.get("temperature_uK");
    } catch (const std::exception& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    }

    std::vector<HeatingPoint> points;
    FitResult fit;
    try {
        const CsvTable input = read_csv(a.data);
        if (!input.has_column("power_uW") || !input.has_column("tau_ms"))
            throw std::runtime_error("data file needs columns power_uW and tau_ms");
        const auto& power = input.column("power_uW");
        const auto& tau = input.column("tau_ms");
        for (std::size_t i = 0; i < power.size(); ++i) points.push_back({power[i], tau[i]});
        fit = fit_heating_coefficients(points, params, temperature, anchor,
                                       mhz_to_angular(a.delta_c_mhz));
    } catch (const FitError& e) {
        std::cerr << "fit error (" << e.category() << "): " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    }

    try {
        RunManifest manifest = start_manifest(argv, cfg, a.common);
        nlohmann::ordered_json j = fit_result_json(fit);
        j["fixed"] = {{"delta_c_mhz", a.delta_c_mhz}, {"temperature_uK", temperature}};
        write_report(a.report, j);
        std::vector<std::string> outputs = {a.report};

        if (!a.out.empty()) {
            const HeatingModel model = HeatingModel::with_temperature_uK(
                fit.parameters.at("d0"), fit.parameters.at("d1"), temperature);
            double lo = points.front().power_uW, hi = lo;
            for (const auto& pt : points) {
                lo = std::min(lo, pt.power_uW);
                hi = std::max(hi, pt.power_uW);
            }
            CsvTable table;
            table.columns = {"power_uW", "tau_ms_model"};
            table.data.resize(2);
            const int n = 200;
            for (int i = 0; i < n; ++i) {
                const double p_uw = lo + (hi - lo) * i / (n - 1);
                const double s = saturation_from_power(p_uw, anchor,
                                                       mhz_to_angular(a.delta_c_mhz),
                                                       anchor.n_eff_u0, params);
                table.data[0].push_back(p_uw);
                table.data[1].push_back(
                    empirical_trapping_time_ms(s, model, params).value_or(0.0));
            }
            write_csv(a.out, table);
            outputs.push_back(a.out);
        }
        finish_manifest(manifest, outputs);
        std::cerr << "fit-heating: d0 = " << fit.parameters.at("d0")
                  << ", d1 = " << fit.parameters.at("d1") << " -> " << a.report << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

// ------------------------------------------------------------- fit-collapse

struct FitCollapseArgs {
    CommonArgs common;
    std::string data;
    std::string report;
    std::string out;  // optional fitted-curve CSV
    int bootstrap = 0;
    bool nonexponentiality = false;
};

int cmd_fit_collapse(const FitCollapseArgs& a, const std::vector<std::string>& argv) {
    ResolvedConfig cfg;
    CollapseFitOptions options;
    try {
        cfg = load_config(a.common);
        options.kappa = mhz_to_angular(cfg.get("kappa_MHz"));
        options.bootstrap_samples = a.bootstrap;
        options.seed = static_cast<std::uint64_t>(cfg.get("seed"));
    } catch (const std::exception& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    }

    std::vector<double> t_ms, y;
    FitResult fit;
    nlohmann::ordered_json extra;
    try {
        const CsvTable input = read_csv(a.data);
        if (!input.has_column("t_ms") || !input.has_column("transmission"))
            throw std::runtime_error("data file needs columns t_ms and transmission");
        t_ms = input.column("t_ms");
        y = input.column("transmission");
        fit = fit_collapse_model(t_ms, y, options);
        if (a.nonexponentiality) {
            const NonexponentialityReport nx = nonexponentiality_test(t_ms, y, 2.0, options);
            extra = {{"improvement", nx.improvement},
                     {"nonexponential", nx.nonexponential},
                     {"rms_exponential", nx.rms_exponential},
                     {"rms_model", nx.rms_model},
                     {"threshold", nx.threshold}};
        }
    } catch (const FitError& e) {
        std::cerr << "fit error (" << e.category() << "): " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    }

    try {
        RunManifest manifest = start_manifest(argv, cfg, a.common);
        nlohmann::ordered_json j = fit_result_json(fit);
        if (!extra.is_null()) j["nonexponentiality"] = extra;
        write_report(a.report, j);
        std::vector<std::string> outputs = {a.report};

        if (!a.out.empty()) {
            DecayModelParams model;
            model.delta_c_tilde = fit.parameters.at("delta_c_tilde");
            model.u0_tilde = fit.parameters.at("n0_u0_tilde");
            model.n0 = 1.0;
            model.a_param = fit.parameters.at("a_param");
            model.tau_ms = fit.parameters.at("tau_ms");
            model.kappa = 1.0;
            std::vector<double> shifted(t_ms.size());
            for (std::size_t i = 0; i < t_ms.size(); ++i) shifted[i] = t_ms[i] - t_ms.front();
            std::vector<double> nu = mean_field_decay(model, shifted, 8);
            CsvTable table;
            table.columns = {"t_ms", "transmission_model"};
            table.data.resize(2);
            for (std::size_t i = 0; i < t_ms.size(); ++i) {
                table.data[0].push_back(t_ms[i]);
                table.data[1].push_back(fit.parameters.at("amplitude") *
                                            normalized_transmission(nu[i], model) +
                                        fit.parameters.at("offset"));
            }
            write_csv(a.out, table);
            outputs.push_back(a.out);
        }
        finish_manifest(manifest, outputs);
        std::cerr << "fit-collapse: a_param = " << fit.parameters.at("a_param")
                  << ", tau = " << fit.parameters.at("tau_ms") << " ms -> " << a.report
                  << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

// --------------------------------------------------------- scan-atom-number

struct ScanArgs {
    CommonArgs common;
    std::string out;
    double delta_c_mhz = -2.0;
    double eta_over_kappa = 290.0;
    double n_atoms_min = 7.561e5;
    double n_atoms_max = 7.561e6;
    int points = 5;
    std::size_t traces = 10;
    std::optional<double> record_until_ms;
    std::optional<std::size_t> macroparticles;
};

int cmd_scan_atom_number(const ScanArgs& a, const std::vector<std::string>& argv) {
    ResolvedConfig cfg;
    SystemParams params;
    ProtocolConfig protocol;
    DriveConfig drive;
    try {
        cfg = load_config(a.common);
        cfg.set("delta_c_MHz", a.delta_c_mhz);
        cfg.set("eta_over_kappa", a.eta_over_kappa);
        cfg.set("power_uW", -1.0);
        if (a.record_until_ms) cfg.set("record_until_ms", *a.record_until_ms);
        if (a.macroparticles)
            cfg.set("n_macroparticles", static_cast<double>(*a.macroparticles));
        params = cfg.system();
        print_warnings(params.validate());
        protocol = cfg.protocol();
        protocol.validate();
        drive = cfg.drive();
        drive.validate();
        if (a.points < 1) throw ConfigError("--points must be >= 1");
        if (!(a.n_atoms_min > 0.0) || !(a.n_atoms_max >= a.n_atoms_min))
            throw ConfigError("need 0 < --n-atoms-min <= --n-atoms-max");
    } catch (const std::exception& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        RunManifest manifest = start_manifest(argv, cfg, a.common);
        CsvTable table;
        table.columns = {"n_atoms", "tau_ms", "tau_std_ms", "peak_time_ms",
                         "peak_transmission_norm"};
        table.data.resize(table.columns.size());
        for (int i = 0; i < a.points; ++i) {
            const double f = a.points == 1
                                 ? 0.0
                                 : static_cast<double>(i) / static_cast<double>(a.points - 1);
            const double n_atoms =
                a.n_atoms_min * std::pow(a.n_atoms_max / a.n_atoms_min, f);
            ProtocolConfig point = protocol;
            point.n_atoms = n_atoms;
            const EnsembleResult result =
                run_protocol_ensemble(point, drive, params, a.traces, a.common.threads);
            print_warnings(result.average.warnings);

            // Trapping time per seed, then averaged.  The crossing time is a
            // threshold functional: near the knee the seed-averaged trace can
            // hover at its own midpoint for milliseconds, so extracting from
            // the average is ill-conditioned while the mean of per-seed times
            // varies smoothly with atom number.
            std::vector<double> taus, peak_ts, peak_levels;
            for (const TransmissionTrace& trace : result.traces) {
                taus.push_back(
                    extract_trapping_time(trace, point.drive_on_time_ms).value_or(0.0));
                std::size_t peak = 0;
                for (std::size_t k = 0; k < trace.size(); ++k)
                    if (trace.t_ms[k] >= point.drive_on_time_ms &&
                        trace.photon_number[k] > trace.photon_number[peak])
                        peak = k;
                peak_ts.push_back(trace.t_ms[peak]);
                peak_levels.push_back(trace.transmission_norm(peak));
            }
            const double m = static_cast<double>(taus.size());
            const auto mean = [m](const std::vector<double>& v) {
                return std::accumulate(v.begin(), v.end(), 0.0) / m;
            };
            const double tau_mean = mean(taus);
            double tau_var = 0.0;
            for (double t : taus) tau_var += (t - tau_mean) * (t - tau_mean);
            const double tau_std = m > 1.0 ? std::sqrt(tau_var / (m - 1.0)) : 0.0;
            table.data[0].push_back(n_atoms);
            table.data[1].push_back(tau_mean);
            table.data[2].push_back(tau_std);
            table.data[3].push_back(mean(peak_ts));
            table.data[4].push_back(mean(peak_levels));
            std::cerr << "scan-atom-number: N = " << n_atoms << " -> tau = " << tau_mean
                      << " +- " << tau_std << " ms\n";
        }
        write_csv(a.out, table);
        finish_manifest(manifest, {a.out});
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

// -------------------------------------------------------------------- rerun

struct RerunArgs {
    std::string manifest_path;
    std::optional<int> threads;
};

int cmd_rerun(const RerunArgs& a) {
    RunManifest recorded;
    try {
        recorded = read_manifest(a.manifest_path);
        if (recorded.command.size() < 2)
            throw std::runtime_error("manifest records no command to run");
        if (recorded.command[1] == "rerun")
            throw std::runtime_error("manifest records a rerun command; refusing to recurse");
    } catch (const std::exception& e) {
        std::cerr << "manifest error: " << e.what() << '\n';
        return kExitData;
    }

    // Re-execute the recorded command (minus the program name), with the
    // thread count replaced when requested: outputs must not depend on it.
    std::vector<std::string> args(recorded.command.begin() + 1, recorded.command.end());
    for (std::size_t i = 0; i + 1 < args.size();) {
        if (args[i] == "--threads")
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                       args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
        else
            ++i;
    }
    const int threads = a.threads ? *a.threads : recorded.threads;
    args.push_back("--threads");
    args.push_back(std::to_string(threads));

    const int status = run_cli(args);
    if (status != kExitOk) {
        std::cerr << "rerun: recorded command failed with exit code " << status << '\n';
        return status;
    }
    const std::vector<std::string> mismatches = verify_manifest_outputs(recorded);
    if (!mismatches.empty()) {
        for (const auto& m : mismatches) std::cerr << "rerun mismatch: " << m << '\n';
        return kExitVerify;
    }
    std::cerr << "rerun: verified " << recorded.outputs.size() << " output(s) byte-identical\n";
    return kExitOk;
}

// ----------------------------------------------------------------- dispatch

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"cold-atom cavity self-trapping: simulator and estimation toolkit"};
    app.require_subcommand(1);

    SimulateArgs sim;
    CLI::App* c_sim = app.add_subcommand(
        "simulate", "run the release-and-retrap protocol, write the averaged trace");
    add_common_options(c_sim, sim.common);
    c_sim->add_option("--out", sim.out, "output CSV path")->required();
    c_sim->add_option("--traces", sim.traces, "independent trajectories to average")
        ->capture_default_str();
    c_sim->add_option("--delta-c-mhz", sim.delta_c_mhz, "cavity detuning / MHz");
    c_sim->add_option("--eta-over-kappa", sim.eta_over_kappa, "drive amplitude / kappa");
    c_sim->add_option("--power-uw", sim.power_uw, "drive power / uW (calibration anchor)")
        ->excludes("--eta-over-kappa");
    c_sim->add_option("--n-atoms", sim.n_atoms, "physical atom count");
    c_sim->add_option("--record-until-ms", sim.record_until_ms, "trace length / ms");
    c_sim->add_option("--temperature-uk", sim.temperature_uk, "cloud temperature / uK");
    c_sim->add_option("--macroparticles", sim.macroparticles, "simulation particles");

    TrapCurveArgs curve;
    CLI::App* c_curve = app.add_subcommand(
        "trap-curve", "trapping-time-vs-power model curves for given heating coefficients");
    add_common_options(c_curve, curve.common);
    c_curve->add_option("--out", curve.out, "output CSV path")->required();
    c_curve->add_option("--powers", curve.powers, "power grid lo:hi:n / uW")
        ->capture_default_str();
    c_curve->add_option("--delta-c-mhz", curve.delta_c_mhz, "cavity detunings, comma list")
        ->capture_default_str();
    c_curve->add_option("--d0", curve.d0, "saturation-independent heating coefficients")
        ->capture_default_str();
    c_curve->add_option("--d1", curve.d1, "saturation-linear heating coefficients")
        ->capture_default_str();
    c_curve->add_option("--temperature-uk", curve.temperature_uk, "cloud temperature / uK");

    CollapseArgs col;
    CLI::App* c_col = app.add_subcommand(
        "collapse", "stochastic ensemble decay: Monte Carlo mean and mean-field curve");
    add_common_options(c_col, col.common);
    c_col->add_option("--out", col.out, "output CSV path")->required();
    c_col->add_option("--a", col.a_param, "activation strength")->capture_default_str();
    c_col->add_option("--tau-ms", col.tau_ms, "base escape timescale / ms")
        ->capture_default_str();
    c_col->add_option("--delta-c-mhz", col.delta_c_mhz, "cavity detuning / MHz")
        ->capture_default_str();
    c_col->add_option("--n0-u0-mhz", col.n0_u0_mhz,
                      "initial collective light shift n0*U0 / MHz")
        ->capture_default_str();
    c_col->add_option("--n0", col.n0, "initial atom count")->capture_default_str();
    c_col->add_option("--traces", col.traces, "Monte Carlo trajectories")
        ->capture_default_str();
    c_col->add_option("--t-end-ms", col.t_end_ms, "time window / ms (0 = automatic)")
        ->capture_default_str();
    c_col->add_option("--samples", col.samples, "grid points")->capture_default_str();

    FitHeatingArgs fih;
    CLI::App* c_fih = app.add_subcommand(
        "fit-heating", "fit heating coefficients (d0, d1) to power/trapping-time data");
    add_common_options(c_fih, fih.common);
    c_fih->add_option("--data", fih.data, "input CSV with columns power_uW, tau_ms")
        ->required();
    c_fih->add_option("--report", fih.report, "output JSON fit report")->required();
    c_fih->add_option("--out", fih.out, "optional fitted-curve CSV");
    c_fih->add_option("--delta-c-mhz", fih.delta_c_mhz, "cavity detuning of the data / MHz")
        ->capture_default_str();
    c_fih->add_option("--temperature-uk", fih.temperature_uk, "cloud temperature / uK");

    FitCollapseArgs fic;
    CLI::App* c_fic = app.add_subcommand(
        "fit-collapse", "fit the collapse rate law to a transmission decay trace");
    add_common_options(c_fic, fic.common);
    c_fic->add_option("--data", fic.data, "input CSV with columns t_ms, transmission")
        ->required();
    c_fic->add_option("--report", fic.report, "output JSON fit report")->required();
    c_fic->add_option("--out", fic.out, "optional fitted-curve CSV");
    c_fic->add_option("--bootstrap", fic.bootstrap,
                      "residual-resampling samples for parameter spreads")
        ->capture_default_str();
    c_fic->add_flag("--nonexponentiality", fic.nonexponentiality,
                    "also compare against the best single exponential");

    ScanArgs scan;
    CLI::App* c_scan = app.add_subcommand(
        "scan-atom-number", "trapping time across a geometric atom-number grid");
    add_common_options(c_scan, scan.common);
    c_scan->add_option("--out", scan.out, "output CSV path")->required();
    c_scan->add_option("--delta-c-mhz", scan.delta_c_mhz, "cavity detuning / MHz")
        ->capture_default_str();
    c_scan->add_option("--eta-over-kappa", scan.eta_over_kappa, "drive amplitude / kappa")
        ->capture_default_str();
    c_scan->add_option("--n-atoms-min", scan.n_atoms_min, "smallest atom number")
        ->capture_default_str();
    c_scan->add_option("--n-atoms-max", scan.n_atoms_max, "largest atom number")
        ->capture_default_str();
    c_scan->add_option("--points", scan.points, "grid points (geometric)")
        ->capture_default_str();
    c_scan->add_option("--traces", scan.traces, "trajectories averaged per point")
        ->capture_default_str();
    c_scan->add_option("--record-until-ms", scan.record_until_ms, "trace length / ms");
    c_scan->add_option("--macroparticles", scan.macroparticles, "simulation particles");

    RerunArgs rerun;
    CLI::App* c_rerun = app.add_subcommand(
        "rerun", "re-execute a recorded run and verify byte-identical outputs");
    c_rerun->add_option("manifest", rerun.manifest_path, "manifest JSON path")->required();
    c_rerun->add_option("--threads", rerun.threads, "override the recorded thread count");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    if (c_sim->parsed()) return cmd_simulate(sim, args);
    if (c_curve->parsed()) return cmd_trap_curve(curve, args);
    if (c_col->parsed()) return cmd_collapse(col, args);
    if (c_fih->parsed()) return cmd_fit_heating(fih, args);
    if (c_fic->parsed()) return cmd_fit_collapse(fic, args);
    if (c_scan->parsed()) return cmd_scan_atom_number(scan, args);
    if (c_rerun->parsed()) return cmd_rerun(rerun);
    std::cerr << app.help();
    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args;
    args.reserve(static_cast<std::size_t>(argc));
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}
