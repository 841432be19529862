#pragma once

// Flat key=value run configuration.  Every key has a default matching the
// published experiment, so an empty file is a complete configuration; the
// parser rejects unknown keys (with a nearest-key suggestion), duplicates,
// and non-numeric values, all with line-numbered diagnostics.
//
// Frequencies are plain nu in MHz (or kHz where noted); the 2*pi lives in
// the accessors.  Booleans are 0/1.  power_uW = -1 means "not set": the
// drive then comes from eta_over_kappa, otherwise from the power calibration
// anchor; setting both explicitly is an error.

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "selftrap/core_model.hpp"
#include "selftrap/dynamics.hpp"
#include "selftrap/params.hpp"
#include "selftrap/trap_physics.hpp"
#include "selftrap/units.hpp"

namespace selftrap {

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline const std::vector<std::pair<std::string, double>>& config_defaults() {
    static const std::vector<std::pair<std::string, double>> defaults = {
        // cavity and atom
        {"kappa_MHz", 2.77},
        {"g_MHz", 0.33},
        {"gamma_MHz", 3.03},
        {"delta_a_MHz", -1066.0},
        {"u0_factor", 0.7},
        {"omega_rec_kHz", 3.771},
        {"wavelength_um", 0.780},
        {"waist_um", 127.0},
        {"gravity_um_ms2", 9.81},
        // drive
        {"delta_c_MHz", -3.0},
        {"eta_over_kappa", 620.0},
        {"power_uW", -1.0},
        // release and recording protocol
        {"drive_on_time_ms", 3.0},
        {"shutter_ramp_ms", 0.2},
        {"record_until_ms", 50.0},
        {"dt_us", 0.0},
        {"sample_every_us", 5.0},
        {"cloud_sigma_um", 1000.0},
        {"temperature_uK", 100.0},
        {"n_atoms", 7.561e6},
        {"release_offset_z_um", 0.0},
        {"n_macroparticles", 2000.0},
        {"seed", 1.0},
        {"heating_enabled", 1.0},
        {"gravity_enabled", 1.0},
        // empirical heating coefficients
        {"d0", 0.0},
        {"d1", 0.0},
        // power calibration anchor
        {"anchor_power_uW", 0.7},
        {"anchor_saturation", 0.02},
        {"anchor_delta_c_MHz", -2.0},
        {"anchor_n_eff_u0_MHz", -1.0},
    };
    return defaults;
}

namespace detail {

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1,
                               diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Closest valid key, preferring unit-suffix completions ("kappa" ->
// "kappa_MHz") over general typo distance.
inline std::string suggest_key(const std::string& key) {
    for (const auto& [name, value] : config_defaults())
        if (name.rfind(key + "_", 0) == 0)
            return "unknown key '" + key + "' (missing unit suffix? did you mean '" +
                   name + "'?)";
    std::size_t best_distance = static_cast<std::size_t>(-1);
    std::string best;
    for (const auto& [name, value] : config_defaults()) {
        const std::size_t d = edit_distance(key, name);
        if (d < best_distance) {
            best_distance = d;
            best = name;
        }
    }
    if (best_distance <= 4)
        return "unknown key '" + key + "' (did you mean '" + best + "'?)";
    return "unknown key '" + key + "'";
}

}  // namespace detail

// A complete, validated key-value set (defaults plus file overrides) with
// typed accessors that apply the unit conventions.
struct ResolvedConfig {
    std::vector<std::pair<std::string, double>> entries = config_defaults();

    double get(const std::string& name) const {
        for (const auto& [key, value] : entries)
            if (key == name) return value;
        throw ConfigError("config: no key named '" + name + "'");
    }

    void set(const std::string& name, double value) {
        for (auto& [key, stored] : entries) {
            if (key == name) {
                stored = value;
                return;
            }
        }
        throw ConfigError("config: no key named '" + name + "'");
    }

    bool drive_from_power() const { return get("power_uW") >= 0.0; }

    SystemParams system() const {
        SystemParams p;
        p.kappa = mhz_to_angular(get("kappa_MHz"));
        p.g = mhz_to_angular(get("g_MHz"));
        p.gamma = mhz_to_angular(get("gamma_MHz"));
        p.delta_a = mhz_to_angular(get("delta_a_MHz"));
        p.u0_factor = get("u0_factor");
        p.omega_rec = khz_to_angular(get("omega_rec_kHz"));
        p.wavelength_um = get("wavelength_um");
        p.waist_um = get("waist_um");
        p.gravity_um_ms2 = get("gravity_um_ms2");
        return p;
    }

    CalibrationAnchor anchor() const {
        CalibrationAnchor a;
        a.power_uW = get("anchor_power_uW");
        a.saturation = get("anchor_saturation");
        a.delta_c = mhz_to_angular(get("anchor_delta_c_MHz"));
        a.n_eff_u0 = mhz_to_angular(get("anchor_n_eff_u0_MHz"));
        return a;
    }

    DriveConfig drive() const {
        DriveConfig d;
        d.delta_c = mhz_to_angular(get("delta_c_MHz"));
        if (drive_from_power())
            d.eta = calibrate_power_to_drive(get("power_uW"), anchor(), system());
        else
            d.eta = get("eta_over_kappa") * mhz_to_angular(get("kappa_MHz"));
        return d;
    }

    HeatingModel heating() const {
        return HeatingModel::with_temperature_uK(get("d0"), get("d1"), get("temperature_uK"));
    }

    ProtocolConfig protocol() const {
        auto integer = [this](const char* name) {
            const double v = get(name);
            if (v < 0.0 || v != std::floor(v))
                throw ConfigError(std::string("config: ") + name +
                                  " must be a non-negative integer");
            return v;
        };
        auto boolean = [this](const char* name) {
            const double v = get(name);
            if (v != 0.0 && v != 1.0)
                throw ConfigError(std::string("config: ") + name + " must be 0 or 1");
            return v == 1.0;
        };
        ProtocolConfig c;
        c.drive_on_time_ms = get("drive_on_time_ms");
        c.shutter_ramp_ms = get("shutter_ramp_ms");
        c.record_until_ms = get("record_until_ms");
        c.dt_us = get("dt_us");
        c.sample_every_us = get("sample_every_us");
        c.cloud_sigma_um = get("cloud_sigma_um");
        c.temperature_uK = get("temperature_uK");
        c.n_atoms = get("n_atoms");
        c.release_offset_z_um = get("release_offset_z_um");
        c.n_macroparticles = static_cast<std::size_t>(integer("n_macroparticles"));
        c.seed = static_cast<std::uint64_t>(integer("seed"));
        c.heating_enabled = boolean("heating_enabled");
        c.gravity_enabled = boolean("gravity_enabled");
        return c;
    }
};

inline ResolvedConfig parse_config_text(const std::string& text,
                                        const std::string& source_name) {
    ResolvedConfig config;
    std::vector<std::string> seen;
    bool power_set = false, eta_set = false;

    std::istringstream stream(text);
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& what) {
        throw ConfigError(source_name + ":" + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(stream, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail("expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value_text = detail::trim(line.substr(eq + 1));
        if (key.empty()) fail("empty key");

        bool known = false;
        for (const auto& [name, unused] : config_defaults())
            if (name == key) known = true;
        if (!known) fail(detail::suggest_key(key));
        for (const auto& s : seen)
            if (s == key) fail("duplicate key '" + key + "'");
        seen.push_back(key);

        char* end = nullptr;
        errno = 0;
        const double value = std::strtod(value_text.c_str(), &end);
        if (value_text.empty() || end == value_text.c_str() || *end != '\0' ||
            errno == ERANGE)
            fail("value for '" + key + "' is not a number: '" + value_text + "'");

        config.set(key, value);
        if (key == "power_uW") power_set = true;
        if (key == "eta_over_kappa") eta_set = true;
    }
    if (power_set && eta_set)
        throw ConfigError(source_name +
                          ": set either eta_over_kappa or power_uW, not both");
    return config;
}

inline ResolvedConfig parse_config(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream text;
    text << file.rdbuf();
    return parse_config_text(text.str(), path);
}

}  // namespace selftrap
