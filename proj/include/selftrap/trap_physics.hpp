#pragma once

// Trap depth, recoil heating, and the resulting trapping-time estimates as
// functions of the antinode saturation parameter.

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>

#include "selftrap/params.hpp"

namespace selftrap {

// Fraction of the total scattering heating rate deposited per axis.  The
// transverse split is 2/5 along the polarization axis (y) and 1/5 along z;
// axial motion is not heated because the standing wave has no running-wave
// recoil along the cavity axis.
inline constexpr double heating_fraction_y = 2.0 / 5.0;
inline constexpr double heating_fraction_z = 1.0 / 5.0;
inline constexpr double heating_fraction_total =
    heating_fraction_y + heating_fraction_z;  // = 3/5; with the 1/2 photon
                                              // momentum average: 3/10 total

// Empirical heating beyond photon recoil, parametrized by two coefficients
// in units of the recoil heating rate scale (3/10)*hbar*omega_rec*gamma:
// D(s) = recoil_scale * (d0 + d1 * s) * s.  temperature is kB*T in rad/us.
struct HeatingModel {
    double d0 = 0.0;
    double d1 = 0.0;
    double temperature = 100.0 * thermal_energy_per_uK;

    static HeatingModel with_temperature_uK(double d0, double d1, double t_uK) {
        if (!(t_uK >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
        return HeatingModel{d0, d1, t_uK * thermal_energy_per_uK};
    }
};

// Optical potential depth at an antinode, kB units as rad/us:
// depth = |delta_a| * s, or |delta_a| * s/(1+s) with saturation of the
// excited-state population taken into account.
inline double trap_depth(double saturation, const SystemParams& p,
                         bool saturating = false) {
    if (!(saturation >= 0.0))
        throw std::invalid_argument("saturation must be >= 0");
    const double s_eff = saturating ? saturation / (1.0 + saturation) : saturation;
    return std::abs(p.delta_a) * s_eff;
}

// Photon-recoil heating rate (energy per time, rad/us per ms units folded
// into the caller's use): D = (3/10) * omega_rec * gamma * s.  The prefactor
// is the transverse 3/5 momentum-direction split times the 1/2 average of
// the squared projection of the random recoil.
inline double recoil_heating_rate(double saturation, const SystemParams& p) {
    if (!(saturation >= 0.0))
        throw std::invalid_argument("saturation must be >= 0");
    return 0.3 * p.omega_rec * p.gamma * saturation;
}

// Trapping time from depth over recoil heating rate alone.  The saturation
// cancels: tau = (10/3) * |delta_a| / (gamma * omega_rec), in ms (the rad/us
// ratio is in us; 1e-3 converts to ms).
inline double ideal_trapping_time_ms(const SystemParams& p) {
    return (10.0 / 3.0) * std::abs(p.delta_a) / (p.gamma * p.omega_rec) * 1e-3;
}

// Trapping time with empirical heating and a thermal energy offset:
//   tau = (saturating depth - kB*T) / (recoil rate + empirical rate)
// where the recoil rate carries the same s/(1+s) saturation as the depth and
// the empirical additions are (d0 + d1*s) in recoil-scale units.  Returns
// nullopt when the available depth does not exceed the thermal energy
// ("untrapped").  With d0 = d1 = 0 and T = 0 the s/(1+s) factors cancel and
// the result is the ideal trapping time for every s.
inline std::optional<double> empirical_trapping_time_ms(double saturation,
                                                        const HeatingModel& h,
                                                        const SystemParams& p) {
    if (!(saturation > 0.0))
        return std::nullopt;
    const double s_sat = saturation / (1.0 + saturation);
    const double numerator = std::abs(p.delta_a) * s_sat - h.temperature;
    if (numerator <= 0.0) return std::nullopt;
    const double scale = 0.3 * p.omega_rec * p.gamma;
    const double rate = scale * (s_sat + h.d0 + h.d1 * saturation);
    return numerator / rate * 1e-3;
}

// Saturation below which the trap is shallower than the thermal energy.
// Infinity when even a fully saturating trap stays shallower than kB*T.
inline double threshold_saturation(const HeatingModel& h, const SystemParams& p) {
    const double t = h.temperature / std::abs(p.delta_a);
    if (t >= 1.0) return std::numeric_limits<double>::infinity();
    return t / (1.0 - t);
}

// Maximizes the empirical trapping time over saturation by golden-section
// search on log(s), after bracketing the peak on a coarse logarithmic grid.
// Returns nullopt when no saturation in (threshold, s_max] traps at all.
inline std::optional<std::pair<double, double>> optimal_saturation(
    const HeatingModel& h, const SystemParams& p, double s_max = 1e3) {
    const double s_min = threshold_saturation(h, p);
    if (!(s_max > s_min)) return std::nullopt;

    const double lo = std::log(std::max(s_min, 1e-12));
    const double hi = std::log(s_max);
    auto tau_at = [&](double log_s) {
        return empirical_trapping_time_ms(std::exp(log_s), h, p).value_or(0.0);
    };

    // Coarse bracket: tau vanishes at both ends (threshold and, for d1 > 0,
    // large s), so the grid maximum brackets the peak.
    constexpr int grid = 256;
    int best = 0;
    double best_tau = 0.0;
    for (int i = 0; i <= grid; ++i) {
        const double ls = lo + (hi - lo) * i / grid;
        const double tau = tau_at(ls);
        if (tau > best_tau) {
            best_tau = tau;
            best = i;
        }
    }
    if (best_tau <= 0.0) return std::nullopt;
    double a = lo + (hi - lo) * std::max(best - 1, 0) / grid;
    double b = lo + (hi - lo) * std::min(best + 1, grid) / grid;

    // Golden-section refinement to 1e-6 relative on s (log spacing).
    const double inv_phi = 0.6180339887498949;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = tau_at(c), fd = tau_at(d);
    while (b - a > 1e-6) {
        if (fc > fd) {
            b = d; d = c; fd = fc;
            c = b - inv_phi * (b - a);
            fc = tau_at(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + inv_phi * (b - a);
            fd = tau_at(d);
        }
    }
    const double s_opt = std::exp(0.5 * (a + b));
    const double tau_opt = empirical_trapping_time_ms(s_opt, h, p).value_or(0.0);
    return std::make_pair(s_opt, tau_opt);
}

}  // namespace selftrap
