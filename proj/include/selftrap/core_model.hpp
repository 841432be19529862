#pragma once

// Steady-state field model: the cavity resonance pulled by the dispersive
// atomic medium, the per-atom light shift, and the resulting intracavity
// photon number and atomic saturation.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "selftrap/params.hpp"

namespace selftrap {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

// Weighted macro-particle ensemble, stored as structure-of-arrays.  Each
// macro-particle stands for `weight` physical atoms; weights never change
// and particles are never removed (escape shows up as weight far from the
// mode axis, not as deletion).
struct EnsembleState {
    std::vector<double> x, y, z;     // um
    std::vector<double> vx, vy, vz;  // um/ms
    std::vector<double> weight;      // atoms per macro-particle
    double time_ms = 0.0;

    std::size_t size() const { return x.size(); }

    void resize(std::size_t n) {
        x.assign(n, 0.0); y.assign(n, 0.0); z.assign(n, 0.0);
        vx.assign(n, 0.0); vy.assign(n, 0.0); vz.assign(n, 0.0);
        weight.assign(n, 0.0);
    }
};

// TEM00 standing-wave mode function: cos(kx) axially, Gaussian of waist w
// transversally.  Dimensionless, |f| <= 1.
inline double mode_function(const Vec3& r, const SystemParams& p) {
    const double rho2 = r.y * r.y + r.z * r.z;
    const double w2 = p.waist_um * p.waist_um;
    return std::cos(p.wavenumber() * r.x) * std::exp(-rho2 / w2);
}

// Mode-weighted atom count N_eff = sum_j w_j f(r_j)^2.  With every atom at
// an antinode on axis this equals the physical atom number; otherwise it is
// strictly smaller.
inline double effective_atom_number(const EnsembleState& s, const SystemParams& p) {
    const double k = p.wavenumber();
    const double inv_w2 = 1.0 / (p.waist_um * p.waist_um);
    double sum = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        const double c = std::cos(k * s.x[j]);
        const double e = std::exp(-(s.y[j] * s.y[j] + s.z[j] * s.z[j]) * inv_w2);
        const double f = c * e;
        sum += s.weight[j] * f * f;
    }
    return sum;
}

inline double total_weight(const EnsembleState& s) {
    double sum = 0.0;
    for (double w : s.weight) sum += w;
    return sum;
}

// Per-atom, per-photon dispersive shift of the cavity resonance (rad/us).
// Red atomic detuning gives U0 < 0.  The u0_factor absorbs the reduction
// from driving a multi-level atom off its cycling transition.
inline double light_shift_u0(const SystemParams& p) {
    return p.u0_factor * p.g * p.g * p.delta_a /
           (p.delta_a * p.delta_a + p.gamma * p.gamma);
}

// Steady-state intracavity photon number for a pulled resonance:
// n = eta^2 / ((delta_c - n_eff_u0)^2 + kappa^2), with n_eff_u0 = N_eff*U0.
inline double steady_state_photon_number(const DriveConfig& d, double n_eff_u0,
                                         const SystemParams& p) {
    const double pulled = d.delta_c - n_eff_u0;
    return d.eta * d.eta / (pulled * pulled + p.kappa * p.kappa);
}

// Photon-number change caused by the atoms: n(with atoms) - n(empty cavity).
// Positive when the pulled resonance lies closer to the drive.
inline double intensity_change(const DriveConfig& d, double n_eff_u0,
                               const SystemParams& p) {
    const double pulled = d.delta_c - n_eff_u0;
    const double e2 = d.eta * d.eta;
    const double k2 = p.kappa * p.kappa;
    return e2 / (pulled * pulled + k2) - e2 / (d.delta_c * d.delta_c + k2);
}

// Antinode saturation parameter for a given photon number.
inline double saturation_from_photon_number(double photon_number,
                                            const SystemParams& p) {
    if (!(photon_number >= 0.0))
        throw std::invalid_argument("photon_number must be >= 0");
    return p.saturation_per_photon() * photon_number;
}

// Snapshot of the field quantities derived from one ensemble configuration.
struct FieldObservables {
    double n_eff = 0.0;
    double photon_number = 0.0;
    double saturation = 0.0;        // at an antinode
    double transmission_norm = 0.0; // photon number over the empty-resonant level
};

inline FieldObservables field_observables(const EnsembleState& s,
                                          const DriveConfig& d,
                                          const SystemParams& p) {
    FieldObservables out;
    out.n_eff = effective_atom_number(s, p);
    out.photon_number = steady_state_photon_number(d, out.n_eff * light_shift_u0(p), p);
    out.saturation = saturation_from_photon_number(out.photon_number, p);
    const double n_res = d.eta * d.eta / (p.kappa * p.kappa);
    out.transmission_norm = n_res > 0.0 ? out.photon_number / n_res : 0.0;
    return out;
}

// One measured reference point tying drive power to antinode saturation.
// The anchor fixes the unknown power-to-eta conversion of the apparatus:
// at `power_uW` input power, with the cavity pulled by `n_eff_u0` and the
// drive at `delta_c`, the atoms sit at saturation `saturation`.
struct CalibrationAnchor {
    double power_uW = 0.7;
    double saturation = 0.02;
    double delta_c = mhz_to_angular(-2.0);
    double n_eff_u0 = mhz_to_angular(-1.0);
};

// Drive amplitude eta for a given input power, assuming eta^2 proportional
// to power with the proportionality fixed by the anchor point.
inline double calibrate_power_to_drive(double power_uW,
                                       const CalibrationAnchor& anchor,
                                       const SystemParams& p) {
    if (!(power_uW >= 0.0))
        throw std::invalid_argument("power_uW must be >= 0");
    if (!(anchor.power_uW > 0.0 && anchor.saturation > 0.0))
        throw std::invalid_argument("calibration anchor requires positive power and saturation");
    const double n_anchor = anchor.saturation / p.saturation_per_photon();
    const double pulled = anchor.delta_c - anchor.n_eff_u0;
    const double eta2_anchor = n_anchor * (pulled * pulled + p.kappa * p.kappa);
    return std::sqrt(eta2_anchor * power_uW / anchor.power_uW);
}

// Antinode saturation reached at input power `power_uW` when the system is
// operated at (delta_c, n_eff_u0).  At the anchor's own operating point this
// reduces to s = anchor.saturation * power / anchor.power.
inline double saturation_from_power(double power_uW, const CalibrationAnchor& anchor,
                                    double delta_c, double n_eff_u0,
                                    const SystemParams& p) {
    const double eta = calibrate_power_to_drive(power_uW, anchor, p);
    const double pulled = delta_c - n_eff_u0;
    const double n = eta * eta / (pulled * pulled + p.kappa * p.kappa);
    return saturation_from_photon_number(n, p);
}

}  // namespace selftrap
