#pragma once

// Cavity, atom, and drive parameter sets shared by every module.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "selftrap/units.hpp"

namespace selftrap {

// Fixed system parameters.  All rates are HWHM angular frequencies in
// rad/us; lengths in um.  Defaults describe a rubidium-87 D2 experiment.
struct SystemParams {
    double kappa = mhz_to_angular(2.77);        // cavity field decay (HWHM)
    double g = mhz_to_angular(0.33);            // single-atom coupling
    double gamma = mhz_to_angular(3.03);        // atomic polarization decay (HWHM)
    double delta_a = mhz_to_angular(-1066.0);   // atomic detuning (red < 0)
    double u0_factor = 0.7;                     // level-structure reduction of U0
    double omega_rec = khz_to_angular(3.771);   // recoil frequency
    double wavelength_um = 0.780;
    double waist_um = 127.0;
    double gravity_um_ms2 = 9.81;               // along -z

    double wavenumber() const { return two_pi / wavelength_um; }

    // hbar/m expressed through the recoil frequency, in um^2/us.
    double hbar_over_m() const {
        const double k = wavenumber();
        return 2.0 * omega_rec / (k * k);
    }

    // Converts a potential gradient in rad/(us*um) to an acceleration in
    // um/ms^2 (the 1e6 bridges us- and ms-based time units).
    double accel_conversion() const { return hbar_over_m() * 1e6; }

    // Saturation per intracavity photon at an antinode.
    double saturation_per_photon() const {
        return g * g / (delta_a * delta_a + gamma * gamma);
    }

    // Thermal velocity scale: sqrt(kB*T/m) in um/ms for T in uK.
    double thermal_velocity(double temperature_uK) const {
        return std::sqrt(accel_conversion() * thermal_energy_per_uK * temperature_uK);
    }

    // Throws on unphysical values; returns human-readable warnings for
    // parameter regimes outside the model's validity.
    std::vector<std::string> validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0))
                throw std::invalid_argument(std::string(name) + " must be positive");
        };
        positive(kappa, "kappa");
        positive(g, "g");
        positive(gamma, "gamma");
        positive(omega_rec, "omega_rec");
        positive(wavelength_um, "wavelength_um");
        positive(waist_um, "waist_um");
        if (!(u0_factor > 0.0 && u0_factor <= 1.0))
            throw std::invalid_argument("u0_factor must be in (0, 1]");
        if (delta_a == 0.0)
            throw std::invalid_argument("delta_a must be nonzero");
        std::vector<std::string> warnings;
        if (std::abs(delta_a) < 100.0 * gamma)
            warnings.push_back(
                "atomic detuning below 100*gamma: the dispersive (low-saturation) "
                "model is unreliable this close to resonance");
        return warnings;
    }
};

// Pump drive: detuning of the laser from the empty cavity plus the drive
// amplitude eta (rad/us).  eta^2/kappa^2 is the empty-resonant photon number.
struct DriveConfig {
    double delta_c = mhz_to_angular(-3.0);
    double eta = 620.0 * mhz_to_angular(2.77);

    void validate() const {
        if (!(eta >= 0.0)) throw std::invalid_argument("eta must be >= 0");
    }
};

}  // namespace selftrap
