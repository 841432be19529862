#pragma once

// Internal unit system used throughout the library:
//   angular frequency  rad/us   (inputs in MHz or kHz are ordinary
//                                frequencies and get multiplied by 2*pi)
//   length             um
//   dynamics time      ms       (velocity um/ms, acceleration um/ms^2)
//   saturation, weights, photon numbers   dimensionless
// hbar never appears explicitly: every hbar/m is rewritten through the
// recoil frequency, hbar/m = 2*omega_rec/k^2.

#include <cmath>

namespace selftrap {

inline constexpr double two_pi = 6.283185307179586476925286766559;

// Boltzmann / reduced Planck constant, SI.  Only the ratio kB/hbar enters:
// it converts a temperature in uK to an angular-frequency energy in rad/us.
inline constexpr double boltzmann_si = 1.380649e-23;
inline constexpr double hbar_si = 1.054571817e-34;

// kB*T as an angular frequency: rad/us per uK.
inline constexpr double thermal_energy_per_uK = boltzmann_si / hbar_si * 1e-12;

inline constexpr double mhz_to_angular(double nu_mhz) { return two_pi * nu_mhz; }
inline constexpr double angular_to_mhz(double omega) { return omega / two_pi; }
inline constexpr double khz_to_angular(double nu_khz) { return two_pi * 1e-3 * nu_khz; }

}  // namespace selftrap
