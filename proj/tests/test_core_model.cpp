#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "selftrap/core_model.hpp"
#include "selftrap/rng.hpp"

using namespace selftrap;

namespace {

// Reference operating point used across the suite: strong red drive with the
// resonance pulled by -2pi*1 MHz of dispersive shift.
DriveConfig reference_drive() {
    DriveConfig d;
    d.delta_c = mhz_to_angular(-3.0);
    d.eta = 620.0 * SystemParams{}.kappa;
    return d;
}

}  // namespace

TEST_CASE("mode function is 1 at on-axis antinodes and falls off as expected") {
    SystemParams p;
    CHECK(mode_function({0.0, 0.0, 0.0}, p) == 1.0);
    // One full period along the axis.
    CHECK(mode_function({p.wavelength_um, 0.0, 0.0}, p) == Catch::Approx(1.0).epsilon(1e-12));
    // Node a quarter wavelength away.
    CHECK(std::abs(mode_function({0.25 * p.wavelength_um, 0.0, 0.0}, p)) < 1e-12);
    // Transverse 1/e point of the field at rho = waist.
    CHECK(mode_function({0.0, p.waist_um, 0.0}, p) == Catch::Approx(std::exp(-1.0)));
    CHECK(mode_function({0.0, 0.0, p.waist_um}, p) == Catch::Approx(std::exp(-1.0)));
    // y and z enter symmetrically.
    CHECK(mode_function({1.0, 30.0, 80.0}, p) == mode_function({1.0, 80.0, 30.0}, p));
}

TEST_CASE("effective atom number counts mode-weighted atoms") {
    SystemParams p;
    EnsembleState s;

    SECTION("empty ensemble") { CHECK(effective_atom_number(s, p) == 0.0); }

    SECTION("atoms pinned at antinodes count fully") {
        s.resize(4);
        for (std::size_t j = 0; j < 4; ++j) {
            s.x[j] = static_cast<double>(j) * p.wavelength_um;
            s.weight[j] = 250.0;
        }
        CHECK(effective_atom_number(s, p) == Catch::Approx(1000.0).epsilon(1e-12));
        CHECK(total_weight(s) == 1000.0);
    }

    SECTION("uniform axial spread averages cos^2 to one half") {
        const std::size_t n = 1000;
        s.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            s.x[j] = p.wavelength_um * static_cast<double>(j) / static_cast<double>(n);
            s.weight[j] = 1.0;
        }
        CHECK(effective_atom_number(s, p) ==
              Catch::Approx(0.5 * static_cast<double>(n)).epsilon(1e-12));
    }

    SECTION("never exceeds the physical atom number") {
        Rng rng(2024);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 40);
            s.resize(n);
            for (std::size_t j = 0; j < n; ++j) {
                s.x[j] = 2000.0 * (rng.uniform() - 0.5);
                s.y[j] = 600.0 * rng.normal();
                s.z[j] = 600.0 * rng.normal();
                s.weight[j] = 10.0 * rng.uniform();
            }
            CHECK(effective_atom_number(s, p) <= total_weight(s));
        }
    }
}

TEST_CASE("per-photon light shift matches the dispersive expression") {
    SystemParams p;
    const double u0 = light_shift_u0(p);
    // Frozen value for the default red-detuned system; about -2pi * 71.5 Hz.
    CHECK(u0 == Catch::Approx(-0.00044930895525652919).epsilon(1e-12));
    CHECK(u0 / two_pi * 1e6 == Catch::Approx(-71.5097412).epsilon(1e-6));

    // Sign follows the atomic detuning; magnitude scales with u0_factor.
    SystemParams blue = p;
    blue.delta_a = -p.delta_a;
    CHECK(light_shift_u0(blue) == Catch::Approx(-u0).epsilon(1e-12));
    SystemParams full = p;
    full.u0_factor = 1.0;
    CHECK(light_shift_u0(full) == Catch::Approx(u0 / 0.7).epsilon(1e-12));
}

TEST_CASE("steady-state photon number reproduces the pulled Lorentzian") {
    SystemParams p;
    const DriveConfig d = reference_drive();
    const double n_eff_u0 = mhz_to_angular(-1.0);

    // Frozen operating-point values.
    CHECK(steady_state_photon_number(d, n_eff_u0, p) ==
          Catch::Approx(252676.09248772799).epsilon(1e-12));
    CHECK(steady_state_photon_number(d, 0.0, p) ==
          Catch::Approx(176901.60439995441).epsilon(1e-12));

    SECTION("peak value and symmetry about the pulled resonance") {
        DriveConfig on_res = d;
        on_res.delta_c = n_eff_u0;
        CHECK(steady_state_photon_number(on_res, n_eff_u0, p) ==
              Catch::Approx(620.0 * 620.0).epsilon(1e-12));
        for (double off : {0.3, 1.0, 4.0}) {
            DriveConfig left = d, right = d;
            left.delta_c = n_eff_u0 - off;
            right.delta_c = n_eff_u0 + off;
            CHECK(steady_state_photon_number(left, n_eff_u0, p) ==
                  Catch::Approx(steady_state_photon_number(right, n_eff_u0, p))
                      .epsilon(1e-12));
        }
    }

    SECTION("half maximum sits one kappa from the pulled resonance") {
        DriveConfig hwhm = d;
        hwhm.delta_c = n_eff_u0 + p.kappa;
        CHECK(steady_state_photon_number(hwhm, n_eff_u0, p) ==
              Catch::Approx(0.5 * 620.0 * 620.0).epsilon(1e-9));
    }

    SECTION("peak location found by search matches the pulled shift to 1e-6") {
        // Ternary search over the detuning; the lineshape is unimodal.
        double lo = n_eff_u0 - 5.0 * p.kappa, hi = n_eff_u0 + 5.0 * p.kappa;
        for (int it = 0; it < 200; ++it) {
            const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
            DriveConfig d1 = d, d2 = d;
            d1.delta_c = m1;
            d2.delta_c = m2;
            if (steady_state_photon_number(d1, n_eff_u0, p) <
                steady_state_photon_number(d2, n_eff_u0, p))
                lo = m1;
            else
                hi = m2;
        }
        CHECK(0.5 * (lo + hi) == Catch::Approx(n_eff_u0).margin(1e-6 * std::abs(n_eff_u0)));
    }
}

TEST_CASE("intensity change equals the difference of steady-state evaluations") {
    SystemParams p;
    const DriveConfig d = reference_drive();
    const double n_eff_u0 = mhz_to_angular(-1.0);

    const double direct = intensity_change(d, n_eff_u0, p);
    CHECK(direct == Catch::Approx(75774.488087773556).epsilon(1e-10));
    CHECK(direct == Catch::Approx(steady_state_photon_number(d, n_eff_u0, p) -
                                  steady_state_photon_number(d, 0.0, p))
                        .epsilon(1e-12));

    SECTION("identity holds over random parameter draws") {
        Rng rng(7);
        for (int trial = 0; trial < 1000; ++trial) {
            DriveConfig dr;
            dr.delta_c = mhz_to_angular(20.0 * (rng.uniform() - 0.5));
            dr.eta = 1000.0 * rng.uniform();
            const double shift = mhz_to_angular(6.0 * (rng.uniform() - 0.5));
            const double lhs = intensity_change(dr, shift, p);
            const double rhs = steady_state_photon_number(dr, shift, p) -
                               steady_state_photon_number(dr, 0.0, p);
            const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
            CHECK(std::abs(lhs - rhs) / scale < 1e-10);
        }
    }
}

TEST_CASE("saturation follows the photon number") {
    SystemParams p;
    CHECK(p.saturation_per_photon() == Catch::Approx(9.5831869746089326e-08).epsilon(1e-12));
    CHECK(saturation_from_photon_number(252676.09248772799, p) ==
          Catch::Approx(0.02421442238323477).epsilon(1e-12));
    CHECK(saturation_from_photon_number(0.0, p) == 0.0);
    CHECK_THROWS_AS(saturation_from_photon_number(-1.0, p), std::invalid_argument);
}

TEST_CASE("field observables are mutually consistent") {
    SystemParams p;
    DriveConfig d = reference_drive();
    EnsembleState s;
    s.resize(3);
    s.weight = {4000.0, 5000.0, 6000.0};
    s.y = {20.0, -35.0, 60.0};
    s.x = {0.1, 0.2, -0.35};

    const FieldObservables obs = field_observables(s, d, p);
    CHECK(obs.n_eff == Catch::Approx(effective_atom_number(s, p)).epsilon(1e-15));
    CHECK(obs.photon_number ==
          Catch::Approx(steady_state_photon_number(d, obs.n_eff * light_shift_u0(p), p))
              .epsilon(1e-15));
    CHECK(obs.saturation ==
          Catch::Approx(obs.photon_number * p.saturation_per_photon()).epsilon(1e-15));
    CHECK(obs.transmission_norm ==
          Catch::Approx(obs.photon_number / (620.0 * 620.0)).epsilon(1e-12));
}

TEST_CASE("power calibration is anchored and scales as sqrt") {
    SystemParams p;
    CalibrationAnchor anchor;  // 0.7 uW <-> s = 0.02 at the anchor point

    // Round trip through the anchor's own operating point.
    CHECK(saturation_from_power(anchor.power_uW, anchor, anchor.delta_c,
                                anchor.n_eff_u0, p) ==
          Catch::Approx(anchor.saturation).epsilon(1e-12));

    const double eta1 = calibrate_power_to_drive(0.7, anchor, p);
    CHECK(calibrate_power_to_drive(0.0, anchor, p) == 0.0);
    CHECK(calibrate_power_to_drive(2.8, anchor, p) == Catch::Approx(2.0 * eta1).epsilon(1e-12));

    // Saturation is linear in power at fixed operating point.
    CHECK(saturation_from_power(1.4, anchor, anchor.delta_c, anchor.n_eff_u0, p) ==
          Catch::Approx(2.0 * anchor.saturation).epsilon(1e-12));

    CHECK_THROWS_AS(calibrate_power_to_drive(-0.1, anchor, p), std::invalid_argument);
    CalibrationAnchor bad = anchor;
    bad.saturation = 0.0;
    CHECK_THROWS_AS(calibrate_power_to_drive(1.0, bad, p), std::invalid_argument);
}

TEST_CASE("parameter validation flags unphysical or marginal regimes") {
    SystemParams p;
    CHECK(p.validate().empty());

    SystemParams close = p;
    close.delta_a = mhz_to_angular(-200.0);  // |delta_a| < 100*gamma
    const auto warnings = close.validate();
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("dispersive") != std::string::npos);

    SystemParams bad = p;
    bad.kappa = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p;
    bad.delta_a = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p;
    bad.u0_factor = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
