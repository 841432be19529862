#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "selftrap/collapse.hpp"
#include "selftrap/params.hpp"

using namespace selftrap;

namespace {

// Decay geometry used throughout: detuning pulled to -0.675 kappa with the
// full ensemble present, activation strength 2.775.  Frozen reference values
// below were computed independently from the closed-form rate law.
DecayModelParams reference_model(double n0 = 10000.0, double tau_ms = 2.0) {
    DecayModelParams m;
    m.delta_c_tilde = -1.87 / 2.77;
    m.u0_tilde = (-1.0 / 2.77) / n0;
    m.n0 = n0;
    m.a_param = 2.775;
    m.tau_ms = tau_ms;
    m.kappa = SystemParams{}.kappa;
    return m;
}

}  // namespace

TEST_CASE("escape rate follows the activated law") {
    DecayModelParams m = reference_model();

    SECTION("zero activation reduces to a plain linear death rate") {
        m.a_param = 0.0;
        for (double n : {1.0, 17.0, 4096.0, 1e4})
            CHECK(escape_rate(n, m) == n / m.tau_ms);
        CHECK(escape_rate(0.0, m) == 0.0);
    }

    SECTION("full-ensemble rate carries the frozen suppression factor") {
        // detuning term  = -0.67509025270758127 + 0.36101083032490977
        // exponent       = 2.775 / (0.31407942^2 + 1) = 2.5258366153408147
        const double rate = escape_rate(m.n0, m);
        CHECK(rate == Catch::Approx(0.079991362783688236 * m.n0 / m.tau_ms).epsilon(1e-14));
    }

    SECTION("pulled resonance gives the bare e^{-a} suppression") {
        m.delta_c_tilde = m.n0 * m.u0_tilde;  // detuning term vanishes at n0
        const double rate = escape_rate(m.n0, m);
        CHECK(rate == Catch::Approx(0.06234947668967343 * m.n0 / m.tau_ms).epsilon(1e-14));
    }

    SECTION("invalid parameters are rejected") {
        DecayModelParams bad = reference_model();
        bad.n0 = -1.0;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = reference_model();
        bad.n0 = 10.5;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = reference_model();
        bad.tau_ms = 0.0;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = reference_model();
        bad.a_param = -0.1;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    }
}

TEST_CASE("trajectories are well-formed event sequences") {
    DecayModelParams m = reference_model(500.0);

    SECTION("empty initial ensemble yields the trivial trajectory") {
        m.n0 = 0.0;
        const DecayTrajectory traj = simulate_decay(m, 10.0, 42u);
        REQUIRE(traj.size() == 1);
        CHECK(traj.n[0] == 0.0);
        CHECK(n_at(traj, 5.0) == 0.0);
    }

    SECTION("atom number is integer, non-increasing, and times strictly increase") {
        const DecayTrajectory traj = simulate_decay(m, 1e4, 42u);
        REQUIRE(traj.size() == 501);  // runs to extinction within the window
        for (std::size_t i = 0; i < traj.size(); ++i) {
            CHECK(traj.n[i] == std::floor(traj.n[i]));
            if (i > 0) {
                CHECK(traj.n[i] == traj.n[i - 1] - 1.0);
                CHECK(traj.t_ms[i] > traj.t_ms[i - 1]);
            }
        }
        CHECK(traj.n.back() == 0.0);
    }

    SECTION("per-atom escape rate never decreases along a trajectory") {
        // Positive feedback: as atoms leave, the resonance pull decays and
        // the suppression exponent weakens for this sign geometry.
        for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
            const DecayTrajectory traj = simulate_decay(m, 1e4, seed);
            double prev = 0.0;
            for (std::size_t i = 0; i + 1 < traj.size(); ++i) {  // skip final n=0
                const double per_atom = escape_rate(traj.n[i], m) / traj.n[i];
                CHECK(per_atom >= prev);
                prev = per_atom;
            }
        }
    }

    SECTION("step lookup matches the event list") {
        const DecayTrajectory traj = simulate_decay(m, 1e4, 7u);
        CHECK(n_at(traj, -1.0) == m.n0);  // before the window: initial count
        CHECK(n_at(traj, 0.0) == m.n0);
        for (std::size_t i = 1; i < traj.size(); i += 37) {
            const double eps = 1e-9;
            CHECK(n_at(traj, traj.t_ms[i] - eps) == traj.n[i - 1]);
            CHECK(n_at(traj, traj.t_ms[i]) == traj.n[i]);
        }
        CHECK(n_at(traj, 1e9) == 0.0);
    }
}

TEST_CASE("single-atom escape times pass a KS test against the exponential law") {
    DecayModelParams m;
    m.delta_c_tilde = 0.0;
    m.u0_tilde = 0.0;
    m.n0 = 1.0;
    m.a_param = 0.0;
    m.tau_ms = 2.0;
    m.kappa = 1.0;

    const int n_draws = 4000;
    std::vector<double> times;
    times.reserve(n_draws);
    for (int k = 0; k < n_draws; ++k) {
        Rng rng = Rng::for_trajectory(99u, static_cast<std::uint64_t>(k));
        const DecayTrajectory traj = simulate_decay(m, 1e6, rng);
        REQUIRE(traj.size() == 2);
        times.push_back(traj.t_ms[1]);
    }
    std::sort(times.begin(), times.end());
    double d_stat = 0.0;
    for (int i = 0; i < n_draws; ++i) {
        const double cdf = 1.0 - std::exp(-times[static_cast<std::size_t>(i)] / m.tau_ms);
        d_stat = std::max(d_stat, std::abs(cdf - (i + 1.0) / n_draws));
        d_stat = std::max(d_stat, std::abs(cdf - static_cast<double>(i) / n_draws));
    }
    // 1% critical value of the two-sided KS statistic, asymptotic form.
    CHECK(d_stat < 1.628 / std::sqrt(static_cast<double>(n_draws)));
}

TEST_CASE("zero-activation ensemble mean tracks the binomial death process") {
    DecayModelParams m = reference_model(10000.0);
    m.a_param = 0.0;  // plain exponential decay, survival probability e^{-t/tau}

    const int n_traj = 50;
    const DecayCurve curve = mean_decay_curve(m, 4.0, n_traj, 12345u, 21);
    for (std::size_t i = 0; i < curve.t_ms.size(); ++i) {
        const double p = std::exp(-curve.t_ms[i] / m.tau_ms);
        const double sigma = std::sqrt(m.n0 * p * (1.0 - p) / n_traj);
        if (sigma == 0.0)
            CHECK(curve.n_mean[i] == m.n0);
        else
            CHECK(std::abs(curve.n_mean[i] - m.n0 * p) < 3.0 * sigma);
    }

    // Half-life sits at tau*ln(2); the mean-field curve is exact there.
    const double t_half = m.tau_ms * std::log(2.0);
    const std::vector<double> at_half = mean_field_decay(m, {t_half}, 256);
    CHECK(at_half[0] == Catch::Approx(m.n0 / 2.0).epsilon(1e-10));
}

TEST_CASE("trajectory mean converges to the mean-field curve for large ensembles") {
    const DecayModelParams m = reference_model(10000.0);
    const DecayCurve curve = mean_decay_curve(m, 60.0, 50, 2024u, 200);
    double sup = 0.0;
    for (std::size_t i = 0; i < curve.t_ms.size(); ++i)
        sup = std::max(sup, std::abs(curve.n_mean[i] - curve.n_meanfield[i]));
    CHECK(sup / m.n0 < 0.01);

    // The mean-field solution decays but stays positive and log-concave:
    // the effective per-atom rate only grows as the ensemble thins out.
    for (std::size_t i = 1; i < curve.n_meanfield.size(); ++i)
        CHECK(curve.n_meanfield[i] < curve.n_meanfield[i - 1]);
    for (std::size_t i = 2; i < curve.n_meanfield.size(); ++i) {
        const double d2 = std::log(curve.n_meanfield[i]) -
                          2.0 * std::log(curve.n_meanfield[i - 1]) +
                          std::log(curve.n_meanfield[i - 2]);
        CHECK(d2 <= 1e-12);
    }
}

TEST_CASE("transmission mapping reproduces the frozen cavity levels") {
    const DecayModelParams m = reference_model(10000.0);
    const double eta = 5.0 * m.kappa;
    const double peak = (eta / m.kappa) * (eta / m.kappa);

    SECTION("constant atom number maps to the flat pulled level") {
        const std::vector<double> trace = transmission_from_n({m.n0, m.n0, m.n0}, m, eta);
        for (double v : trace)
            CHECK(v == Catch::Approx(0.91021139291560893 * peak).epsilon(1e-14));
    }

    SECTION("empty ensemble maps to the flat bare-cavity level") {
        const std::vector<double> trace = transmission_from_n({0.0, 0.0}, m, eta);
        for (double v : trace)
            CHECK(v == Catch::Approx(0.68693262189117088 * peak).epsilon(1e-14));
    }

    SECTION("decay sweeps monotonically from pulled to empty level") {
        const std::vector<double> n_mf =
            mean_field_decay(m, [] {
                std::vector<double> g(200);
                for (int i = 0; i < 200; ++i) g[static_cast<std::size_t>(i)] = 60.0 * i / 199.0;
                return g;
            }());
        const std::vector<double> trace = transmission_from_n(n_mf, m, eta);
        CHECK(trace.front() == Catch::Approx(0.91021139291560893 * peak).epsilon(1e-6));
        CHECK(trace.back() > 0.68693262189117088 * peak);
        for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] < trace[i - 1]);

        // Late-phase decay is steeper than any single exponential: the log
        // of the excess over the empty level is concave in time.
        const double empty = 0.68693262189117088 * peak;
        for (std::size_t i = 2; i < trace.size(); ++i) {
            const double d2 = std::log(trace[i] - empty) -
                              2.0 * std::log(trace[i - 1] - empty) +
                              std::log(trace[i - 2] - empty);
            CHECK(d2 <= 1e-12);
        }
    }

    SECTION("missing kappa is rejected") {
        DecayModelParams bad = m;
        bad.kappa = 0.0;
        CHECK_THROWS_AS(transmission_from_n({1.0}, bad, eta), std::invalid_argument);
    }
}

TEST_CASE("averaged curves are deterministic in the master seed") {
    const DecayModelParams m = reference_model(800.0);

    const DecayCurve a = mean_decay_curve(m, 30.0, 12, 555u, 64);
    const DecayCurve b = mean_decay_curve(m, 30.0, 12, 555u, 64);
    CHECK(a.t_ms == b.t_ms);
    CHECK(a.n_mean == b.n_mean);
    CHECK(a.n_meanfield == b.n_meanfield);

    const DecayCurve c = mean_decay_curve(m, 30.0, 12, 556u, 64);
    CHECK(a.n_mean != c.n_mean);            // different realizations
    CHECK(a.n_meanfield == c.n_meanfield);  // ODE ignores the seed

    SECTION("single-trajectory average is the trajectory's own step curve") {
        const DecayCurve single = mean_decay_curve(m, 30.0, 1, 555u, 64);
        Rng rng = Rng::for_trajectory(555u, 0u);
        const DecayTrajectory traj = simulate_decay(m, 30.0, rng);
        for (std::size_t i = 0; i < single.t_ms.size(); ++i)
            CHECK(single.n_mean[i] == n_at(traj, single.t_ms[i]));
    }

    SECTION("argument validation") {
        CHECK_THROWS_AS(mean_decay_curve(m, 30.0, 0, 1u), std::invalid_argument);
        CHECK_THROWS_AS(mean_decay_curve(m, 30.0, 4, 1u, 1), std::invalid_argument);
        CHECK_THROWS_AS(mean_decay_curve(m, 0.0, 4, 1u), std::invalid_argument);
    }
}
