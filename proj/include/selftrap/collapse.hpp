#pragma once

// Stochastic model for the abrupt loss of a trapped ensemble: atoms escape
// one by one, each escape weakens the intracavity field for the remainder,
// which in turn raises the per-atom escape rate (positive feedback).  The
// event sequence is sampled exactly (Gillespie-style waiting times), so there
// is no time-step parameter to tune.  A deterministic mean-field curve
// obtained from dn/dt = -rate(n) is carried alongside the Monte Carlo mean
// for comparison and for smooth fitting objectives.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "selftrap/rng.hpp"

namespace selftrap {

// All detunings are expressed in units of the cavity linewidth kappa, so the
// rate law below is dimensionless except for the overall 1/tau scale.
struct DecayModelParams {
    double delta_c_tilde = 0.0;  // drive-cavity detuning / kappa
    double u0_tilde = 0.0;       // per-atom light shift / kappa
    double n0 = 0.0;             // initial atom count (integer valued)
    double a_param = 0.0;        // dimensionless activation strength, >= 0
    double tau_ms = 1.0;         // base escape timescale
    double kappa = 0.0;          // rad/us, kept for unit round-trips

    void validate() const {
        if (!(n0 >= 0.0) || n0 != std::floor(n0))
            throw std::invalid_argument("decay model: n0 must be a non-negative integer");
        if (!(tau_ms > 0.0))
            throw std::invalid_argument("decay model: tau_ms must be positive");
        if (!(a_param >= 0.0))
            throw std::invalid_argument("decay model: a_param must be non-negative");
    }
};

// Total ensemble escape rate (events per ms) when n atoms remain.  The
// Lorentzian-in-detuning exponent suppresses escapes while the collective
// frequency pull keeps the cavity near resonance; as atoms leave, the pull
// decays and the suppression weakens.
inline double escape_rate(double n, const DecayModelParams& model) {
    if (n <= 0.0) return 0.0;
    const double detuning = model.delta_c_tilde - n * model.u0_tilde;
    const double exponent = model.a_param / (detuning * detuning + 1.0);
    return n / model.tau_ms * std::exp(-exponent);
}

// Intracavity photon number for a given surviving atom number, normalized to
// the empty-cavity resonant value (eta/kappa)^2.
inline double normalized_transmission(double n, const DecayModelParams& model) {
    const double detuning = model.delta_c_tilde - n * model.u0_tilde;
    return 1.0 / (detuning * detuning + 1.0);
}

// Event list of one decay realization: entry k holds the time of the k-th
// state change and the atom number from that time onward.  Entry 0 is the
// initial condition (t = 0, n = n0).
struct DecayTrajectory {
    std::vector<double> t_ms;
    std::vector<double> n;

    std::size_t size() const { return t_ms.size(); }
};

// Step-function lookup: atom number at time t (n0 before the first event).
inline double n_at(const DecayTrajectory& traj, double t_ms) {
    if (traj.t_ms.empty()) return 0.0;
    // Find the last event not later than t; linear traces are sampled in
    // order, but a binary search keeps random access cheap too.
    std::size_t lo = 0, hi = traj.t_ms.size();
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (traj.t_ms[mid] <= t_ms)
            lo = mid;
        else
            hi = mid;
    }
    return traj.t_ms[lo] <= t_ms ? traj.n[lo] : traj.n[0];
}

// Exact-event sampling of the death process: repeatedly draw an exponential
// waiting time at the current total rate, advance, and remove one atom.
// Runs until the ensemble is empty or t_end_ms is reached.
inline DecayTrajectory simulate_decay(const DecayModelParams& model, double t_end_ms, Rng& rng) {
    model.validate();
    if (!(t_end_ms >= 0.0))
        throw std::invalid_argument("simulate_decay: t_end_ms must be non-negative");

    DecayTrajectory traj;
    double n = model.n0;
    double t = 0.0;
    traj.t_ms.push_back(0.0);
    traj.n.push_back(n);
    while (n > 0.0 && t < t_end_ms) {
        const double rate = escape_rate(n, model);
        if (!(rate > 0.0)) break;  // absorbing state (cannot happen for n > 0)
        t += rng.exponential(rate);
        if (t >= t_end_ms) break;
        n -= 1.0;
        traj.t_ms.push_back(t);
        traj.n.push_back(n);
    }
    return traj;
}

inline DecayTrajectory simulate_decay(const DecayModelParams& model, double t_end_ms,
                                      std::uint64_t seed) {
    Rng rng(seed);
    return simulate_decay(model, t_end_ms, rng);
}

// Uniform-grid summary of a trajectory ensemble plus the deterministic
// mean-field solution of dn/dt = -escape_rate(n) on the same grid.
struct DecayCurve {
    std::vector<double> t_ms;
    std::vector<double> n_mean;       // Monte Carlo trajectory average
    std::vector<double> n_meanfield;  // ODE solution
};

// Mean-field integration with classic fourth-order Runge-Kutta steps.  The
// state is clamped at zero: the continuous model only reaches it
// asymptotically, but roundoff must not produce negative atom numbers.
inline std::vector<double> mean_field_decay(const DecayModelParams& model,
                                            const std::vector<double>& t_grid_ms,
                                            int substeps = 8) {
    model.validate();
    if (substeps < 1)
        throw std::invalid_argument("mean_field_decay: substeps must be >= 1");
    std::vector<double> out;
    out.reserve(t_grid_ms.size());
    double n = model.n0;
    double t = 0.0;
    auto deriv = [&model](double state) { return -escape_rate(state, model); };
    for (double t_target : t_grid_ms) {
        if (t_target < t)
            throw std::invalid_argument("mean_field_decay: time grid must be non-decreasing");
        const double span = t_target - t;
        if (span > 0.0) {
            const double h = span / substeps;
            for (int i = 0; i < substeps; ++i) {
                const double k1 = deriv(n);
                const double k2 = deriv(n + 0.5 * h * k1);
                const double k3 = deriv(n + 0.5 * h * k2);
                const double k4 = deriv(n + h * k3);
                n += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if (n < 0.0) n = 0.0;
            }
            t = t_target;
        }
        out.push_back(n);
    }
    return out;
}

// Average n(t) over independent trajectories on a uniform grid covering
// [0, t_end_ms].  Trajectory k uses the decorrelated stream
// Rng::for_trajectory(master_seed, k), so the result is reproducible and
// independent of evaluation order.
inline DecayCurve mean_decay_curve(const DecayModelParams& model, double t_end_ms,
                                   int n_trajectories, std::uint64_t master_seed,
                                   int n_samples = 400) {
    model.validate();
    if (n_trajectories < 1)
        throw std::invalid_argument("mean_decay_curve: need at least one trajectory");
    if (n_samples < 2)
        throw std::invalid_argument("mean_decay_curve: need at least two samples");
    if (!(t_end_ms > 0.0))
        throw std::invalid_argument("mean_decay_curve: t_end_ms must be positive");

    DecayCurve curve;
    curve.t_ms.resize(static_cast<std::size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i)
        curve.t_ms[static_cast<std::size_t>(i)] = t_end_ms * i / (n_samples - 1);

    curve.n_mean.assign(curve.t_ms.size(), 0.0);
    for (int k = 0; k < n_trajectories; ++k) {
        Rng rng = Rng::for_trajectory(master_seed, static_cast<std::uint64_t>(k));
        const DecayTrajectory traj = simulate_decay(model, t_end_ms, rng);
        for (std::size_t i = 0; i < curve.t_ms.size(); ++i)
            curve.n_mean[i] += n_at(traj, curve.t_ms[i]);
    }
    for (double& v : curve.n_mean) v /= n_trajectories;

    curve.n_meanfield = mean_field_decay(model, curve.t_ms);
    return curve;
}

// Map an atom-number series to intracavity photon numbers for drive
// amplitude eta (rad/us).  Requires model.kappa to convert the normalized
// Lorentzian into absolute photon numbers.
inline std::vector<double> transmission_from_n(const std::vector<double>& n_series,
                                               const DecayModelParams& model, double eta) {
    if (!(model.kappa > 0.0))
        throw std::invalid_argument("transmission_from_n: model.kappa must be positive");
    const double peak = (eta / model.kappa) * (eta / model.kappa);
    std::vector<double> out;
    out.reserve(n_series.size());
    for (double n : n_series) out.push_back(peak * normalized_transmission(n, model));
    return out;
}

}  // namespace selftrap
