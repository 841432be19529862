#pragma once

// Semiclassical protocol simulator: weighted macro-particles move in the
// optical potential of the adiabatically eliminated cavity field, which is
// recomputed from the instantaneous ensemble every step, with stochastic
// recoil-heating kicks on the transverse axes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "selftrap/core_model.hpp"
#include "selftrap/rng.hpp"
#include "selftrap/trap_physics.hpp"

namespace selftrap {

// Experimental sequence: the cloud is released at t = 0, falls freely, and
// the drive is switched on at drive_on_time_ms through a linear shutter ramp.
struct ProtocolConfig {
    double drive_on_time_ms = 3.0;
    double shutter_ramp_ms = 0.2;
    double record_until_ms = 50.0;
    double dt_us = 0.0;            // integrator step; 0 = automatic rule
    double sample_every_us = 5.0;  // trace resolution
    double cloud_sigma_um = 1000.0;
    double temperature_uK = 100.0;
    double n_atoms = 7.561e6;      // pulls the default resonance by -2pi*1 MHz
    double release_offset_z_um = 0.0;
    std::size_t n_macroparticles = 2000;
    std::uint64_t seed = 1;
    bool heating_enabled = true;
    bool gravity_enabled = true;
    // Detaches the field from the ensemble (numerics tests): the photon
    // number is held at this value instead of solving the steady state.
    std::optional<double> frozen_photon_number;

    void validate() const {
        if (!(drive_on_time_ms >= 0.0)) throw std::invalid_argument("drive_on_time_ms must be >= 0");
        if (!(shutter_ramp_ms >= 0.0)) throw std::invalid_argument("shutter_ramp_ms must be >= 0");
        if (!(record_until_ms > 0.0)) throw std::invalid_argument("record_until_ms must be > 0");
        if (!(dt_us >= 0.0)) throw std::invalid_argument("dt_us must be >= 0");
        if (!(sample_every_us > 0.0)) throw std::invalid_argument("sample_every_us must be > 0");
        if (!(cloud_sigma_um > 0.0)) throw std::invalid_argument("cloud_sigma_um must be > 0");
        if (!(temperature_uK >= 0.0)) throw std::invalid_argument("temperature_uK must be >= 0");
        if (!(n_atoms >= 0.0)) throw std::invalid_argument("n_atoms must be >= 0");
        if (n_macroparticles == 0) throw std::invalid_argument("n_macroparticles must be >= 1");
    }
};

// Drive amplitude at a given time: zero before drive-on, then a linear
// shutter ramp to the full amplitude.
inline double drive_amplitude(double t_ms, const DriveConfig& d, const ProtocolConfig& c) {
    if (t_ms < c.drive_on_time_ms) return 0.0;
    if (c.shutter_ramp_ms <= 0.0) return d.eta;
    const double ramp = (t_ms - c.drive_on_time_ms) / c.shutter_ramp_ms;
    return ramp >= 1.0 ? d.eta : d.eta * ramp;
}

// Dipole potential per unit mass (um^2/ms^2) for a fixed photon number,
// optionally including gravity.  The hbar/m of the optical term is folded in
// through the recoil frequency.
inline double potential_per_mass(const Vec3& r, double photon_number,
                                 const SystemParams& p, bool gravity = true) {
    const double f = mode_function(r, p);
    double phi = p.accel_conversion() * light_shift_u0(p) * photon_number * f * f;
    if (gravity) phi += p.gravity_um_ms2 * r.z;
    return phi;
}

// Acceleration (um/ms^2) = -grad of the potential above.
inline Vec3 acceleration(const Vec3& r, double photon_number, const SystemParams& p,
                         bool gravity = true) {
    const double k = p.wavenumber();
    const double inv_w2 = 1.0 / (p.waist_um * p.waist_um);
    const double c = std::cos(k * r.x), s = std::sin(k * r.x);
    const double e2 = std::exp(-2.0 * (r.y * r.y + r.z * r.z) * inv_w2);
    const double common = p.accel_conversion() * light_shift_u0(p) * photon_number * e2;
    Vec3 a;
    a.x = common * k * 2.0 * s * c;
    a.y = common * c * c * 4.0 * inv_w2 * r.y;
    a.z = common * c * c * 4.0 * inv_w2 * r.z;
    if (gravity) a.z -= p.gravity_um_ms2;
    return a;
}

// Velocity variance added per unit time along one transverse axis, um^2/ms^2
// per ms.  axis_coeff is 2/5 (polarization axis, y) or 1/5 (z); the factor
// 1e3 bridges the us-based rates and ms-based velocities.
inline double heating_velocity_variance_rate(double axis_coeff, double local_s,
                                             const SystemParams& p) {
    return axis_coeff * p.accel_conversion() * 1e3 * p.omega_rec * p.gamma * local_s;
}

// One stochastic recoil kick: Gaussian velocity increments on y and z with
// the per-axis 2/5, 1/5 energy split; the axial direction is untouched.
inline void heating_kick(double& vy, double& vz, double local_s, double dt_ms,
                         const SystemParams& p, Rng& rng) {
    if (!(local_s >= 0.0)) throw std::invalid_argument("local_s must be >= 0");
    if (local_s == 0.0) return;
    const double base = p.accel_conversion() * 1e3 * p.omega_rec * p.gamma * local_s * dt_ms;
    vy += std::sqrt(heating_fraction_y * base) * rng.normal();
    vz += std::sqrt(heating_fraction_z * base) * rng.normal();
}

// Samples the released cloud: isotropic Gaussian positions of width sigma
// (z shifted by the release offset) and Maxwell-Boltzmann velocities.  Each
// macro-particle carries n_atoms / n_macroparticles physical atoms.
inline EnsembleState initialize_thermal_cloud(const ProtocolConfig& c,
                                              const SystemParams& p, Rng& rng) {
    c.validate();
    EnsembleState s;
    s.resize(c.n_macroparticles);
    const double v_th = p.thermal_velocity(c.temperature_uK);
    for (std::size_t j = 0; j < c.n_macroparticles; ++j) {
        s.x[j] = c.cloud_sigma_um * rng.normal();
        s.y[j] = c.cloud_sigma_um * rng.normal();
        s.z[j] = c.cloud_sigma_um * rng.normal() + c.release_offset_z_um;
        s.vx[j] = v_th * rng.normal();
        s.vy[j] = v_th * rng.normal();
        s.vz[j] = v_th * rng.normal();
        s.weight[j] = c.n_atoms / static_cast<double>(c.n_macroparticles);
    }
    return s;
}

inline EnsembleState initialize_thermal_cloud(const ProtocolConfig& c,
                                              const SystemParams& p) {
    Rng rng(c.seed);
    return initialize_thermal_cloud(c, p, rng);
}

// Recorded observables on a uniform time grid.
struct TransmissionTrace {
    std::vector<double> t_ms;
    std::vector<double> photon_number;
    std::vector<double> n_eff;
    std::vector<double> trapped_fraction;  // weight inside rho < 2*waist,
                                           // relative to the drive-on moment
    double resonant_photon_number = 0.0;   // eta^2/kappa^2 at full drive
    double empty_photon_number = 0.0;      // steady state with no atoms
    std::vector<std::string> warnings;

    std::size_t size() const { return t_ms.size(); }

    // Transmission relative to the resonant empty-cavity level.
    double transmission_norm(std::size_t i) const {
        return resonant_photon_number > 0.0 ? photon_number[i] / resonant_photon_number
                                            : 0.0;
    }
};

// Integrator step for a protocol: the automatic rule resolves the axial
// oscillation at the deepest reachable trap with 40 steps per period, capped
// at 50 ns, then rounds down so a whole number of steps spans one sample.
inline double effective_time_step_us(const ProtocolConfig& c, const DriveConfig& d,
                                     const SystemParams& p) {
    double dt0 = c.dt_us;
    if (dt0 <= 0.0) {
        dt0 = 0.05;
        const double n_peak = d.eta * d.eta / (p.kappa * p.kappa);
        const double u_peak = std::abs(light_shift_u0(p)) * n_peak;
        if (u_peak > 0.0) {
            const double omega_ax = 2.0 * std::sqrt(p.omega_rec * u_peak);
            dt0 = std::min(dt0, two_pi / omega_ax / 40.0);
        }
    }
    const int n_sub = std::max(1, static_cast<int>(std::ceil(c.sample_every_us / dt0 - 1e-9)));
    return c.sample_every_us / n_sub;
}

// Protocol simulator.  Keeps per-particle trigonometric and Gaussian mode
// factors as incrementally updated caches so the inner loop stays free of
// libm calls; caches are recomputed exactly on a fixed cadence and whenever
// an increment is too large for the polynomial update.
class Simulator {
  public:
    Simulator(const ProtocolConfig& config, const DriveConfig& drive,
              const SystemParams& params, Rng rng)
        : cfg_(config), drv_(drive), par_(params), rng_(rng) {
        cfg_.validate();
        drv_.validate();
        for (auto& w : par_.validate()) warnings_.push_back(std::move(w));

        state_ = initialize_thermal_cloud(cfg_, par_, rng_);
        dt_ms_ = effective_time_step_us(cfg_, drv_, par_) * 1e-3;

        // Adiabaticity of the field elimination: the axial trap frequency at
        // peak depth should stay well below the cavity linewidth.
        const double u_peak =
            std::abs(light_shift_u0(par_)) * drv_.eta * drv_.eta / (par_.kappa * par_.kappa);
        const double omega_ax = 2.0 * std::sqrt(par_.omega_rec * u_peak);
        if (omega_ax > 0.25 * par_.kappa)
            warnings_.push_back(
                "axial trap frequency exceeds kappa/4: adiabatic field "
                "elimination is marginal for this drive strength");

        const std::size_t n = state_.size();
        trig_c_.resize(n);
        trig_s_.resize(n);
        gauss_.resize(n);
        rho2_.resize(n);
        in_range_.resize(n);
        for (std::size_t j = 0; j < n; ++j) refresh_particle(j);
        recompute_n_eff();
        photon_ = field_photon_number(drive_amplitude(0.0, drv_, cfg_));
    }

    double time_ms() const { return time_ms_; }
    double dt_ms() const { return dt_ms_; }
    double photon_number() const { return photon_; }
    double n_eff() const { return n_eff_; }
    const EnsembleState& state() const { return state_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    // Weight currently inside the trapping radius (rho < 2*waist).
    double trapped_weight() const {
        const double r2_max = 4.0 * par_.waist_um * par_.waist_um;
        double sum = 0.0;
        for (std::size_t j = 0; j < state_.size(); ++j)
            if (rho2_[j] < r2_max) sum += state_.weight[j];
        return sum;
    }

    // Advances one integrator step (velocity Verlet with the field refreshed
    // from the ensemble at both ends, then heating kicks).
    void step() {
        if (step_count_ % refresh_interval == 0 && step_count_ > 0) {
            for (std::size_t j = 0; j < state_.size(); ++j)
                if (in_range_[j]) refresh_particle(j);
        }
        ++step_count_;

        const std::size_t n = state_.size();
        const double dt = dt_ms_;
        const double half_dt = 0.5 * dt;
        const double k = par_.wavenumber();
        const double inv_w2 = 1.0 / (par_.waist_um * par_.waist_um);
        const double cf_u0 = par_.accel_conversion() * light_shift_u0(par_);
        const double g_acc = cfg_.gravity_enabled ? par_.gravity_um_ms2 : 0.0;
        const double common_old = cf_u0 * photon_;

        // Pass 1: half kick with the current field, drift, cache update.
        double n_eff_new = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double vx = state_.vx[j], vy = state_.vy[j], vz = state_.vz[j];
            if (in_range_[j]) {
                const double c = trig_c_[j], s = trig_s_[j], e2 = gauss_[j];
                const double shared = common_old * e2;
                const double c2 = c * c;
                vx += half_dt * shared * k * 2.0 * s * c;
                vy += half_dt * shared * c2 * 4.0 * inv_w2 * state_.y[j];
                vz += half_dt * (shared * c2 * 4.0 * inv_w2 * state_.z[j] - g_acc);
            } else {
                vz -= half_dt * g_acc;
            }
            const double x = state_.x[j] + dt * vx;
            const double y = state_.y[j] + dt * vy;
            const double z = state_.z[j] + dt * vz;
            state_.x[j] = x; state_.y[j] = y; state_.z[j] = z;
            state_.vx[j] = vx; state_.vy[j] = vy; state_.vz[j] = vz;

            const double rho2_new = y * y + z * z;
            if (in_range_[j]) {
                if (rho2_new > cutoff_rho2()) {
                    in_range_[j] = 0;
                    gauss_[j] = 0.0;
                } else {
                    advance_caches(j, k * dt * vx, -2.0 * (rho2_new - rho2_[j]) * inv_w2);
                }
            } else if (rho2_new <= cutoff_rho2()) {
                in_range_[j] = 1;
                rho2_[j] = rho2_new;
                refresh_particle(j);
            }
            rho2_[j] = rho2_new;
            if (in_range_[j]) {
                const double f2 = trig_c_[j] * trig_c_[j] * gauss_[j];
                n_eff_new += state_.weight[j] * f2;
            }
        }
        if (!std::isfinite(n_eff_new)) abort_non_finite();
        n_eff_ = n_eff_new;

        const double t_new = time_at_step(step_count_);
        const double photon_new = field_photon_number(drive_amplitude(t_new, drv_, cfg_));

        // Pass 2: half kick with the updated field, then recoil kicks.
        const double common_new = cf_u0 * photon_new;
        const double s_max = cfg_.heating_enabled
                                 ? saturation_from_photon_number(photon_new, par_)
                                 : 0.0;
        const double kick_base =
            par_.accel_conversion() * 1e3 * par_.omega_rec * par_.gamma * s_max * dt;
        for (std::size_t j = 0; j < n; ++j) {
            if (!in_range_[j]) {
                state_.vz[j] -= half_dt * g_acc;
                continue;
            }
            const double c = trig_c_[j], s = trig_s_[j], e2 = gauss_[j];
            const double shared = common_new * e2;
            const double c2 = c * c;
            state_.vx[j] += half_dt * shared * k * 2.0 * s * c;
            state_.vy[j] += half_dt * shared * c2 * 4.0 * inv_w2 * state_.y[j];
            state_.vz[j] += half_dt * (shared * c2 * 4.0 * inv_w2 * state_.z[j] - g_acc);
            if (kick_base > 0.0) {
                const double base = kick_base * c2 * e2;  // local_s over s_max = f^2
                state_.vy[j] += std::sqrt(heating_fraction_y * base) * rng_.normal();
                state_.vz[j] += std::sqrt(heating_fraction_z * base) * rng_.normal();
            }
        }
        photon_ = photon_new;
        time_ms_ = t_new;
        state_.time_ms = t_new;
    }

    // Runs the full protocol and records the trace on the sample grid.
    TransmissionTrace run() {
        TransmissionTrace trace;
        trace.warnings = warnings_;
        trace.resonant_photon_number = drv_.eta * drv_.eta / (par_.kappa * par_.kappa);
        trace.empty_photon_number = steady_state_photon_number(drv_, 0.0, par_);

        const double sample_ms = cfg_.sample_every_us * 1e-3;
        const int n_sub = static_cast<int>(std::lround(sample_ms / dt_ms_));
        const int n_samples = static_cast<int>(cfg_.record_until_ms / sample_ms + 1e-9) + 1;

        std::vector<double> trapped_raw;
        trapped_raw.reserve(n_samples);
        for (int i = 0; i < n_samples; ++i) {
            if (i > 0)
                for (int j = 0; j < n_sub; ++j) step();
            check_positions_finite();
            trace.t_ms.push_back(time_ms_);
            trace.photon_number.push_back(photon_);
            trace.n_eff.push_back(n_eff_);
            trapped_raw.push_back(trapped_weight());
        }

        // Normalize the retained weight to the drive-on moment.
        double reference = 0.0;
        for (int i = 0; i < n_samples; ++i) {
            if (trace.t_ms[i] >= cfg_.drive_on_time_ms - 1e-12) {
                reference = trapped_raw[i];
                break;
            }
        }
        trace.trapped_fraction.resize(trapped_raw.size(), 0.0);
        if (reference > 0.0)
            for (std::size_t i = 0; i < trapped_raw.size(); ++i)
                trace.trapped_fraction[i] = trapped_raw[i] / reference;
        return trace;
    }

  private:
    static constexpr int refresh_interval = 1024;

    double cutoff_rho2() const {
        // exp(-2*rho^2/w^2) below 1e-16: the particle no longer couples.
        return 18.5 * par_.waist_um * par_.waist_um;
    }

    double time_at_step(std::uint64_t step) const {
        return static_cast<double>(step) * dt_ms_;
    }

    double field_photon_number(double eta_t) const {
        if (cfg_.frozen_photon_number) return *cfg_.frozen_photon_number;
        if (eta_t == 0.0) return 0.0;
        const double pulled = drv_.delta_c - n_eff_ * light_shift_u0(par_);
        return eta_t * eta_t / (pulled * pulled + par_.kappa * par_.kappa);
    }

    void refresh_particle(std::size_t j) {
        const double rho2 = state_.y[j] * state_.y[j] + state_.z[j] * state_.z[j];
        rho2_[j] = rho2;
        if (rho2 > cutoff_rho2()) {
            in_range_[j] = 0;
            trig_c_[j] = trig_s_[j] = gauss_[j] = 0.0;
            return;
        }
        in_range_[j] = 1;
        const double kx = par_.wavenumber() * state_.x[j];
        trig_c_[j] = std::cos(kx);
        trig_s_[j] = std::sin(kx);
        gauss_[j] = std::exp(-2.0 * rho2 / (par_.waist_um * par_.waist_um));
    }

    // Rotates the cached (cos, sin) by delta and scales the Gaussian factor
    // by exp(eps) using short polynomials; falls back to libm for large
    // increments.  Polynomial truncation errors are ~1e-13 per step and are
    // wiped by the periodic exact refresh.
    void advance_caches(std::size_t j, double delta, double eps) {
        double cd, sd;
        const double d2 = delta * delta;
        if (d2 < 0.04) {
            sd = delta * (1.0 - d2 * (1.0 / 6.0) * (1.0 - d2 * 0.05 * (1.0 - d2 / 42.0)));
            cd = 1.0 - 0.5 * d2 * (1.0 - d2 * (1.0 / 12.0) * (1.0 - d2 / 30.0));
        } else {
            cd = std::cos(delta);
            sd = std::sin(delta);
        }
        const double c = trig_c_[j], s = trig_s_[j];
        trig_c_[j] = c * cd - s * sd;
        trig_s_[j] = s * cd + c * sd;

        double ee;
        if (std::abs(eps) < 0.01) {
            ee = 1.0 + eps * (1.0 + eps * 0.5 * (1.0 + eps * (1.0 / 3.0) * (1.0 + eps * 0.25)));
        } else {
            ee = std::exp(eps);
        }
        gauss_[j] *= ee;
    }

    void recompute_n_eff() {
        double sum = 0.0;
        for (std::size_t j = 0; j < state_.size(); ++j)
            if (in_range_[j])
                sum += state_.weight[j] * trig_c_[j] * trig_c_[j] * gauss_[j];
        n_eff_ = sum;
    }

    void check_positions_finite() const {
        for (std::size_t j = 0; j < state_.size(); ++j) {
            if (!std::isfinite(state_.x[j]) || !std::isfinite(state_.y[j]) ||
                !std::isfinite(state_.z[j]))
                throw std::runtime_error(
                    "particle " + std::to_string(j) + " position became non-finite at t = " +
                    std::to_string(time_ms_) + " ms");
        }
    }

    [[noreturn]] void abort_non_finite() const {
        check_positions_finite();
        throw std::runtime_error("field solve became non-finite at t = " +
                                 std::to_string(time_ms_) + " ms");
    }

    ProtocolConfig cfg_;
    DriveConfig drv_;
    SystemParams par_;
    Rng rng_;
    EnsembleState state_;
    std::vector<double> trig_c_, trig_s_, gauss_, rho2_;
    std::vector<std::uint8_t> in_range_;
    std::vector<std::string> warnings_;
    double dt_ms_ = 0.0;
    double time_ms_ = 0.0;
    double photon_ = 0.0;
    double n_eff_ = 0.0;
    std::uint64_t step_count_ = 0;
};

// One protocol trajectory; trajectory `index` of a master seed draws from
// its own deterministic stream.
inline TransmissionTrace run_protocol_trajectory(const ProtocolConfig& config,
                                                 const DriveConfig& drive,
                                                 const SystemParams& params,
                                                 std::uint64_t index) {
    Simulator sim(config, drive, params, Rng::for_trajectory(config.seed, index));
    return sim.run();
}

inline TransmissionTrace run_protocol(const ProtocolConfig& config,
                                      const DriveConfig& drive,
                                      const SystemParams& params) {
    return run_protocol_trajectory(config, drive, params, 0);
}

// Pointwise mean of traces recorded on identical grids.
inline TransmissionTrace average_traces(const std::vector<TransmissionTrace>& traces) {
    if (traces.empty()) throw std::invalid_argument("average_traces: no traces");
    TransmissionTrace avg = traces.front();
    for (std::size_t t = 1; t < traces.size(); ++t) {
        const TransmissionTrace& tr = traces[t];
        if (tr.t_ms != avg.t_ms)
            throw std::invalid_argument("average_traces: mismatched time grids");
        for (std::size_t i = 0; i < avg.size(); ++i) {
            avg.photon_number[i] += tr.photon_number[i];
            avg.n_eff[i] += tr.n_eff[i];
            avg.trapped_fraction[i] += tr.trapped_fraction[i];
        }
        for (const auto& w : tr.warnings)
            if (std::find(avg.warnings.begin(), avg.warnings.end(), w) == avg.warnings.end())
                avg.warnings.push_back(w);
    }
    const double inv = 1.0 / static_cast<double>(traces.size());
    for (std::size_t i = 0; i < avg.size(); ++i) {
        avg.photon_number[i] *= inv;
        avg.n_eff[i] *= inv;
        avg.trapped_fraction[i] *= inv;
    }
    return avg;
}

struct EnsembleResult {
    std::vector<TransmissionTrace> traces;
    TransmissionTrace average;
};

// Runs n_traces independent trajectories (thread-parallel) and their mean.
// Results are identical for every thread count: trajectory streams depend
// only on (seed, index) and the averaging order is fixed.
inline EnsembleResult run_protocol_ensemble(const ProtocolConfig& config,
                                            const DriveConfig& drive,
                                            const SystemParams& params,
                                            std::size_t n_traces, int n_threads = 0) {
    if (n_traces == 0) throw std::invalid_argument("n_traces must be >= 1");
    EnsembleResult result;
    result.traces.resize(n_traces);
    if (n_threads <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        n_threads = hw > 0 ? static_cast<int>(hw) : 1;
    }
    n_threads = std::min<int>(n_threads, static_cast<int>(n_traces));

    std::vector<std::string> errors(n_traces);
    auto worker = [&](int offset) {
        for (std::size_t i = static_cast<std::size_t>(offset); i < n_traces;
             i += static_cast<std::size_t>(n_threads)) {
            try {
                result.traces[i] = run_protocol_trajectory(config, drive, params, i);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    if (n_threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
    }
    for (const auto& err : errors)
        if (!err.empty()) throw std::runtime_error(err);

    result.average = average_traces(result.traces);
    return result;
}

// Characteristic trapping time of a trace: time from the transmission
// maximum to the first crossing of the midpoint between that maximum and the
// late-time (empty-cavity) level, linearly interpolated.  nullopt when the
// trace never decays through the midpoint.
inline std::optional<double> extract_trapping_time(const TransmissionTrace& trace,
                                                   double search_from_ms = 0.0) {
    std::size_t begin = 0;
    while (begin < trace.size() && trace.t_ms[begin] < search_from_ms) ++begin;
    const std::size_t n = trace.size() - begin;
    if (n < 8) return std::nullopt;

    std::size_t peak = begin;
    for (std::size_t i = begin; i < trace.size(); ++i)
        if (trace.photon_number[i] > trace.photon_number[peak]) peak = i;

    // Late-time level: median of the trailing tenth (at least five samples).
    const std::size_t tail = std::max<std::size_t>(5, n / 10);
    std::vector<double> tail_vals(trace.photon_number.end() - tail,
                                  trace.photon_number.end());
    std::nth_element(tail_vals.begin(), tail_vals.begin() + tail / 2, tail_vals.end());
    const double floor_level = tail_vals[tail / 2];

    const double peak_level = trace.photon_number[peak];
    if (!(peak_level > floor_level)) return std::nullopt;
    const double mid = 0.5 * (peak_level + floor_level);

    // A crossing must persist: on sampled stochastic traces a single sample
    // dipping below the midpoint is noise, not the decay front, so the median
    // over the following confirmation window has to sit at the midpoint or
    // below too.  Noiseless monotone decays are unaffected.
    const std::size_t confirm = std::max<std::size_t>(3, n / 200);
    for (std::size_t i = peak + 1; i < trace.size(); ++i) {
        if (trace.photon_number[i] > mid) continue;
        const std::size_t end = std::min(trace.size(), i + confirm);
        std::vector<double> window(trace.photon_number.begin() + static_cast<std::ptrdiff_t>(i),
                                   trace.photon_number.begin() + static_cast<std::ptrdiff_t>(end));
        std::nth_element(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2),
                         window.end());
        if (window[window.size() / 2] > mid) continue;
        const double p0 = trace.photon_number[i - 1], p1 = trace.photon_number[i];
        const double t0 = trace.t_ms[i - 1], t1 = trace.t_ms[i];
        const double frac = p0 > p1 ? (p0 - mid) / (p0 - p1) : 1.0;
        return t0 + frac * (t1 - t0) - trace.t_ms[peak];
    }
    return std::nullopt;
}

}  // namespace selftrap
