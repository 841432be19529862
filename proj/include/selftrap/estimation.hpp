#pragma once

// Least-squares estimation of the phenomenological models: heating
// coefficients (d0, d1) from trapping-time-vs-power data, and the collapse
// rate-law parameters from transmission decay traces.  Traces arrive in
// arbitrary units, so an amplitude scale and baseline offset are always
// profiled out analytically inside the objectives; the nonlinear shape
// parameters are found with the bounded simplex minimizer.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "selftrap/collapse.hpp"
#include "selftrap/core_model.hpp"
#include "selftrap/nelder_mead.hpp"
#include "selftrap/params.hpp"
#include "selftrap/rng.hpp"
#include "selftrap/trap_physics.hpp"
#include "selftrap/units.hpp"

namespace selftrap {

// Estimation failure with a machine-readable category ("degenerate-data" is
// the one callers dispatch on).
class FitError : public std::runtime_error {
public:
    FitError(std::string category, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)) {}

    const std::string& category() const { return category_; }

private:
    std::string category_;
};

struct FitResult {
    std::map<std::string, double> parameters;
    double residual_rms = 0.0;
    int n_evaluations = 0;
    bool converged = false;
    std::vector<std::string> parameter_bounds_hit;
};

namespace detail {

// Best (amplitude, offset) for y ~ amplitude * basis + offset, and the
// resulting sum of squared residuals.  A flat basis degenerates gracefully
// to amplitude zero and the data mean.
struct LinearProfile {
    double amplitude = 0.0;
    double offset = 0.0;
    double sse = 0.0;
};

inline LinearProfile profile_linear(const std::vector<double>& basis,
                                    const std::vector<double>& y) {
    const std::size_t n = basis.size();
    double mb = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mb += basis[i];
        my += y[i];
    }
    mb /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sbb = 0.0, sby = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sbb += (basis[i] - mb) * (basis[i] - mb);
        sby += (basis[i] - mb) * (y[i] - my);
    }
    LinearProfile fit;
    if (sbb > 1e-20 * static_cast<double>(n)) {
        fit.amplitude = sby / sbb;
        fit.offset = my - fit.amplitude * mb;
    } else {
        fit.offset = my;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double r = fit.amplitude * basis[i] + fit.offset - y[i];
        fit.sse += r * r;
    }
    return fit;
}

inline void require_series(const std::vector<double>& t_ms, const std::vector<double>& y,
                           std::size_t min_points, const char* who) {
    if (t_ms.size() != y.size())
        throw std::invalid_argument(std::string(who) + ": time and value counts differ");
    if (t_ms.size() < min_points)
        throw std::invalid_argument(std::string(who) + ": too few points");
    for (std::size_t i = 1; i < t_ms.size(); ++i)
        if (!(t_ms[i] > t_ms[i - 1]))
            throw std::invalid_argument(std::string(who) + ": times must strictly increase");
}

}  // namespace detail

// Single-exponential fit y = amplitude * exp(-(t - t0)/tau) + offset with the
// linear parameters profiled out; tau found by a coarse log-spaced scan
// refined with golden-section search.
struct ExponentialFit {
    double amplitude = 0.0;
    double tau_ms = 0.0;
    double offset = 0.0;
    double residual_rms = 0.0;
};

inline ExponentialFit fit_exponential(const std::vector<double>& t_ms,
                                      const std::vector<double>& y) {
    detail::require_series(t_ms, y, 4, "fit_exponential");
    const double t0 = t_ms.front();
    const double span = t_ms.back() - t0;

    std::vector<double> basis(t_ms.size());
    auto sse_at = [&](double log_tau) {
        const double tau = std::exp(log_tau);
        for (std::size_t i = 0; i < t_ms.size(); ++i)
            basis[i] = std::exp(-(t_ms[i] - t0) / tau);
        return detail::profile_linear(basis, y).sse;
    };

    const double lo = std::log(span / 300.0), hi = std::log(span * 300.0);
    const int grid = 90;
    int best = 0;
    double best_sse = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= grid; ++i) {
        const double sse = sse_at(lo + (hi - lo) * i / grid);
        if (sse < best_sse) {
            best_sse = sse;
            best = i;
        }
    }
    double a = lo + (hi - lo) * std::max(best - 1, 0) / grid;
    double b = lo + (hi - lo) * std::min(best + 1, grid) / grid;
    const double inv_phi = 0.6180339887498949;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = sse_at(c), fd = sse_at(d);
    while (b - a > 1e-10) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = sse_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = sse_at(d);
        }
    }
    const double log_tau = 0.5 * (a + b);
    const double tau = std::exp(log_tau);
    for (std::size_t i = 0; i < t_ms.size(); ++i)
        basis[i] = std::exp(-(t_ms[i] - t0) / tau);
    const detail::LinearProfile lin = detail::profile_linear(basis, y);

    ExponentialFit fit;
    fit.amplitude = lin.amplitude;
    fit.tau_ms = tau;
    fit.offset = lin.offset;
    fit.residual_rms = std::sqrt(lin.sse / static_cast<double>(y.size()));
    return fit;
}

namespace detail {

// Shared degeneracy gate: a series qualifies as a decay only if a single
// exponential beats a constant fit by a clear margin.  Flat data and pure
// noise both fail this and raise "degenerate-data".
inline void require_significant_decay(const std::vector<double>& t_ms,
                                      const std::vector<double>& y, const char* who) {
    double scale = 0.0, mean = 0.0;
    for (double v : y) {
        scale = std::max(scale, std::abs(v));
        mean += v;
    }
    mean /= static_cast<double>(y.size());
    double sse_const = 0.0;
    for (double v : y) sse_const += (v - mean) * (v - mean);
    const double rms_const = std::sqrt(sse_const / static_cast<double>(y.size()));
    const double eps = 1e-6 * std::max(scale, 1e-300);
    if (rms_const <= eps)
        throw FitError("degenerate-data",
                       std::string(who) + ": trace has no variation to fit");
    const double rms_exp = fit_exponential(t_ms, y).residual_rms;
    if ((rms_const + eps) / (rms_exp + eps) < 1.2)
        throw FitError("degenerate-data",
                       std::string(who) + ": no significant decay in the trace");
}

}  // namespace detail

// One measured point of a trapping-time-vs-power curve.
struct HeatingPoint {
    double power_uW = 0.0;
    double tau_ms = 0.0;  // zero or negative = atoms were not trapped
};

// Fit the empirical heating coefficients (d0, d1) to measured trapping times.
// Power converts to antinode saturation through the calibration anchor at
// the stated cavity detuning; temperature and all other physics are fixed.
inline FitResult fit_heating_coefficients(const std::vector<HeatingPoint>& data,
                                          const SystemParams& p, double temperature_uK,
                                          const CalibrationAnchor& anchor, double delta_c,
                                          const MinimizeOptions& options = {}) {
    if (data.size() < 4)
        throw std::invalid_argument("fit_heating_coefficients: need at least 4 points");
    p.validate();

    std::vector<double> saturation(data.size());
    bool any_trapped = false;
    for (std::size_t i = 0; i < data.size(); ++i) {
        saturation[i] =
            saturation_from_power(data[i].power_uW, anchor, delta_c, anchor.n_eff_u0, p);
        if (data[i].tau_ms > 0.0) any_trapped = true;
    }
    if (!any_trapped)
        throw FitError("degenerate-data",
                       "fit_heating_coefficients: every data point is untrapped");

    auto objective = [&](const std::vector<double>& q) {
        const HeatingModel h = HeatingModel::with_temperature_uK(q[0], q[1], temperature_uK);
        double sse = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double model = empirical_trapping_time_ms(saturation[i], h, p).value_or(0.0);
            const double r = model - (data[i].tau_ms > 0.0 ? data[i].tau_ms : 0.0);
            sse += r * r;
        }
        return sse;
    };

    const MinimizeResult m = minimize(objective, {0.5, 1.0}, {0.0, 0.0}, {100.0, 100.0}, options);

    FitResult fit;
    fit.parameters["d0"] = m.x[0];
    fit.parameters["d1"] = m.x[1];
    fit.residual_rms = std::sqrt(m.objective / static_cast<double>(data.size()));
    fit.n_evaluations = m.n_evaluations;
    fit.converged = m.converged;
    for (std::size_t idx : m.bounds_hit) fit.parameter_bounds_hit.push_back(idx == 0 ? "d0" : "d1");
    return fit;
}

struct CollapseFitOptions {
    MinimizeOptions minimize;
    double kappa = 0.0;           // rad/us; > 0 adds MHz conversions to the report
    int bootstrap_samples = 0;    // residual-resampling spread estimates
    std::uint64_t seed = 1;       // bootstrap seed
    std::vector<double> initial;  // optional (delta_c_tilde, n0_u0_tilde, a_param, tau_ms)
};

namespace detail {

constexpr const char* kCollapseNames[4] = {"delta_c_tilde", "n0_u0_tilde", "a_param", "tau_ms"};

// Transmission basis curve for shape parameters q = (delta_c_tilde,
// n0_u0_tilde, a_param, log_tau) on the shifted time grid.  The atom number
// is integrated in units of the initial count (n0 = 1), which makes the
// product n0*u0_tilde the natural identifiable parameter.
inline std::vector<double> collapse_basis(const std::vector<double>& q,
                                          const std::vector<double>& t_shifted) {
    DecayModelParams m;
    m.delta_c_tilde = q[0];
    m.u0_tilde = q[1];
    m.n0 = 1.0;
    m.a_param = q[2];
    m.tau_ms = std::exp(q[3]);
    m.kappa = 1.0;
    std::vector<double> nu = mean_field_decay(m, t_shifted, 6);
    for (double& v : nu) v = normalized_transmission(v, m);
    return nu;
}

inline MinimizeResult fit_collapse_shape(const std::vector<double>& t_shifted,
                                         const std::vector<double>& y,
                                         const std::vector<double>& initial,
                                         const MinimizeOptions& options) {
    auto objective = [&](const std::vector<double>& q) {
        return profile_linear(collapse_basis(q, t_shifted), y).sse;
    };
    const double span = t_shifted.back();
    // delta_c_tilde is kept non-positive: (delta, pull) -> (-delta, -pull)
    // produces the mirror-image model, and fixing the sign of the detuning
    // removes that degeneracy.
    const std::vector<double> lower = {-20.0, -20.0, 0.0, std::log(span * 1e-3)};
    const std::vector<double> upper = {0.0, 20.0, 50.0, std::log(span * 1e3)};
    return minimize(objective, initial, lower, upper, options);
}

}  // namespace detail

// Fit (delta_c_tilde, n0*u0_tilde, a_param, tau) plus a nuisance amplitude
// and offset to a transmission decay trace in arbitrary units.  The decay is
// taken to start at the first sample.
inline FitResult fit_collapse_model(const std::vector<double>& t_ms,
                                    const std::vector<double>& y,
                                    const CollapseFitOptions& options = {}) {
    detail::require_series(t_ms, y, 8, "fit_collapse_model");
    detail::require_significant_decay(t_ms, y, "fit_collapse_model");

    std::vector<double> t_shifted(t_ms.size());
    for (std::size_t i = 0; i < t_ms.size(); ++i) t_shifted[i] = t_ms[i] - t_ms.front();
    const double span = t_shifted.back();

    std::vector<double> start = {-1.0, -0.5, 1.0, std::log(span / 5.0)};
    if (!options.initial.empty()) {
        if (options.initial.size() != 4)
            throw std::invalid_argument(
                "fit_collapse_model: initial guess needs exactly 4 entries");
        start = options.initial;
        if (!(start[3] > 0.0))
            throw std::invalid_argument("fit_collapse_model: initial tau must be positive");
        start[3] = std::log(start[3]);
    }

    const MinimizeResult m =
        detail::fit_collapse_shape(t_shifted, y, start, options.minimize);
    const std::vector<double> basis = detail::collapse_basis(m.x, t_shifted);
    const detail::LinearProfile lin = detail::profile_linear(basis, y);

    FitResult fit;
    fit.parameters["delta_c_tilde"] = m.x[0];
    fit.parameters["n0_u0_tilde"] = m.x[1];
    fit.parameters["a_param"] = m.x[2];
    fit.parameters["tau_ms"] = std::exp(m.x[3]);
    fit.parameters["amplitude"] = lin.amplitude;
    fit.parameters["offset"] = lin.offset;
    if (options.kappa > 0.0) {
        fit.parameters["delta_c_mhz"] = angular_to_mhz(m.x[0] * options.kappa);
        fit.parameters["n0_u0_mhz"] = angular_to_mhz(m.x[1] * options.kappa);
    }
    fit.residual_rms = std::sqrt(lin.sse / static_cast<double>(y.size()));
    fit.n_evaluations = m.n_evaluations;
    fit.converged = m.converged;
    for (std::size_t idx : m.bounds_hit)
        fit.parameter_bounds_hit.push_back(detail::kCollapseNames[idx]);

    if (options.bootstrap_samples > 0) {
        // Residual resampling: rebuild synthetic traces from the fitted curve
        // plus resampled residuals, refit from the fitted point, and report
        // the spread of each shape parameter.
        std::vector<double> fitted(y.size()), residual(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            fitted[i] = lin.amplitude * basis[i] + lin.offset;
            residual[i] = y[i] - fitted[i];
        }
        Rng rng(options.seed);
        MinimizeOptions refit_options = options.minimize;
        refit_options.multistart = 0;  // local refits around the base solution
        std::vector<std::vector<double>> samples(4);
        std::vector<double> resampled(y.size());
        for (int b = 0; b < options.bootstrap_samples; ++b) {
            for (std::size_t i = 0; i < y.size(); ++i) {
                const std::size_t pick = static_cast<std::size_t>(
                    rng.uniform() * static_cast<double>(y.size()));
                resampled[i] = fitted[i] + residual[std::min(pick, y.size() - 1)];
            }
            const MinimizeResult r =
                detail::fit_collapse_shape(t_shifted, resampled, m.x, refit_options);
            for (std::size_t k = 0; k < 4; ++k) {
                const double v = k == 3 ? std::exp(r.x[k]) : r.x[k];
                samples[k].push_back(v);
            }
        }
        for (std::size_t k = 0; k < 4; ++k) {
            double mean = 0.0;
            for (double v : samples[k]) mean += v;
            mean /= static_cast<double>(samples[k].size());
            double var = 0.0;
            for (double v : samples[k]) var += (v - mean) * (v - mean);
            var /= static_cast<double>(samples[k].size());
            fit.parameters[std::string(detail::kCollapseNames[k]) + "_spread"] = std::sqrt(var);
        }
    }
    return fit;
}

// Compare the best single exponential against the full collapse model.
// `improvement` is the ratio of residual rms values (floored by a small
// fraction of the trace scale so that two perfect fits give ratio 1).
struct NonexponentialityReport {
    double improvement = 1.0;
    bool nonexponential = false;
    double rms_exponential = 0.0;
    double rms_model = 0.0;
    double threshold = 2.0;
};

inline NonexponentialityReport nonexponentiality_test(const std::vector<double>& t_ms,
                                                      const std::vector<double>& y,
                                                      double threshold = 2.0,
                                                      const CollapseFitOptions& options = {}) {
    detail::require_series(t_ms, y, 8, "nonexponentiality_test");
    detail::require_significant_decay(t_ms, y, "nonexponentiality_test");

    double scale = 0.0;
    for (double v : y) scale = std::max(scale, std::abs(v));
    const double eps = 1e-6 * std::max(scale, 1e-300);

    NonexponentialityReport report;
    report.threshold = threshold;
    report.rms_exponential = fit_exponential(t_ms, y).residual_rms;
    report.rms_model = fit_collapse_model(t_ms, y, options).residual_rms;
    report.improvement = (report.rms_exponential + eps) / (report.rms_model + eps);
    report.nonexponential = report.improvement > threshold;
    return report;
}

}  // namespace selftrap
