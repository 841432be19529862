#pragma once

// Derivative-free bounded minimization: Nelder-Mead simplex descent with
// box clamping and a deterministic multi-start layer.  Chosen because the
// fitting objectives in this library can wrap Monte Carlo simulators whose
// gradients are unavailable or noisy.  Everything here is deterministic:
// the extra starts come from a fixed Latin-hypercube pattern, not an RNG,
// so repeated fits of the same data are identical bit for bit.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace selftrap {

struct MinimizeOptions {
    double relative_tolerance = 1e-8;  // simplex spread criterion
    int max_evaluations = 10000;       // budget per start
    int multistart = 8;                // extra Latin-hypercube starts
};

struct MinimizeResult {
    std::vector<double> x;
    double objective = std::numeric_limits<double>::infinity();
    int n_evaluations = 0;
    bool converged = false;
    std::vector<std::size_t> bounds_hit;  // indices resting exactly on a bound
};

namespace detail {

using Objective = std::function<double(const std::vector<double>&)>;

inline void clamp_into(std::vector<double>& x, const std::vector<double>& lo,
                       const std::vector<double>& hi) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
}

struct CountingObjective {
    const Objective& f;
    int evaluations = 0;

    double operator()(const std::vector<double>& x) {
        ++evaluations;
        const double v = f(x);
        if (!std::isfinite(v)) {
            std::string where = "(";
            for (std::size_t i = 0; i < x.size(); ++i)
                where += (i ? ", " : "") + std::to_string(x[i]);
            throw std::runtime_error("minimize: objective is not finite at " + where + ")");
        }
        return v;
    }
};

// One Nelder-Mead descent from `start`.  Trial points are clamped into the
// box before evaluation, so vertices can come to rest exactly on a bound.
inline MinimizeResult nelder_mead(CountingObjective& eval, const std::vector<double>& start,
                                  const std::vector<double>& lo, const std::vector<double>& hi,
                                  const MinimizeOptions& opt) {
    const std::size_t dim = start.size();
    const int budget = eval.evaluations + opt.max_evaluations;

    std::vector<std::vector<double>> vertex(dim + 1, start);
    for (std::size_t i = 0; i < dim; ++i) {
        double h = std::isfinite(hi[i] - lo[i]) ? 0.1 * (hi[i] - lo[i])
                                                : 0.05 * std::max(1.0, std::abs(start[i]));
        if (h == 0.0) h = 0.05;
        if (start[i] + h > hi[i]) h = -h;  // step inward from an upper bound
        vertex[i + 1][i] += h;
        clamp_into(vertex[i + 1], lo, hi);
    }
    std::vector<double> value(dim + 1);
    for (std::size_t i = 0; i <= dim; ++i) value[i] = eval(vertex[i]);

    std::vector<std::size_t> order(dim + 1);
    auto sort_vertices = [&] {
        for (std::size_t i = 0; i <= dim; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return value[a] < value[b]; });
    };

    bool converged = false;
    while (eval.evaluations < budget) {
        sort_vertices();
        const std::size_t best = order[0], worst = order[dim], second = order[dim - 1];

        // Convergence: both the value spread and the vertex spread are small
        // relative to the best vertex.
        const double f_spread = value[worst] - value[best];
        double x_spread = 0.0, x_scale = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            double span = 0.0;
            for (std::size_t v = 0; v <= dim; ++v)
                span = std::max(span, std::abs(vertex[v][i] - vertex[best][i]));
            x_spread = std::max(x_spread, span);
            x_scale = std::max(x_scale, std::abs(vertex[best][i]));
        }
        const double tol = opt.relative_tolerance;
        if (f_spread <= tol * (std::abs(value[best]) + tol) &&
            x_spread <= tol * (x_scale + tol)) {
            converged = true;
            break;
        }

        std::vector<double> centroid(dim, 0.0);
        for (std::size_t v = 0; v <= dim; ++v) {
            if (v == worst) continue;
            for (std::size_t i = 0; i < dim; ++i) centroid[i] += vertex[v][i];
        }
        for (double& c : centroid) c /= static_cast<double>(dim);

        auto blend = [&](double coeff) {
            std::vector<double> x(dim);
            for (std::size_t i = 0; i < dim; ++i)
                x[i] = centroid[i] + coeff * (centroid[i] - vertex[worst][i]);
            clamp_into(x, lo, hi);
            return x;
        };

        std::vector<double> reflected = blend(1.0);
        const double f_reflected = eval(reflected);
        if (f_reflected < value[best]) {
            std::vector<double> expanded = blend(2.0);
            const double f_expanded = eval(expanded);
            if (f_expanded < f_reflected) {
                vertex[worst] = std::move(expanded);
                value[worst] = f_expanded;
            } else {
                vertex[worst] = std::move(reflected);
                value[worst] = f_reflected;
            }
            continue;
        }
        if (f_reflected < value[second]) {
            vertex[worst] = std::move(reflected);
            value[worst] = f_reflected;
            continue;
        }
        const bool outside = f_reflected < value[worst];
        std::vector<double> contracted = blend(outside ? 0.5 : -0.5);
        const double f_contracted = eval(contracted);
        if (f_contracted < std::min(f_reflected, value[worst])) {
            vertex[worst] = std::move(contracted);
            value[worst] = f_contracted;
            continue;
        }
        // Shrink toward the best vertex.
        for (std::size_t v = 0; v <= dim; ++v) {
            if (v == best) continue;
            if (eval.evaluations >= budget) break;  // keep vertex/value pairs in sync
            for (std::size_t i = 0; i < dim; ++i)
                vertex[v][i] = 0.5 * (vertex[v][i] + vertex[best][i]);
            clamp_into(vertex[v], lo, hi);
            value[v] = eval(vertex[v]);
        }
    }

    sort_vertices();
    MinimizeResult res;
    res.x = vertex[order[0]];
    res.objective = value[order[0]];
    res.converged = converged;
    return res;
}

}  // namespace detail

// Minimize `objective` over the box [lower, upper] starting from `initial`,
// then from `options.multistart` additional Latin-hypercube points, keeping
// the best outcome (ties break toward the earliest start) and polishing it
// with one final descent.  Unbounded directions sample a box of a few scale
// lengths around the initial point.
inline MinimizeResult minimize(const detail::Objective& objective, std::vector<double> initial,
                               std::vector<double> lower, std::vector<double> upper,
                               const MinimizeOptions& options = {}) {
    const std::size_t dim = initial.size();
    if (dim == 0) throw std::invalid_argument("minimize: empty parameter vector");
    if (lower.size() != dim || upper.size() != dim)
        throw std::invalid_argument("minimize: bound vectors must match the parameter count");
    for (std::size_t i = 0; i < dim; ++i)
        if (!(lower[i] <= upper[i]))
            throw std::invalid_argument("minimize: lower bound exceeds upper bound");
    if (options.multistart < 0 || options.max_evaluations < 1)
        throw std::invalid_argument("minimize: bad options");
    detail::clamp_into(initial, lower, upper);

    // Latin-hypercube starts: stratum midpoints visited in a fixed
    // odd-multiplier order per dimension (a bijection mod m, no RNG).
    const int m = options.multistart;
    std::vector<std::vector<double>> starts;
    starts.push_back(initial);
    for (int k = 0; k < m; ++k) {
        std::vector<double> x(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            double box_lo = lower[i], box_hi = upper[i];
            if (!std::isfinite(box_lo) || !std::isfinite(box_hi)) {
                const double scale = std::max(1.0, std::abs(initial[i]));
                box_lo = std::isfinite(box_lo) ? box_lo : initial[i] - 4.0 * scale;
                box_hi = std::isfinite(box_hi) ? box_hi : initial[i] + 4.0 * scale;
            }
            const int mult = 2 * (static_cast<int>(i) % m) + 1;
            const int stratum = (mult * k + static_cast<int>(i)) % m;
            x[i] = box_lo + (stratum + 0.5) / m * (box_hi - box_lo);
        }
        detail::clamp_into(x, lower, upper);
        starts.push_back(std::move(x));
    }

    detail::CountingObjective eval{objective};
    MinimizeResult best;
    for (const auto& start : starts) {
        MinimizeResult r = detail::nelder_mead(eval, start, lower, upper, options);
        if (r.objective < best.objective) {
            best = std::move(r);
        }
    }
    // Polish with a fresh simplex around the winner.  The start vertex is
    // part of the polish simplex, so the outcome is never worse.
    MinimizeResult polished = detail::nelder_mead(eval, best.x, lower, upper, options);
    if (polished.objective <= best.objective) best = std::move(polished);

    // A minimum pressed against a bound usually converges to a point a hair
    // inside it; snap such coordinates onto the bound when that does not
    // increase the objective.
    for (std::size_t i = 0; i < dim; ++i) {
        for (double bound : {lower[i], upper[i]}) {
            if (!std::isfinite(bound) || best.x[i] == bound) continue;
            if (std::abs(best.x[i] - bound) > 1e-7 * (1.0 + std::abs(bound))) continue;
            std::vector<double> trial = best.x;
            trial[i] = bound;
            const double f = eval(trial);
            if (f <= best.objective) {
                best.x = std::move(trial);
                best.objective = f;
            }
        }
    }

    best.n_evaluations = eval.evaluations;
    for (std::size_t i = 0; i < dim; ++i)
        if (best.x[i] == lower[i] || best.x[i] == upper[i]) best.bounds_hit.push_back(i);
    return best;
}

}  // namespace selftrap
