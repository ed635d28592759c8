#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "gcsdyn/types.hpp"

namespace gcsdyn {

struct OdeOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    double max_step = 0.0; // 0 disables the cap
    std::int64_t max_steps = 100000000;
    // Control the error per unit step instead of per step. Costs extra steps
    // but keeps the accumulated error proportional to the tolerance across
    // the whole window, which conservation-style bounds need.
    bool error_per_unit_step = false;

    void validate() const {
        std::vector<std::string> issues;
        if (!(rtol > 0.0)) issues.push_back("rtol must be > 0");
        if (!(atol > 0.0)) issues.push_back("atol must be > 0");
        if (max_step < 0.0) issues.push_back("max_step must be >= 0");
        if (max_steps < 1) issues.push_back("max_steps must be >= 1");
        if (!issues.empty()) throw ValidationError(issues);
    }
};

namespace detail {

// Dormand-Prince 5(4) tableau.
inline constexpr double kC2 = 1.0 / 5.0, kC3 = 3.0 / 10.0, kC4 = 4.0 / 5.0,
                        kC5 = 8.0 / 9.0;
inline constexpr double kA21 = 1.0 / 5.0;
inline constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
inline constexpr double kA41 = 44.0 / 45.0, kA42 = -56.0 / 15.0, kA43 = 32.0 / 9.0;
inline constexpr double kA51 = 19372.0 / 6561.0, kA52 = -25360.0 / 2187.0,
                        kA53 = 64448.0 / 6561.0, kA54 = -212.0 / 729.0;
inline constexpr double kA61 = 9017.0 / 3168.0, kA62 = -355.0 / 33.0,
                        kA63 = 46732.0 / 5247.0, kA64 = 49.0 / 176.0,
                        kA65 = -5103.0 / 18656.0;
// fifth order weights (also the a7j row, making the pair FSAL)
inline constexpr double kB1 = 35.0 / 384.0, kB3 = 500.0 / 1113.0, kB4 = 125.0 / 192.0,
                        kB5 = -2187.0 / 6784.0, kB6 = 11.0 / 84.0;
// difference between the 5th and the embedded 4th order weights
inline constexpr double kE1 = 71.0 / 57600.0, kE3 = -71.0 / 16695.0,
                        kE4 = 71.0 / 1920.0, kE5 = -17253.0 / 339200.0,
                        kE6 = 22.0 / 525.0, kE7 = -1.0 / 40.0;

inline double scaled_rms(const VectorC& v, const VectorC& ref0, const VectorC& ref1,
                         double atol, double rtol) {
    const auto n = v.size();
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double sc = atol + rtol * std::max(std::abs(ref0[i]), std::abs(ref1[i]));
        const double r = std::abs(v[i]) / sc;
        acc += r * r;
    }
    return std::sqrt(acc / double(n));
}

// Hairer's starting step size heuristic.
template <class F>
double initial_step(F& f, double t0, const VectorC& y0, const VectorC& f0,
                    double atol, double rtol, double span) {
    const double d0 = scaled_rms(y0, y0, y0, atol, rtol);
    const double d1 = scaled_rms(f0, y0, y0, atol, rtol);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * (d0 / d1);
    h0 = std::min(h0, span);
    VectorC y1 = y0 + h0 * f0;
    VectorC f1 = f(t0 + h0, y1);
    const double d2 = scaled_rms(f1 - f0, y0, y0, atol, rtol) / h0;
    double h1;
    const double dm = std::max(d1, d2);
    if (dm <= 1e-15) {
        h1 = std::max(1e-6, h0 * 1e-3);
    } else {
        h1 = std::pow(0.01 / dm, 0.2);
    }
    return std::min({100.0 * h0, h1, span});
}

} // namespace detail

// Adaptive Dormand-Prince 5(4) with FSAL and PI step-size control.
// Integrates y' = f(t, y) across the strictly increasing t_grid, calling
// observe(i, t_grid[i], y) at every grid point including the first. Steps are
// clipped to land exactly on grid points. Throws PropagationError when the
// step size underflows, the error estimate stops being finite, or max_steps
// is exhausted.
template <class F, class Obs>
void integrate_ode(F&& f, VectorC y, const std::vector<double>& t_grid,
                   const OdeOptions& opt, Obs&& observe) {
    opt.validate();
    if (t_grid.size() < 2) throw std::invalid_argument("integrate_ode: need at least 2 grid points");
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        if (!(t_grid[i] > t_grid[i - 1]))
            throw std::invalid_argument("integrate_ode: t_grid must be strictly increasing");
    }

    const double span = t_grid.back() - t_grid.front();
    const double hmax = opt.max_step > 0.0 ? std::min(opt.max_step, span) : span;

    double t = t_grid.front();
    VectorC k1 = f(t, y);
    double h = std::min(detail::initial_step(f, t, y, k1, opt.atol, opt.rtol, span), hmax);

    observe(std::size_t{0}, t, y);

    VectorC k2, k3, k4, k5, k6, k7, ytmp, y5, err;
    double errold = 1e-4;
    bool rejected = false;
    std::int64_t steps = 0;

    for (std::size_t seg = 1; seg < t_grid.size(); ++seg) {
        const double t_end = t_grid[seg];
        while (t < t_end) {
            if (++steps > opt.max_steps)
                throw PropagationError(t, "step budget exhausted");
            h = std::min(h, hmax);
            // clip onto the grid point but remember the step the controller wanted
            const bool clipped = t + h >= t_end;
            const double h_try = clipped ? t_end - t : h;
            if (h_try <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t)))
                throw PropagationError(t, "step size underflow");

            using namespace detail;
            ytmp = y + h_try * (kA21 * k1);
            k2 = f(t + kC2 * h_try, ytmp);
            ytmp = y + h_try * (kA31 * k1 + kA32 * k2);
            k3 = f(t + kC3 * h_try, ytmp);
            ytmp = y + h_try * (kA41 * k1 + kA42 * k2 + kA43 * k3);
            k4 = f(t + kC4 * h_try, ytmp);
            ytmp = y + h_try * (kA51 * k1 + kA52 * k2 + kA53 * k3 + kA54 * k4);
            k5 = f(t + kC5 * h_try, ytmp);
            ytmp = y + h_try * (kA61 * k1 + kA62 * k2 + kA63 * k3 + kA64 * k4 + kA65 * k5);
            k6 = f(t + h_try, ytmp);
            y5 = y + h_try * (kB1 * k1 + kB3 * k3 + kB4 * k4 + kB5 * k5 + kB6 * k6);
            k7 = f(t + h_try, y5);
            err = h_try * (kE1 * k1 + kE3 * k3 + kE4 * k4 + kE5 * k5 + kE6 * k6 + kE7 * k7);

            double errnorm = scaled_rms(err, y, y5, opt.atol, opt.rtol);
            if (opt.error_per_unit_step) errnorm /= h_try;
            if (!std::isfinite(errnorm)) {
                // poison in the stages; retry with a much smaller step
                h = h_try * 0.25;
                rejected = true;
                continue;
            }
            // per-unit-step control sees a 4th order quantity, per-step a 5th
            const double expo = opt.error_per_unit_step ? 0.25 : 0.2;
            if (errnorm <= 1.0) {
                t = clipped ? t_end : t + h_try;
                y.swap(y5);
                k1.swap(k7);
                double fac = 0.9 * std::pow(errnorm, -0.85 * expo) * std::pow(errold, 0.04);
                fac = std::clamp(fac, 0.2, rejected ? 1.0 : 5.0);
                // a clipped step says nothing about the controller's choice
                if (!clipped) h = h_try * fac;
                errold = std::max(errnorm, 1e-4);
                rejected = false;
            } else {
                h = h_try * std::clamp(0.9 * std::pow(errnorm, -expo), 0.1, 0.9);
                rejected = true;
            }
        }
        observe(seg, t_end, y);
    }
}

} // namespace gcsdyn
