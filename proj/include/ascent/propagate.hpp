#pragma once

// Deterministic truth propagation: embedded Dormand-Prince 4(5) with
// adaptive step control and bisection-localized impact events.

#include <functional>
#include <optional>
#include <string>

#include "ascent/vehicle.hpp"

namespace ascent {

/// Thrust direction as a function of time (unit vector). Ignored for
/// unpropelled arcs.
using DirectionLaw = std::function<Vec3(double)>;

struct PropagateOptions {
    double rel_tol = 1e-11;
    double abs_tol_pos = 1e-4;  // m
    double abs_tol_vel = 1e-7;  // m/s
    double abs_tol_mass = 1e-7; // kg
    double max_step = 60.0;     // s
    double min_step = 1e-12;    // s, underflow guard
    double event_tol = 1e-3;    // s, impact bisection width
};

struct PropagateResult {
    EciState state;
    double t = 0.0;
    bool ok = false;
    bool event = false; // terminated at |r| = impact radius
    std::size_t steps = 0;
    std::string error;
};

namespace detail {

struct DormandPrince {
    // clang-format off
    static constexpr double c2 = 1.0/5, c3 = 3.0/10, c4 = 4.0/5, c5 = 8.0/9;
    static constexpr double a21 = 1.0/5;
    static constexpr double a31 = 3.0/40, a32 = 9.0/40;
    static constexpr double a41 = 44.0/45, a42 = -56.0/15, a43 = 32.0/9;
    static constexpr double a51 = 19372.0/6561, a52 = -25360.0/2187,
                            a53 = 64448.0/6561, a54 = -212.0/729;
    static constexpr double a61 = 9017.0/3168, a62 = -355.0/33, a63 = 46732.0/5247,
                            a64 = 49.0/176, a65 = -5103.0/18656;
    static constexpr double b1 = 35.0/384, b3 = 500.0/1113, b4 = 125.0/192,
                            b5 = -2187.0/6784, b6 = 11.0/84;
    static constexpr double e1 = 35.0/384 - 5179.0/57600, e3 = 500.0/1113 - 7571.0/16695,
                            e4 = 125.0/192 - 393.0/640, e5 = -2187.0/6784 + 92097.0/339200,
                            e6 = 11.0/84 - 187.0/2100, e7 = -1.0/40;
    // clang-format on
};

} // namespace detail

/// Integrates dynamics_rhs from t0 to tf. If impact_radius is set, the
/// integration terminates where |r| falls to that radius, localized to
/// opt.event_tol seconds by bisection on the bracketing step.
inline PropagateResult propagate(const EciState& x0, const DirectionLaw& direction,
                                 double t0, double tf, const StageSpec& stage,
                                 bool propelled, const PropagateOptions& opt = {},
                                 std::optional<double> impact_radius = std::nullopt,
                                 const ForceModel& model = {}) {
    using DP = detail::DormandPrince;
    PropagateResult out;
    if (tf < t0) {
        out.error = "propagate: tf < t0";
        return out;
    }

    auto rhs = [&](double t, const Vec7& y) -> Vec7 {
        EciState s = EciState::unpack(y);
        Vec3 dir = propelled ? Vec3(direction(t)) : Vec3::Zero();
        return dynamics_rhs(s, dir, t, stage, propelled, model);
    };

    Vec7 y = x0.pack();
    double t = t0;

    if (impact_radius && x0.r.norm() <= *impact_radius) {
        out.state = x0;
        out.t = t0;
        out.ok = out.event = true;
        return out;
    }
    if (tf == t0) {
        out.state = x0;
        out.t = t0;
        out.ok = true;
        return out;
    }

    Vec7 scale;
    auto error_norm = [&](const Vec7& ya, const Vec7& yb, const Vec7& err) {
        double acc = 0.0;
        for (int i = 0; i < 7; ++i) {
            double atol = i < 3 ? opt.abs_tol_pos : (i < 6 ? opt.abs_tol_vel : opt.abs_tol_mass);
            double sc = atol + opt.rel_tol * std::max(std::abs(ya(i)), std::abs(yb(i)));
            acc += (err(i) / sc) * (err(i) / sc);
        }
        return std::sqrt(acc / 7.0);
    };

    // one trial Dormand-Prince step; returns the error norm estimate
    auto dp_step = [&](double tc, const Vec7& yc, double h, Vec7& ynext, Vec7& k1_io,
                       bool have_k1) -> double {
        Vec7 k1 = have_k1 ? k1_io : rhs(tc, yc);
        Vec7 k2 = rhs(tc + DP::c2 * h, yc + h * (DP::a21 * k1));
        Vec7 k3 = rhs(tc + DP::c3 * h, yc + h * (DP::a31 * k1 + DP::a32 * k2));
        Vec7 k4 = rhs(tc + DP::c4 * h, yc + h * (DP::a41 * k1 + DP::a42 * k2 + DP::a43 * k3));
        Vec7 k5 = rhs(tc + DP::c5 * h,
                      yc + h * (DP::a51 * k1 + DP::a52 * k2 + DP::a53 * k3 + DP::a54 * k4));
        Vec7 k6 = rhs(tc + h, yc + h * (DP::a61 * k1 + DP::a62 * k2 + DP::a63 * k3 +
                                        DP::a64 * k4 + DP::a65 * k5));
        ynext = yc + h * (DP::b1 * k1 + DP::b3 * k3 + DP::b4 * k4 + DP::b5 * k5 + DP::b6 * k6);
        Vec7 k7 = rhs(tc + h, ynext); // FSAL
        Vec7 err = h * (DP::e1 * k1 + DP::e3 * k3 + DP::e4 * k4 + DP::e5 * k5 +
                        DP::e6 * k6 + DP::e7 * k7);
        k1_io = k7;
        return error_norm(yc, ynext, err);
    };

    double h = std::min(opt.max_step, (tf - t0) / 10.0);
    if (h <= 0.0) h = opt.max_step;
    Vec7 k_first = rhs(t, y);
    bool have_first = true;

    while (t < tf) {
        h = std::min(h, tf - t);
        Vec7 ynext;
        Vec7 kio = k_first;
        double err = dp_step(t, y, h, ynext, kio, have_first);
        if (err > 1.0) {
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
            if (h < opt.min_step) {
                out.error = "propagate: step size underflow at t = " + std::to_string(t);
                out.state = EciState::unpack(y);
                out.t = t;
                return out;
            }
            continue;
        }
        ++out.steps;

        if (impact_radius) {
            double rn = ynext.segment<3>(0).norm();
            if (rn <= *impact_radius) {
                // bisect the crossing inside [t, t+h]
                double lo = 0.0, hi = h;
                Vec7 yhit = ynext;
                while (hi - lo > opt.event_tol) {
                    double mid = 0.5 * (lo + hi);
                    Vec7 ym;
                    Vec7 kd = Vec7::Zero();
                    dp_step(t, y, mid, ym, kd, false);
                    if (ym.segment<3>(0).norm() <= *impact_radius) {
                        hi = mid;
                        yhit = ym;
                    } else {
                        lo = mid;
                    }
                }
                out.state = EciState::unpack(yhit);
                out.t = t + hi;
                out.ok = out.event = true;
                return out;
            }
        }

        t += h;
        y = ynext;
        k_first = kio;
        have_first = true;
        h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-10), -0.2)));
        h = std::min(h, opt.max_step);
    }

    out.state = EciState::unpack(y);
    out.t = t;
    out.ok = true;
    return out;
}

} // namespace ascent
