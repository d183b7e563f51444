#pragma once

// Physical models: US76 atmosphere, inverse-square gravity, drag, solid /
// liquid propulsion, and the point-mass translational equations of motion.
// These serve both as the truth model and as the linearization oracle of
// the optimization stack.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ascent/constants.hpp"

namespace ascent {

using Vec3 = Eigen::Vector3d;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat3 = Eigen::Matrix3d;

// ============================================================
// Domain types
// ============================================================

/// Point-mass vehicle state in Earth-centered inertial axes.
struct EciState {
    Vec3 r = Vec3::Zero(); // m
    Vec3 v = Vec3::Zero(); // m/s
    double m = 0.0;        // kg

    Vec7 pack() const {
        Vec7 x;
        x << r, v, m;
        return x;
    }
    static EciState unpack(const Vec7& x) {
        EciState s;
        s.r = x.segment<3>(0);
        s.v = x.segment<3>(3);
        s.m = x(6);
        return s;
    }
    bool valid() const {
        return m > 0.0 && r.allFinite() && v.allFinite() && std::isfinite(m) &&
               r.norm() > 0.0;
    }
};

struct ProfileSample {
    double t;      // s since stage ignition
    double thrust; // N (vacuum)
    double mdot;   // kg/s
};

/// Tabulated vacuum thrust / mass-flow laws of a solid motor.
/// Beyond burn_time both are zero.
struct ThrustProfile {
    std::vector<ProfileSample> samples;
    double burn_time = 0.0;

    bool empty() const { return samples.empty(); }

    void validate() const {
        if (samples.empty()) return;
        if (samples.front().t != 0.0)
            throw std::invalid_argument("thrust profile must start at t = 0");
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (samples[i].thrust < 0.0 || samples[i].mdot < 0.0)
                throw std::invalid_argument("thrust profile entries must be nonnegative");
            if (i > 0 && samples[i].t <= samples[i - 1].t)
                throw std::invalid_argument("thrust profile times must be strictly increasing");
        }
        if (burn_time < samples.back().t)
            throw std::invalid_argument("burn_time shorter than the profile table");
    }

    double vacuum_thrust(double t) const { return interp(t, &ProfileSample::thrust); }
    double mass_flow(double t) const { return interp(t, &ProfileSample::mdot); }

    /// Trapezoidal integral of the vacuum thrust over [0, burn_time].
    double total_impulse() const { return integral(&ProfileSample::thrust); }
    /// Trapezoidal integral of the mass flow over [0, burn_time].
    double total_propellant() const { return integral(&ProfileSample::mdot); }

  private:
    double interp(double t, double ProfileSample::*field) const {
        if (samples.empty() || t < 0.0 || t > burn_time) return 0.0;
        if (t >= samples.back().t) return samples.back().*field;
        auto hi = std::upper_bound(samples.begin(), samples.end(), t,
                                   [](double a, const ProfileSample& s) { return a < s.t; });
        auto lo = hi - 1;
        double f = (t - lo->t) / (hi->t - lo->t);
        return (1.0 - f) * ((*lo).*field) + f * ((*hi).*field);
    }
    double integral(double ProfileSample::*field) const {
        double acc = 0.0;
        for (std::size_t i = 1; i < samples.size(); ++i)
            acc += 0.5 * (samples[i].*field + samples[i - 1].*field) *
                   (samples[i].t - samples[i - 1].t);
        // flat tail between last table entry and burn_time
        if (!samples.empty() && burn_time > samples.back().t)
            acc += (samples.back().*field) * (burn_time - samples.back().t);
        return acc;
    }
};

/// One propulsion stage plus the aerodynamic data used while it flies.
struct StageSpec {
    std::string name;
    ThrustProfile profile;        // empty for the liquid stage
    double exit_area = 0.0;       // A_e, m^2
    double dry_mass = 0.0;        // kg
    double ref_surface = 0.0;     // S, m^2
    double drag_coeff = 0.0;      // C_D
    double constant_thrust = 0.0; // N, liquid stage only
    double constant_mdot = 0.0;   // kg/s, liquid stage only

    bool is_liquid() const { return profile.empty() && constant_thrust > 0.0; }

    double vacuum_thrust(double t) const {
        return is_liquid() ? constant_thrust : profile.vacuum_thrust(t);
    }
    double mass_flow(double t) const {
        return is_liquid() ? constant_mdot : profile.mass_flow(t);
    }

    void validate() const {
        if (exit_area < 0.0) throw std::invalid_argument(name + ": A_e must be >= 0");
        if (dry_mass <= 0.0) throw std::invalid_argument(name + ": dry_mass must be > 0");
        if (ref_surface <= 0.0) throw std::invalid_argument(name + ": S must be > 0");
        if (drag_coeff < 0.0) throw std::invalid_argument(name + ": C_D must be >= 0");
        profile.validate();
    }
};

struct VehicleConfig {
    std::vector<StageSpec> stages;
    double fairing_mass = 0.0;
    double m0 = 0.0; // total mass at third-stage ignition

    void validate() const {
        if (fairing_mass <= 0.0) throw std::invalid_argument("fairing_mass must be > 0");
        if (m0 <= 0.0) throw std::invalid_argument("m0 must be > 0");
        double dry = fairing_mass;
        for (const auto& s : stages) s.validate();
        if (stages.size() < 2) throw std::invalid_argument("need at least SRM + liquid stage");
        // masses downstream of third-stage ignition must fit inside m0
        dry += stages[stages.size() - 2].dry_mass + stages.back().dry_mass;
        if (m0 <= dry)
            throw std::invalid_argument("m0 does not exceed downstream dry masses");
    }

    const StageSpec& srm3() const { return stages[stages.size() - 2]; }
    const StageSpec& liquid() const { return stages.back(); }
};

struct AtmosphereSample {
    double rho = 0.0; // kg/m^3
    double p = 0.0;   // Pa
};

/// Altitude gradients of the atmosphere, per meter of geometric altitude.
struct AtmosphereGradient {
    double drho_dh = 0.0;
    double dp_dh = 0.0;
};

// ============================================================
// US Standard Atmosphere 1976
// ============================================================

namespace us76 {

inline constexpr double kG0 = 9.80665;        // m/s^2
inline constexpr double kRAir = 287.0530;     // J/(kg K), R*/M0
inline constexpr double kGeoRadius = 6356766; // m, geopotential conversion radius
inline constexpr int kLayers = 7;

// geopotential base altitude (m'), lapse rate (K/m')
inline constexpr std::array<double, kLayers + 1> kBaseH = {
    0.0, 11000.0, 20000.0, 32000.0, 47000.0, 51000.0, 71000.0, 84852.0};
inline constexpr std::array<double, kLayers> kLapse = {
    -0.0065, 0.0, 0.0010, 0.0028, 0.0, -0.0028, -0.0020};

struct LayerTable {
    std::array<double, kLayers> baseT{};
    std::array<double, kLayers> baseP{};
};

inline const LayerTable& layer_table() {
    static const LayerTable table = [] {
        LayerTable t;
        t.baseT[0] = 288.15;
        t.baseP[0] = 101325.0;
        for (int i = 1; i < kLayers; ++i) {
            double dh = kBaseH[i] - kBaseH[i - 1];
            double L = kLapse[i - 1];
            t.baseT[i] = t.baseT[i - 1] + L * dh;
            if (L == 0.0)
                t.baseP[i] = t.baseP[i - 1] * std::exp(-kG0 * dh / (kRAir * t.baseT[i - 1]));
            else
                t.baseP[i] = t.baseP[i - 1] *
                             std::pow(t.baseT[i - 1] / t.baseT[i], kG0 / (kRAir * L));
        }
        return t;
    }();
    return table;
}

inline double geopotential(double z) { return kGeoRadius * z / (kGeoRadius + z); }

/// Temperature and pressure at geopotential altitude within the table span.
inline void eval_layers(double h, double& T, double& p, double& lapse) {
    const auto& tab = layer_table();
    int i = kLayers - 1;
    while (i > 0 && h < kBaseH[i]) --i;
    double L = kLapse[i];
    double dh = h - kBaseH[i];
    if (L == 0.0) {
        T = tab.baseT[i];
        p = tab.baseP[i] * std::exp(-kG0 * dh / (kRAir * T));
    } else {
        T = tab.baseT[i] + L * dh;
        p = tab.baseP[i] * std::pow(tab.baseT[i] / T, kG0 / (kRAir * L));
    }
    lapse = L;
}

/// Geometric altitude of the 86 km model top.
inline double top_altitude() {
    return kGeoRadius * kBaseH[kLayers] / (kGeoRadius - kBaseH[kLayers]);
}

struct TopAnchor {
    double z86, rho86, p86, Hrho, Hp;
};

inline const TopAnchor& top_anchor() {
    static const TopAnchor a = [] {
        TopAnchor t;
        t.z86 = top_altitude();
        double T, p, L;
        eval_layers(kBaseH[kLayers], T, p, L);
        t.p86 = p;
        t.rho86 = p / (kRAir * T);
        // scale heights from the local log-derivatives just below the top,
        // keeping value and slope continuous across the 86 km seam
        double dhdz = kGeoRadius / (kGeoRadius + t.z86);
        dhdz *= dhdz;
        double dp_dh = -kG0 * p / (kRAir * T);
        double drho_dh = t.rho86 * (-kG0 / (kRAir * T) - L / T);
        t.Hp = -t.p86 / (dp_dh * dhdz);
        t.Hrho = -t.rho86 / (drho_dh * dhdz);
        return t;
    }();
    return a;
}

} // namespace us76

/// US76 density and pressure at geometric altitude (m). Total function:
/// altitudes below -500 m are clamped, altitudes above 86 km follow a
/// smooth exponential extension with a vacuum asymptote.
inline AtmosphereSample atmosphere(double altitude) {
    double z = std::max(altitude, -500.0);
    const auto& top = us76::top_anchor();
    if (z >= top.z86) {
        AtmosphereSample s;
        // hard vacuum once the exponentials underflow any physical meaning
        double xp = (z - top.z86) / top.Hp;
        double xr = (z - top.z86) / top.Hrho;
        s.p = xp > 100.0 ? 0.0 : top.p86 * std::exp(-xp);
        s.rho = xr > 100.0 ? 0.0 : top.rho86 * std::exp(-xr);
        return s;
    }
    double T, p, L;
    us76::eval_layers(us76::geopotential(z), T, p, L);
    return {p / (us76::kRAir * T), p};
}

/// Analytic d(rho)/dh and dp/dh at geometric altitude (m). Hydrostatic
/// within each US76 layer, chain-ruled through the geopotential map.
inline AtmosphereGradient atmosphere_gradient(double altitude) {
    double z = std::max(altitude, -500.0);
    const auto& top = us76::top_anchor();
    AtmosphereGradient g;
    if (z >= top.z86) {
        AtmosphereSample s = atmosphere(z);
        g.dp_dh = -s.p / top.Hp;
        g.drho_dh = -s.rho / top.Hrho;
        return g;
    }
    double T, p, L;
    double h = us76::geopotential(z);
    us76::eval_layers(h, T, p, L);
    double rho = p / (us76::kRAir * T);
    double dhdz = us76::kGeoRadius / (us76::kGeoRadius + z);
    dhdz *= dhdz;
    g.dp_dh = -us76::kG0 * p / (us76::kRAir * T) * dhdz;
    g.drho_dh = rho * (-us76::kG0 / (us76::kRAir * T) - L / T) * dhdz;
    return g;
}

// ============================================================
// Force models
// ============================================================

/// Inverse-square gravity, -mu r / |r|^3.
inline Vec3 gravity_accel(const Vec3& r) {
    double rn = r.norm();
    if (rn <= 0.0) throw std::domain_error("gravity_accel: |r| = 0");
    return -kMu / (rn * rn * rn) * r;
}

/// d(gravity)/dr, the symmetric gravity-gradient matrix.
inline Mat3 gravity_gradient(const Vec3& r) {
    double rn = r.norm();
    if (rn <= 0.0) throw std::domain_error("gravity_gradient: |r| = 0");
    double r3 = rn * rn * rn;
    double r5 = r3 * rn * rn;
    return kMu * (3.0 / r5 * (r * r.transpose()) - Mat3::Identity() / r3);
}

inline Vec3 earth_omega_vec() { return Vec3(0.0, 0.0, kEarthOmega); }

/// Velocity relative to the co-rotating atmosphere, v - omega_E x r.
inline Vec3 relative_velocity(const Vec3& r, const Vec3& v) {
    return v - earth_omega_vec().cross(r);
}

/// Drag acceleration -0.5 rho |v_rel| S C_D v_rel / m.
inline Vec3 drag_accel(const EciState& state, const AtmosphereSample& sample,
                       const StageSpec& stage) {
    Vec3 vrel = relative_velocity(state.r, state.v);
    double vn = vrel.norm();
    if (vn == 0.0 || sample.rho == 0.0) return Vec3::Zero();
    return -0.5 * sample.rho * vn * stage.ref_surface * stage.drag_coeff / state.m * vrel;
}

/// Net thrust at time t under ambient pressure p, floored at zero.
inline double net_thrust(double t, double p, const StageSpec& stage) {
    return std::max(stage.vacuum_thrust(t) - p * stage.exit_area, 0.0);
}

/// Free-stream heat flux 0.5 rho |v_rel|^3, W/m^2.
inline double heat_flux(const Vec3& r, const Vec3& v, const AtmosphereSample& sample) {
    double vn = relative_velocity(r, v).norm();
    return 0.5 * sample.rho * vn * vn * vn;
}

/// Test hooks for switching force contributions off.
struct ForceModel {
    bool gravity = true;
    bool drag = true;
};

/// Equations of motion. thrust_dir must be a unit vector when propelled;
/// t is measured from the ignition of `stage`.
inline Vec7 dynamics_rhs(const EciState& state, const Vec3& thrust_dir, double t,
                         const StageSpec& stage, bool propelled,
                         const ForceModel& model = {}) {
    if (state.m <= 0.0) throw std::domain_error("dynamics_rhs: nonpositive mass");
    double alt = state.r.norm() - kEarthRadius;
    AtmosphereSample atm = atmosphere(alt);

    Vec3 accel = Vec3::Zero();
    if (model.gravity) accel += gravity_accel(state.r);
    if (model.drag) accel += drag_accel(state, atm, stage);

    double mdot = 0.0;
    if (propelled) {
        double thrust = net_thrust(t, atm.p, stage);
        accel += thrust / state.m * thrust_dir;
        mdot = stage.mass_flow(t);
    }

    Vec7 dx;
    dx << state.v, accel, -mdot;
    return dx;
}

} // namespace ascent
