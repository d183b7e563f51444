#pragma once

#include <cmath>

namespace ascent {

// Earth model (point mass, rotating atmosphere)
inline constexpr double kMu = 3.986004418e14;       // m^3/s^2
inline constexpr double kEarthRadius = 6378137.0;   // m
inline constexpr double kEarthOmega = 7.2921159e-5; // rad/s, about +z
inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg2rad(double d) { return d * kPi / 180.0; }
inline constexpr double rad2deg(double r) { return r * 180.0 / kPi; }

/// Nondimensionalization scales for the optimization stack.
/// Lengths by R_E, speeds by circular speed at R_E, times by their ratio,
/// mass by the vehicle mass at third-stage ignition.
struct Scales {
    double length = kEarthRadius;
    double speed = std::sqrt(kMu / kEarthRadius);
    double time = kEarthRadius / std::sqrt(kMu / kEarthRadius);
    double mass = 1.0;

    double accel() const { return speed / time; }
    double mdot() const { return mass / time; }

    static Scales for_mass(double m0) {
        Scales s;
        s.mass = m0;
        return s;
    }
};

} // namespace ascent
