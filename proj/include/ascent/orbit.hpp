#pragma once

// Small osculating-orbit helpers used for verification and reporting.

#include "ascent/vehicle.hpp"

namespace ascent {

struct OrbitElements {
    double a;   // semi-major axis, m
    double e;   // eccentricity
    double inc; // inclination, rad
};

inline double specific_energy(const Vec3& r, const Vec3& v) {
    return 0.5 * v.squaredNorm() - kMu / r.norm();
}

inline OrbitElements orbit_elements(const Vec3& r, const Vec3& v) {
    OrbitElements el{};
    Vec3 h = r.cross(v);
    double energy = specific_energy(r, v);
    el.a = -kMu / (2.0 * energy);
    Vec3 evec = v.cross(h) / kMu - r.normalized();
    el.e = evec.norm();
    el.inc = std::acos(std::clamp(h(2) / h.norm(), -1.0, 1.0));
    return el;
}

inline double latitude_deg(const Vec3& r) {
    return rad2deg(std::asin(std::clamp(r(2) / r.norm(), -1.0, 1.0)));
}

} // namespace ascent
