#pragma once

// Declarative description of the nine-phase ascent-plus-return optimal
// control problem: phase roles, targets, and the nonlinear boundary /
// linkage residual evaluators used for verification.

#include <optional>
#include <vector>

#include "ascent/vehicle.hpp"

namespace ascent {

enum class PhaseKind { SrmPropelled, LiquidPropelled, Coast, BallisticReturn };
enum class GuidanceAlgorithm { SingleReturn, MultiReturn };

struct DurationSpec {
    bool fixed = true;
    double value = 0.0; // fixed duration, s
    double lo = 0.0;    // bounds when free
    double hi = 0.0;

    static DurationSpec fixed_s(double v) { return {true, v, v, v}; }
    static DurationSpec free_s(double lo, double hi) { return {false, 0.0, lo, hi}; }
};

struct PhaseSpec {
    int index = 0; // 1..9
    PhaseKind kind = PhaseKind::Coast;
    int stage = 0; // index into VehicleConfig::stages (aero source for coasts)
    DurationSpec duration;
    bool rate_limited = false; // phase 3 in multi-return mode

    bool controlled() const {
        return kind == PhaseKind::SrmPropelled || kind == PhaseKind::LiquidPropelled;
    }
    bool propelled() const { return controlled(); }
};

/// Representative third-stage ignition conditions (the mission file marks
/// them as assumptions). Heading follows from the target inclination.
struct IgnitionState {
    double altitude = 0.0;          // m
    double speed = 0.0;             // m/s inertial
    double flight_path_angle = 0.0; // rad above local horizontal
    double latitude = 0.0;          // rad
};

struct MissionSpec {
    double a_des = 0.0;     // m
    double i_des = 0.0;     // rad
    double phi_R_des = 0.0; // rad
    double dV_NA = 0.0;     // m/s
    double Qdot_max = 0.0;  // W/m^2, OCP threshold
    double Qdot_hard = 0.0; // W/m^2, simulation ceiling
    double rate_limit = deg2rad(1.5); // rad/s, phase-3 control rate bound
    GuidanceAlgorithm algorithm = GuidanceAlgorithm::MultiReturn;
    IgnitionState ignition;
    std::vector<PhaseSpec> phases; // all nine, chronological then returns

    bool multi_return() const { return algorithm == GuidanceAlgorithm::MultiReturn; }

    /// Phases participating in the OCP under the selected algorithm:
    /// single-return drops Phase 9 and the Phase-3 rate limit.
    std::vector<PhaseSpec> active_phases() const {
        std::vector<PhaseSpec> out;
        for (const auto& ph : phases) {
            if (!multi_return() && ph.index == 9) continue;
            PhaseSpec p = ph;
            if (!multi_return()) p.rate_limited = false;
            out.push_back(p);
        }
        return out;
    }

    const PhaseSpec& phase(int index) const {
        for (const auto& ph : phases)
            if (ph.index == index) return ph;
        throw std::invalid_argument("mission has no phase " + std::to_string(index));
    }

    void validate() const {
        if (a_des <= kEarthRadius) throw std::invalid_argument("a_des must exceed R_E");
        if (i_des < 0.0 || i_des > kPi) throw std::invalid_argument("i_des out of [0, pi]");
        if (dV_NA <= 0.0) throw std::invalid_argument("dV_NA must be > 0");
        if (Qdot_max > Qdot_hard)
            throw std::invalid_argument("Qdot_max must not exceed Qdot_hard");
        if (phases.size() != 9) throw std::invalid_argument("expected 9 phases");
        for (int i = 0; i < 9; ++i) {
            const auto& ph = phases[i];
            if (ph.index != i + 1) throw std::invalid_argument("phases must be numbered 1..9");
            PhaseKind want;
            if (ph.index <= 3) want = PhaseKind::SrmPropelled;
            else if (ph.index == 4 || ph.index == 6) want = PhaseKind::Coast;
            else if (ph.index == 5 || ph.index == 7) want = PhaseKind::LiquidPropelled;
            else want = PhaseKind::BallisticReturn;
            if (ph.kind != want)
                throw std::invalid_argument("phase " + std::to_string(ph.index) + " has wrong kind");
            if (!ph.duration.fixed && ph.duration.lo >= ph.duration.hi)
                throw std::invalid_argument("phase duration bounds must satisfy lo < hi");
            if (ph.duration.fixed && ph.duration.value <= 0.0)
                throw std::invalid_argument("fixed phase duration must be positive");
        }
    }
};

// ============================================================
// Targets
// ============================================================

/// Derived boundary-condition invariants of the target orbit and return.
struct TargetInvariants {
    double a_des = 0.0;   // m (carried along for the radius condition)
    double v_des = 0.0;   // m/s
    double h_z_des = 0.0; // m^2/s
    double z_R_des = 0.0; // m
};

inline TargetInvariants target_from_orbit(double a_des, double i_des, double phi_R_des) {
    if (a_des <= kEarthRadius) throw std::invalid_argument("a_des must exceed R_E");
    TargetInvariants t;
    t.a_des = a_des;
    t.v_des = std::sqrt(kMu / a_des);
    t.h_z_des = std::cos(i_des) * std::sqrt(kMu * a_des);
    t.z_R_des = kEarthRadius * std::sin(phi_R_des);
    return t;
}

inline TargetInvariants targets(const MissionSpec& m) {
    return target_from_orbit(m.a_des, m.i_des, m.phi_R_des);
}

/// ECI state at third-stage ignition built from the mission's scalar
/// ignition data; the track lies in a meridian plane rotated to the launch
/// azimuth implied by the target inclination.
inline EciState initial_eci_state(const MissionSpec& m, double m0) {
    const auto& ign = m.ignition;
    double rn = kEarthRadius + ign.altitude;
    Vec3 rhat(std::cos(ign.latitude), 0.0, std::sin(ign.latitude));
    Vec3 north(-std::sin(ign.latitude), 0.0, std::cos(ign.latitude));
    Vec3 east(0.0, 1.0, 0.0);
    // cos(i) = cos(lat) sin(az)
    double saz = std::clamp(std::cos(m.i_des) / std::cos(ign.latitude), -1.0, 1.0);
    double az = std::asin(saz);
    Vec3 track = std::cos(az) * north + std::sin(az) * east;
    EciState s;
    s.r = rn * rhat;
    s.v = ign.speed * (std::cos(ign.flight_path_angle) * track +
                       std::sin(ign.flight_path_angle) * rhat);
    s.m = m0;
    return s;
}

// ============================================================
// Residual evaluators (verification side)
// ============================================================

/// Payload-release conditions: radius, speed, radial velocity, and
/// z-angular-momentum residuals of the final Phase-7 state.
inline Eigen::Vector4d terminal_residuals(const EciState& sf, const TargetInvariants& t) {
    Eigen::Vector4d res;
    res(0) = sf.r.squaredNorm() - t.a_des * t.a_des;
    res(1) = sf.v.squaredNorm() - t.v_des * t.v_des;
    res(2) = sf.r.dot(sf.v);
    res(3) = sf.r(0) * sf.v(1) - sf.r(1) * sf.v(0) - t.h_z_des;
    return res;
}

/// Splash-down conditions of the nominal (and, in multi-return mode,
/// perturbed) returns: surface radius and latitude residuals.
inline Eigen::VectorXd splashdown_residuals(const EciState& state_R,
                                            const std::optional<EciState>& state_PR,
                                            const TargetInvariants& t) {
    const double re2 = kEarthRadius * kEarthRadius;
    if (!state_PR) {
        Eigen::VectorXd res(2);
        res(0) = state_R.r.squaredNorm() - re2;
        res(1) = state_R.r(2) - t.z_R_des;
        return res;
    }
    Eigen::VectorXd res(4);
    res(0) = state_R.r.squaredNorm() - re2;
    res(1) = state_PR->r.squaredNorm() - re2;
    res(2) = state_R.r(2) - t.z_R_des;
    res(3) = state_PR->r(2) - t.z_R_des;
    return res;
}

/// Endpoint states of one phase of a candidate solution, plus the terminal
/// control of Phase 3 needed by the velocity-increment linkage.
struct PhaseEndpoints {
    int mission_index = 0;
    Vec7 start = Vec7::Zero();
    Vec7 end = Vec7::Zero();
    Vec3 u_end = Vec3::Zero(); // phase-3 terminal control, (T/m) direction
    double uN_end = 0.0;
};

/// Stacked interface residuals: mass drops at the fairing jettison and the
/// stage separation, position/velocity continuity along the chronological
/// chain, and the return-phase initial conditions including the
/// neutral-axis velocity increment of Phase 9.
inline Eigen::VectorXd linkage_residuals(const std::vector<PhaseEndpoints>& phases,
                                         const MissionSpec& mission,
                                         const VehicleConfig& vehicle) {
    auto find = [&](int idx) -> const PhaseEndpoints* {
        for (const auto& ph : phases)
            if (ph.mission_index == idx) return &ph;
        return nullptr;
    };
    std::vector<double> rows;
    auto push3 = [&](const Eigen::Vector3d& v) {
        rows.push_back(v(0));
        rows.push_back(v(1));
        rows.push_back(v(2));
    };

    // chronological chain
    const PhaseEndpoints* prev = nullptr;
    for (int idx = 1; idx <= 7; ++idx) {
        const auto* ph = find(idx);
        if (!ph) continue;
        if (prev) {
            push3(ph->start.segment<3>(0) - prev->end.segment<3>(0));
            push3(ph->start.segment<3>(3) - prev->end.segment<3>(3));
            double drop = 0.0;
            if (idx == 2) drop = vehicle.fairing_mass;
            if (idx == 4) drop = vehicle.srm3().dry_mass;
            rows.push_back(ph->start(6) - (prev->end(6) - drop));
        }
        prev = ph;
    }

    const auto* ph3 = find(3);
    for (int idx : {8, 9}) {
        const auto* ph = find(idx);
        if (!ph || !ph3) continue;
        push3(ph->start.segment<3>(0) - ph3->end.segment<3>(0));
        if (idx == 8) {
            push3(ph->start.segment<3>(3) - ph3->end.segment<3>(3));
        } else {
            Vec3 dv = mission.dV_NA * ph3->u_end / ph3->uN_end;
            push3(ph->start.segment<3>(3) - (ph3->end.segment<3>(3) + dv));
        }
        rows.push_back(ph->start(6) - vehicle.srm3().dry_mass);
    }

    return Eigen::Map<Eigen::VectorXd>(rows.data(), static_cast<long>(rows.size()));
}

} // namespace ascent
