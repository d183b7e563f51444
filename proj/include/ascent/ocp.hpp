#pragma once

// Concrete optimal-control-problem instances: the phase list actually
// transcribed for one solve. Produced from the mission description for the
// offline nominal problem, for each receding-horizon MPC cycle, and for
// the reduced payload-estimation problem.

#include "ascent/lgr.hpp"
#include "ascent/mission.hpp"

namespace ascent {

struct OcpPhase {
    int mission_index = 0;
    PhaseKind kind = PhaseKind::Coast;
    int stage = 0;
    bool controlled = false;
    bool rate_limited = false;
    double t_start = 0.0; // absolute s since ignition (SRM table lookup)
    DurationSpec duration; // SI
    PhaseMesh mesh;

    int n_colloc() const { return mesh.colloc_count(); }
    int n_support() const { return mesh.support_count(); }
    int n_ctrl() const { return controlled ? n_colloc() : 0; }
};

struct OcpInstance {
    std::vector<OcpPhase> phases;
    EciState x0;         // SI measured/assigned initial state
    MissionSpec mission; // targets, weights source
    VehicleConfig vehicle;
    bool multi_return = false;
    bool heat_relax = false; // relaxed heat-flux row (MPC cycles only)
    Scales scales;

    const OcpPhase* find(int mission_index) const {
        for (const auto& ph : phases)
            if (ph.mission_index == mission_index) return &ph;
        return nullptr;
    }
    int position(int mission_index) const {
        for (std::size_t i = 0; i < phases.size(); ++i)
            if (phases[i].mission_index == mission_index) return static_cast<int>(i);
        return -1;
    }
    /// index of the last chronological phase (payload release)
    int terminal_position() const {
        int pos = -1, best = 0;
        for (std::size_t i = 0; i < phases.size(); ++i)
            if (phases[i].mission_index <= 7 && phases[i].mission_index >= best) {
                best = phases[i].mission_index;
                pos = static_cast<int>(i);
            }
        return pos;
    }
};

namespace detail {

inline OcpPhase make_phase(const PhaseSpec& spec, const VehicleConfig& vehicle,
                           bool multi_return) {
    OcpPhase ph;
    ph.mission_index = spec.index;
    ph.kind = spec.kind;
    ph.stage = spec.stage;
    ph.controlled = spec.controlled();
    ph.rate_limited = spec.rate_limited && multi_return;
    ph.duration = spec.duration;
    ph.mesh = mission_phase_mesh(spec.index);
    if (spec.stage < 0 || spec.stage >= static_cast<int>(vehicle.stages.size()))
        throw std::invalid_argument("phase references missing stage");
    return ph;
}

inline void chain_start_times(std::vector<OcpPhase>& phases, double t0) {
    double t = t0;
    double t3_end = t0;
    for (auto& ph : phases) {
        if (ph.mission_index <= 7) {
            ph.t_start = t;
            if (ph.duration.fixed) t += ph.duration.value;
            if (ph.mission_index == 3) t3_end = t;
        }
    }
    for (auto& ph : phases)
        if (ph.mission_index >= 8) ph.t_start = t3_end;
}

} // namespace detail

/// Full offline problem: all active phases from the assigned ignition state.
inline OcpInstance build_nominal_ocp(const MissionSpec& mission, const VehicleConfig& vehicle) {
    OcpInstance ocp;
    ocp.mission = mission;
    ocp.vehicle = vehicle;
    ocp.multi_return = mission.multi_return();
    ocp.heat_relax = false;
    ocp.scales = Scales::for_mass(vehicle.m0);
    for (const auto& spec : mission.active_phases())
        ocp.phases.push_back(detail::make_phase(spec, vehicle, ocp.multi_return));
    detail::chain_start_times(ocp.phases, 0.0);
    ocp.x0 = initial_eci_state(mission, vehicle.m0);
    return ocp;
}

/// Receding-horizon problem at cycle time t_now: elapsed phases dropped,
/// the active phase trimmed to its remaining span and its mesh shrunk
/// proportionally, initial condition fixed to the measured state.
inline OcpInstance build_mpc_ocp(const MissionSpec& mission, const VehicleConfig& vehicle,
                                 double t_now, const EciState& measured) {
    OcpInstance ocp;
    ocp.mission = mission;
    ocp.vehicle = vehicle;
    ocp.multi_return = mission.multi_return();
    ocp.heat_relax = true;
    ocp.scales = Scales::for_mass(vehicle.m0);

    // fixed phase-boundary schedule of the powered flight
    double t = 0.0;
    for (const auto& spec : mission.active_phases()) {
        double t_end = t + (spec.duration.fixed ? spec.duration.value : 0.0);
        bool elapsed = spec.index <= 3 && t_end <= t_now + 1e-12;
        if (!elapsed) {
            OcpPhase ph = detail::make_phase(spec, vehicle, ocp.multi_return);
            if (spec.index <= 3 && t_now > t) {
                // active phase: keep only the remaining span
                double full = spec.duration.value;
                double remaining = t_end - t_now;
                ph.duration = DurationSpec::fixed_s(remaining);
                ph.mesh = shrink_mesh(ph.mesh, remaining / full);
                ph.t_start = t_now;
            }
            ocp.phases.push_back(ph);
        }
        if (spec.index <= 7) t = t_end;
    }
    double tcur = t_now;
    double t3_end = 110.0;
    for (auto& ph : ocp.phases) {
        if (ph.mission_index <= 7) {
            ph.t_start = tcur;
            if (ph.duration.fixed) tcur += ph.duration.value;
            if (ph.mission_index == 3) t3_end = tcur;
        }
    }
    for (auto& ph : ocp.phases)
        if (ph.mission_index >= 8) ph.t_start = t3_end;

    ocp.x0 = measured;
    return ocp;
}

/// Reduced ascent problem (Phases 4..7) used for post-episode payload
/// estimation; the initial state is the separated composite.
inline OcpInstance build_payload_ocp(const MissionSpec& mission, const VehicleConfig& vehicle,
                                     const EciState& burnout) {
    OcpInstance ocp;
    ocp.mission = mission;
    ocp.vehicle = vehicle;
    ocp.multi_return = false;
    ocp.heat_relax = false;
    ocp.scales = Scales::for_mass(vehicle.m0);
    for (const auto& spec : mission.active_phases()) {
        if (spec.index < 4 || spec.index > 7) continue;
        ocp.phases.push_back(detail::make_phase(spec, vehicle, false));
    }
    detail::chain_start_times(ocp.phases, 0.0);
    ocp.x0 = burnout;
    ocp.x0.m = burnout.m - vehicle.srm3().dry_mass;
    if (ocp.x0.m <= 0.0) throw std::invalid_argument("burnout mass below stage dry mass");
    return ocp;
}

} // namespace ascent
