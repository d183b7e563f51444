#pragma once

// Successive-convexification outer loop: assemble the subproblem, solve it,
// update the reference by filtering, test the three convergence criteria
// (reference change, nonlinear collocation defect, virtual buffers).

#include <functional>
#include <sstream>

#include "ascent/convexify.hpp"
#include "ascent/ipm.hpp"
#include "ascent/orbit.hpp"
#include "ascent/propagate.hpp"

namespace ascent {

struct ScpSettings {
    double eps_tol = 1e-4; // scaled state units, Eq-style strict inequality
    double eps_f = 1e-6;   // dynamics defect and buffer tolerance
    int max_iterations = 50;
    std::array<double, 3> filter_weights{6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0};
    ConvexifyWeights weights;
    ConicTolerances conic;
};

struct ScpIterationRecord {
    int iteration = 0;
    double objective = 0.0;
    double final_mass_kg = 0.0;
    double state_change = 0.0;
    double max_defect = 0.0;
    double max_buffer = 0.0;
    SolveStatus status = SolveStatus::NumericalFailure;
    int solver_iterations = 0;
    double solver_time_s = 0.0;
};

struct ScpTrace {
    std::vector<ScpIterationRecord> rows;

    std::string to_csv() const {
        std::ostringstream os;
        os << "iteration,objective,final_mass_kg,state_change,max_defect,max_buffer,status,"
              "solver_iterations,solver_time_s\n";
        for (const auto& r : rows) {
            os << r.iteration << ',' << r.objective << ',' << r.final_mass_kg << ','
               << r.state_change << ',' << r.max_defect << ',' << r.max_buffer << ','
               << to_string(r.status) << ',' << r.solver_iterations << ',' << r.solver_time_s
               << '\n';
        }
        return os.str();
    }
};

// ============================================================
// Reference filtering (Eq. 51 style weighted history)
// ============================================================

/// history[0] is the initial reference; history[j] the j-th solution.
/// Returns the filtered reference for the next subproblem,
/// sum_k alpha_k x^{max(0, i-k+1)} with i the latest solution index.
inline Trajectory filter_reference(const std::vector<Trajectory>& history,
                                   const std::array<double, 3>& alpha = {6.0 / 11.0, 3.0 / 11.0,
                                                                         2.0 / 11.0}) {
    if (history.size() < 2)
        throw std::invalid_argument("filter_reference needs the initial reference and one solution");
    int latest = static_cast<int>(history.size()) - 1;
    Trajectory out;
    for (int k = 1; k <= 3; ++k) {
        const Trajectory& term = history[std::max(0, latest - k + 1)];
        if (k == 1) out = Trajectory::affine(alpha[0], term, 0.0, term);
        else out = Trajectory::affine(1.0, out, alpha[k - 1], term);
    }
    return out;
}

// ============================================================
// Nonlinear defect (convergence criterion ii)
// ============================================================

/// Max collocation defect of `traj` against the nonlinear scaled dynamics,
/// using the trajectory's own durations.
inline double max_dynamics_defect(const OcpInstance& ocp, const Trajectory& traj) {
    double worst = 0.0;
    for (std::size_t ph = 0; ph < ocp.phases.size(); ++ph) {
        const OcpPhase& phase = ocp.phases[ph];
        const PhaseTrajectory& tp = traj.phases[ph];
        auto taus = detail::colloc_taus(phase.mesh);
        int base = 0, cidx = 0;
        for (int k = 0; k < phase.mesh.segments(); ++k) {
            const auto& ops = segment_operators(phase.mesh.orders[k]);
            double half = 0.5 * (phase.mesh.boundaries[k + 1] - phase.mesh.boundaries[k]);
            for (int i = 0; i < ops.p; ++i, ++cidx) {
                Vec7 dterm = Vec7::Zero();
                for (int j = 0; j <= ops.p; ++j) dterm += ops.diff(i, j) * tp.state_col(base + j);
                Vec3 u = phase.controlled ? Vec3(tp.controls.col(cidx)) : Vec3::Zero();
                Vec7 f = scaled::rhs(ocp, phase, tp.state_col(base + i), u, taus[cidx]);
                Vec7 defect = dterm - half * tp.duration * f;
                worst = std::max(worst, defect.cwiseAbs().maxCoeff());
            }
            base += ops.p;
        }
    }
    return worst;
}

/// Convergence verdict per the three criteria; all inequalities strict.
inline bool check_convergence(const Trajectory& solution, const Trajectory& reference,
                              double max_defect, double max_buffer, const ScpSettings& st) {
    return solution.state_distance(reference) < st.eps_tol && max_defect < st.eps_f &&
           max_buffer < st.eps_f;
}

// ============================================================
// Initial reference construction
// ============================================================

namespace detail {

inline std::vector<double> support_taus(const PhaseMesh& mesh) {
    std::vector<double> taus = colloc_taus(mesh);
    taus.push_back(1.0);
    return taus;
}

/// In-plane pitch program: angle above local horizontal, interpolated
/// linearly from 30 deg at ignition to 0 at SRM burnout.
inline Vec3 pitch_program_dir(const EciState& s, double t_abs, double burn_time) {
    double pitch = deg2rad(30.0) * std::max(0.0, 1.0 - t_abs / burn_time);
    Vec3 rhat = s.r.normalized();
    Vec3 horiz = s.v - s.v.dot(rhat) * rhat;
    Vec3 that = horiz.norm() > 1.0 ? horiz.normalized()
                                   : Vec3(-rhat(2), 0.0, rhat(0)).normalized();
    return std::cos(pitch) * that + std::sin(pitch) * rhat;
}

} // namespace detail

/// Builds the very first reference: states from a propagated constant-pitch
/// ascent (30 deg to 0 over the SRM phases), liquid-stage controls aligned
/// with the velocity, free durations at mid-bounds, return durations from
/// ballistic propagation to impact.
inline Trajectory initial_reference(const OcpInstance& ocp) {
    ScaledUnits su(ocp.scales);
    const double Aacc = su.accel();
    Trajectory ref(ocp.phases.size());

    double srm_burn = 0.0;
    if (const auto* p3 = ocp.find(3)) {
        srm_burn = p3->t_start + p3->duration.value;
    } else {
        srm_burn = 110.0;
    }

    EciState state = ocp.x0;
    EciState state3_end = ocp.x0;
    Vec3 dir3_end = Vec3::UnitX();

    PropagateOptions popt;
    popt.rel_tol = 1e-10;

    auto fill_phase = [&](std::size_t pos, const EciState& start, double dur_si,
                          const std::function<Vec3(double, const EciState&)>& dir_of,
                          bool propelled, bool impact_guard) -> EciState {
        const OcpPhase& phase = ocp.phases[pos];
        PhaseTrajectory& tp = ref.phases[pos];
        auto taus = detail::support_taus(phase.mesh);
        int nsup = phase.n_support();
        tp.states.resize(7, nsup);
        tp.duration = dur_si / su.time();
        if (phase.controlled) {
            tp.controls.resize(3, phase.n_ctrl());
            tp.u_norm.resize(phase.n_ctrl());
        }
        EciState cur = start;
        double t_local = 0.0;
        bool frozen = false;
        const StageSpec& stage = ocp.vehicle.stages[phase.stage];
        for (int j = 0; j < nsup; ++j) {
            double t_target = dur_si * taus[j];
            if (t_target > t_local && !frozen) {
                // propagate on the absolute clock so SRM table lookups see
                // time since stage ignition
                DirectionLaw law = [&](double t) { return dir_of(t, cur); };
                auto res = propagate(cur, law, phase.t_start + t_local,
                                     phase.t_start + t_target, stage, propelled, popt,
                                     impact_guard ? std::optional<double>(kEarthRadius)
                                                  : std::nullopt);
                if (!res.ok && !res.event)
                    throw std::runtime_error("initial reference propagation failed: " + res.error);
                cur = res.state;
                t_local = res.event ? t_target : res.t - phase.t_start;
                if (res.event) frozen = true;
            }
            tp.states.col(j) = su.scale_state(cur.pack());
            if (phase.controlled && j < phase.n_ctrl()) {
                double t_abs = phase.t_start + t_target;
                Vec3 dir = dir_of(t_abs, cur);
                double alt = cur.r.norm() - kEarthRadius;
                // SRM tables are indexed by time since stage ignition, which
                // for phases 1-3 is the absolute mission clock
                double tnet = net_thrust(t_abs, atmosphere(alt).p, stage);
                auto [u, uN] = control_transform(tnet, cur.m, dir);
                tp.controls.col(j) = u / Aacc;
                tp.u_norm(j) = uN / Aacc;
            }
        }
        return cur;
    };

    for (std::size_t pos = 0; pos < ocp.phases.size(); ++pos) {
        const OcpPhase& phase = ocp.phases[pos];
        if (phase.kind == PhaseKind::BallisticReturn) continue;
        double dur = phase.duration.fixed ? phase.duration.value
                                          : 0.5 * (phase.duration.lo + phase.duration.hi);
        std::function<Vec3(double, const EciState&)> dir_of;
        bool propelled = phase.controlled;
        switch (phase.kind) {
            case PhaseKind::SrmPropelled:
                dir_of = [&, srm_burn](double t_abs, const EciState& s) {
                    return detail::pitch_program_dir(s, t_abs, srm_burn);
                };
                break;
            case PhaseKind::LiquidPropelled:
                dir_of = [](double, const EciState& s) { return Vec3(s.v.normalized()); };
                break;
            default:
                dir_of = [](double, const EciState&) { return Vec3::Zero(); };
        }
        EciState end = fill_phase(pos, state, dur, dir_of, propelled, false);
        if (phase.mission_index == 3) {
            state3_end = end;
            dir3_end = detail::pitch_program_dir(end, srm_burn, srm_burn);
        }
        state = end;
        if (phase.mission_index == 1) state.m -= ocp.vehicle.fairing_mass;
        if (phase.mission_index == 3 && ocp.find(4)) {
            // stage separation: composite continues without the spent stage
            state.m = end.m - ocp.vehicle.srm3().dry_mass;
        }
    }

    // ballistic returns from the SRM burnout state
    for (std::size_t pos = 0; pos < ocp.phases.size(); ++pos) {
        const OcpPhase& phase = ocp.phases[pos];
        if (phase.kind != PhaseKind::BallisticReturn) continue;
        EciState start = state3_end;
        start.m = ocp.vehicle.srm3().dry_mass;
        if (phase.mission_index == 9)
            start.v += ocp.mission.dV_NA * dir3_end;

        // pick the duration from a propagated impact, clamped into bounds
        const StageSpec& stage = ocp.vehicle.stages[phase.stage];
        auto res = propagate(start, [](double) { return Vec3::Zero(); }, 0.0,
                             phase.duration.hi, stage, false, popt, kEarthRadius);
        double dur = res.event ? res.t : phase.duration.hi;
        dur = std::clamp(dur, phase.duration.lo, phase.duration.hi);
        auto nodir = [](double, const EciState&) { return Vec3::Zero(); };
        fill_phase(pos, start, dur, nodir, false, true);
    }

    return ref;
}

// ============================================================
// Neutral-direction seed
// ============================================================

/// Finds, by bisection on a ballistic sweep, the in-plane direction along
/// which an extra `dV` leaves the impact latitude unchanged. Used to seed
/// the multi-return reference; the OCP refines it.
inline Vec3 neutral_axis_direction(const EciState& spent_stage, double dV,
                                   const StageSpec& stage) {
    auto impact_lat = [&](const EciState& s0) -> std::optional<double> {
        auto res = propagate(s0, [](double) { return Vec3::Zero(); }, 0.0, 4000.0, stage,
                             false, {}, kEarthRadius);
        if (!res.event) return std::nullopt;
        return latitude_deg(res.state.r);
    };
    auto base = impact_lat(spent_stage);
    if (!base) return spent_stage.v.normalized();

    Vec3 vhat = spent_stage.v.normalized();
    Vec3 hhat = spent_stage.r.cross(spent_stage.v).normalized();
    Vec3 nhat = hhat.cross(vhat);
    auto miss = [&](double th) -> std::optional<double> {
        EciState pert = spent_stage;
        pert.v += dV * (std::cos(th) * vhat + std::sin(th) * nhat);
        auto lat = impact_lat(pert);
        if (!lat) return std::nullopt;
        return *lat - *base;
    };

    double prev_th = 0.0;
    std::optional<double> prev = miss(0.0);
    for (int k = 1; k <= 36; ++k) {
        double th = k * kPi / 18.0;
        auto cur = miss(th);
        if (prev && cur && (*prev) * (*cur) <= 0.0) {
            double lo = prev_th, hi = th;
            for (int it = 0; it < 50; ++it) {
                double mid = 0.5 * (lo + hi);
                auto m = miss(mid);
                if (!m) break;
                if ((*prev) * (*m) <= 0.0) hi = mid;
                else lo = mid;
            }
            double th_star = 0.5 * (lo + hi);
            return std::cos(th_star) * vhat + std::sin(th_star) * nhat;
        }
        prev_th = th;
        prev = cur;
    }
    return vhat;
}

// ============================================================
// Outer loop
// ============================================================

struct ScpResult {
    bool converged = false;
    bool solver_failure = false;
    int iterations = 0;
    Trajectory traj; // scaled
    double objective = 0.0;
    double final_mass_kg = 0.0;
    double max_defect = 0.0;
    double max_buffer = 0.0;
    double heat_slack = 0.0;
    ScpTrace trace;
};

/// Runs the successive-convexification loop to convergence or iteration
/// exhaustion; on exhaustion the best iterate (smallest max(defect, buffer),
/// objective as tie-break) is returned, flagged unconverged.
inline ScpResult solve_ocp(const OcpInstance& ocp, const Trajectory& initial,
                           const ScpSettings& settings = {}) {
    std::vector<Trajectory> history{initial};
    Trajectory ref = initial;

    ScpResult result;
    double best_metric = std::numeric_limits<double>::max();
    double best_obj = std::numeric_limits<double>::max();

    for (int it = 1; it <= settings.max_iterations; ++it) {
        AssembledProblem prob = assemble_subproblem(ocp, ref, settings.weights);
        SolveOutcome outcome = solve(prob.ir, settings.conic);
        if (outcome.status != SolveStatus::Optimal) {
            // one retry with heavier equilibration and regularization
            ipm::Params tweaked;
            tweaked.equil_iters = 8;
            tweaked.static_reg = 1e-7;
            outcome = solve(prob.ir, settings.conic, &tweaked);
        }
        if (outcome.status != SolveStatus::Optimal) {
            ScpIterationRecord rec;
            rec.iteration = it;
            rec.status = outcome.status;
            result.trace.rows.push_back(rec);
            result.solver_failure = true;
            result.iterations = it;
            return result;
        }

        SubproblemSolution sol =
            extract_solution(ocp, prob.layout, outcome.primal, outcome.objective);
        double defect = max_dynamics_defect(ocp, sol.traj);
        double dx = sol.traj.state_distance(ref);

        ScpIterationRecord rec;
        rec.iteration = it;
        rec.objective = outcome.objective;
        rec.final_mass_kg = sol.final_mass_scaled * ocp.scales.mass;
        rec.state_change = dx;
        rec.max_defect = defect;
        rec.max_buffer = sol.max_w;
        rec.status = outcome.status;
        rec.solver_iterations = outcome.iterations;
        rec.solver_time_s = outcome.wall_time_s;
        result.trace.rows.push_back(rec);

        double metric = std::max(defect, sol.max_w);
        if (metric < best_metric || (metric == best_metric && outcome.objective < best_obj)) {
            best_metric = metric;
            best_obj = outcome.objective;
            result.traj = sol.traj;
            result.objective = outcome.objective;
            result.final_mass_kg = rec.final_mass_kg;
            result.max_defect = defect;
            result.max_buffer = sol.max_w;
            result.heat_slack = sol.heat_slack;
        }
        result.iterations = it;

        if (check_convergence(sol.traj, ref, defect, sol.max_w, settings)) {
            result.converged = true;
            result.traj = sol.traj;
            result.objective = outcome.objective;
            result.final_mass_kg = rec.final_mass_kg;
            result.max_defect = defect;
            result.max_buffer = sol.max_w;
            result.heat_slack = sol.heat_slack;
            return result;
        }

        history.push_back(sol.traj);
        ref = filter_reference(history, settings.filter_weights);
    }
    return result;
}

// ============================================================
// Nominal solve pipeline
// ============================================================

/// Multi-return initial reference built from a converged single-return
/// solution: phases 1..8 are copied, the perturbed return is seeded along
/// the numerically-found neutral direction.
inline Trajectory multi_reference_from_single(const OcpInstance& ocp_multi,
                                              const OcpInstance& ocp_single,
                                              const Trajectory& single) {
    ScaledUnits su(ocp_multi.scales);
    Trajectory ref(ocp_multi.phases.size());
    for (std::size_t pos = 0; pos < ocp_multi.phases.size(); ++pos) {
        int idx = ocp_multi.phases[pos].mission_index;
        if (idx != 9) {
            int spos = ocp_single.position(idx);
            if (spos < 0) throw std::invalid_argument("single solution lacks phase");
            ref.phases[pos] = single.phases[spos];
        }
    }

    int p3 = ocp_single.position(3);
    EciState spent = EciState::unpack(
        su.unscale_state(single.phases[p3].state_col(single.phases[p3].states.cols() - 1)));
    spent.m = ocp_multi.vehicle.srm3().dry_mass;
    const StageSpec& stage = ocp_multi.vehicle.stages[ocp_multi.find(9)->stage];
    Vec3 na_dir = neutral_axis_direction(spent, ocp_multi.mission.dV_NA, stage);

    int p9 = ocp_multi.position(9);
    const OcpPhase& phase9 = ocp_multi.phases[p9];
    EciState start = spent;
    start.v += ocp_multi.mission.dV_NA * na_dir;

    PropagateOptions popt;
    popt.rel_tol = 1e-10;
    auto res = propagate(start, [](double) { return Vec3::Zero(); }, 0.0, phase9.duration.hi,
                         stage, false, popt, kEarthRadius);
    double dur = std::clamp(res.event ? res.t : phase9.duration.hi, phase9.duration.lo,
                            phase9.duration.hi);

    PhaseTrajectory& tp = ref.phases[p9];
    tp.states.resize(7, phase9.n_support());
    tp.duration = dur / su.time();
    auto taus = detail::support_taus(phase9.mesh);
    EciState cur = start;
    double t_local = 0.0;
    bool frozen = false;
    for (int j = 0; j < phase9.n_support(); ++j) {
        double t_target = dur * taus[j];
        if (t_target > t_local && !frozen) {
            auto leg = propagate(cur, [](double) { return Vec3::Zero(); }, t_local, t_target,
                                 stage, false, popt, kEarthRadius);
            cur = leg.state;
            t_local = leg.event ? t_target : leg.t;
            if (leg.event) frozen = true;
        }
        tp.states.col(j) = su.scale_state(cur.pack());
    }
    return ref;
}

struct NominalResult {
    OcpInstance ocp;
    ScpResult scp;
};

/// Offline nominal solve. Multi-return missions are warm-started from the
/// corresponding single-return solution, whose burnout state also seeds the
/// neutral-axis direction of the perturbed return.
inline NominalResult solve_nominal(const MissionSpec& mission, const VehicleConfig& vehicle,
                                   const ScpSettings& settings = {}) {
    MissionSpec single = mission;
    single.algorithm = GuidanceAlgorithm::SingleReturn;
    OcpInstance ocp_s = build_nominal_ocp(single, vehicle);
    Trajectory ref_s = initial_reference(ocp_s);
    ScpResult res_s = solve_ocp(ocp_s, ref_s, settings);

    if (!mission.multi_return()) return {std::move(ocp_s), std::move(res_s)};

    OcpInstance ocp_m = build_nominal_ocp(mission, vehicle);
    Trajectory ref_m = multi_reference_from_single(ocp_m, ocp_s, res_s.traj);
    ScpResult res_m = solve_ocp(ocp_m, ref_m, settings);
    return {std::move(ocp_m), std::move(res_m)};
}

} // namespace ascent
