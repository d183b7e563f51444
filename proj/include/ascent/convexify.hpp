#pragma once

// Builds one convex SOCP subproblem around a reference solution: change of
// variables u = (T/m) That, lossless pointing-cone relaxation, linearized
// dynamics with virtual controls, linearized boundary conditions with
// virtual buffers, linearized heat-flux and thrust-magnitude path rows,
// the neutral-axis velocity linkage, soft trust regions on the free
// coast/insertion durations, and the penalty-augmented cost. Everything is
// nondimensionalized before emission.

#include "ascent/conic.hpp"
#include "ascent/ocp.hpp"
#include "ascent/vehicle.hpp"

namespace ascent {

struct AssemblyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ============================================================
// Scaled trajectories
// ============================================================

/// One phase of a (reference or computed) solution, in scaled units.
struct PhaseTrajectory {
    Eigen::MatrixXd states;   // 7 x n_support
    Eigen::MatrixXd controls; // 3 x n_ctrl, empty when uncontrolled
    Eigen::VectorXd u_norm;   // n_ctrl
    double duration = 0.0;    // scaled

    Vec7 state_col(int j) const { return states.col(j); }
};

/// Scaled multi-phase trajectory; doubles as the SCP reference solution.
struct Trajectory {
    std::vector<PhaseTrajectory> phases;

    Trajectory() = default;
    explicit Trajectory(std::size_t n) : phases(n) {}

    /// elementwise a*this + b*other, used by the reference filter
    static Trajectory affine(double a, const Trajectory& ta, double b, const Trajectory& tb) {
        Trajectory out(ta.phases.size());
        for (std::size_t i = 0; i < ta.phases.size(); ++i) {
            const auto& pa = ta.phases[i];
            const auto& pb = tb.phases[i];
            auto& po = out.phases[i];
            po.states = a * pa.states + b * pb.states;
            if (pa.controls.size() > 0) {
                po.controls = a * pa.controls + b * pb.controls;
                po.u_norm = a * pa.u_norm + b * pb.u_norm;
            }
            po.duration = a * pa.duration + b * pb.duration;
        }
        return out;
    }

    /// max |state difference| over all phases and nodes (scaled units)
    double state_distance(const Trajectory& other) const {
        double d = 0.0;
        for (std::size_t i = 0; i < phases.size(); ++i)
            d = std::max(d, (phases[i].states - other.phases[i].states)
                                .cwiseAbs()
                                .maxCoeff());
        return d;
    }
};

// ============================================================
// Scaled physics evaluation
// ============================================================

/// Scale helpers between SI and the nondimensional optimizer units.
struct ScaledUnits {
    Scales sc;
    Eigen::Matrix<double, 7, 1> state_scale;

    explicit ScaledUnits(const Scales& s) : sc(s) {
        state_scale << s.length, s.length, s.length, s.speed, s.speed, s.speed, s.mass;
    }
    Vec7 scale_state(const Vec7& x_si) const { return x_si.cwiseQuotient(state_scale); }
    Vec7 unscale_state(const Vec7& x_sc) const { return x_sc.cwiseProduct(state_scale); }
    double accel() const { return sc.accel(); }
    double time() const { return sc.time; }
};

/// Change of variables of the pointing control: u = (T/m) dir, u_N = T/m.
inline std::pair<Vec3, double> control_transform(double thrust, double mass, const Vec3& dir) {
    if (mass <= 0.0) throw std::domain_error("control_transform: nonpositive mass");
    return {thrust / mass * dir, thrust / mass};
}

/// A, B, Sigma, c of one collocation node (Taylor expansion of the scaled
/// control-affine dynamics, premultiplied by the reference duration).
struct LinearizedNode {
    Eigen::Matrix<double, 7, 7> A;
    Eigen::Matrix<double, 7, 3> B;
    Vec7 Sigma;
    Vec7 c;
};

namespace scaled {

/// Deceleration cap applied when linearizing drag about transient SCP
/// iterates (never active at physically sensible reference points).
inline constexpr double kDragLinearizationCap = 300.0; // m/s^2

/// Drift f-tilde of the scaled control-affine dynamics (no control term)
/// and, optionally, its state Jacobian. tau is phase-normalized time.
/// With `safeguard` the drag contribution is magnitude-capped so that
/// wild intermediate references cannot produce unbounded Jacobians.
inline Vec7 drift(const OcpInstance& ocp, const OcpPhase& ph, const Vec7& x_sc, double tau,
                  Eigen::Matrix<double, 7, 7>* jac = nullptr, bool safeguard = false) {
    ScaledUnits u(ocp.scales);
    Vec7 x_si = u.unscale_state(x_sc);
    Vec3 r = x_si.segment<3>(0);
    Vec3 v = x_si.segment<3>(3);
    double m = x_si(6);
    if (m <= 0.0) throw AssemblyError("reference mass is nonpositive");
    // transient SCP iterates may dip below the surface; the atmosphere is
    // clamped there so the linearization stays total (callers report it)
    double alt = std::max(r.norm() - kEarthRadius, -500.0);

    const StageSpec& stage = ocp.vehicle.stages[ph.stage];
    AtmosphereSample atm = atmosphere(alt);

    Vec3 vrel = relative_velocity(r, v);
    double vn = vrel.norm();
    double k = 0.5 * stage.ref_surface * stage.drag_coeff;

    double drag_gain = 1.0;
    if (safeguard && vn > 1e-12) {
        double amag = k * atm.rho * vn * vn / m;
        if (amag > kDragLinearizationCap) drag_gain = kDragLinearizationCap / amag;
    }

    Vec3 accel = gravity_accel(r);
    if (vn > 1e-12 && atm.rho > 0.0) accel -= drag_gain * k * atm.rho * vn / m * vrel;

    double mdot = 0.0;
    if (ph.controlled) {
        double t_abs = ph.t_start + (ph.duration.fixed ? ph.duration.value : 0.0) * tau;
        mdot = stage.mass_flow(t_abs);
    }

    Vec7 f_si;
    f_si << v, accel, -mdot;

    if (jac) {
        Eigen::Matrix<double, 7, 7> J = Eigen::Matrix<double, 7, 7>::Zero();
        J.block<3, 3>(0, 3).setIdentity();
        Mat3 dadr = gravity_gradient(r);
        Mat3 dadv = Mat3::Zero();
        Vec3 dadm = Vec3::Zero();
        if (vn > 1e-12 && atm.rho > 0.0) {
            AtmosphereGradient grad = atmosphere_gradient(alt);
            Vec3 rhat = r.normalized();
            Mat3 M = vn * Mat3::Identity() + vrel * vrel.transpose() / vn;
            Mat3 Omega;
            Omega << 0, -kEarthOmega, 0, kEarthOmega, 0, 0, 0, 0, 0;
            dadr += -drag_gain * (k / m) *
                    (grad.drho_dh * (vn * vrel) * rhat.transpose() - atm.rho * M * Omega);
            dadv = -drag_gain * (k * atm.rho / m) * M;
            dadm = drag_gain * (k * atm.rho * vn / (m * m)) * vrel;
        }
        J.block<3, 3>(3, 0) = dadr;
        J.block<3, 3>(3, 3) = dadv;
        J.block<3, 1>(3, 6) = dadm;
        // scale: J_sc(i,j) = T * J_si(i,j) * S_j / S_i
        ScaledUnits su(ocp.scales);
        for (int i = 0; i < 7; ++i)
            for (int j = 0; j < 7; ++j)
                (*jac)(i, j) = su.time() * J(i, j) * su.state_scale(j) / su.state_scale(i);
    }

    ScaledUnits su(ocp.scales);
    Vec7 f_sc;
    f_sc = su.time() * f_si.cwiseQuotient(su.state_scale);
    return f_sc;
}

/// Full scaled control-affine right-hand side f = f_tilde + B u.
inline Vec7 rhs(const OcpInstance& ocp, const OcpPhase& ph, const Vec7& x_sc, const Vec3& u_sc,
                double tau) {
    Vec7 f = drift(ocp, ph, x_sc, tau);
    if (ph.controlled) f.segment<3>(3) += u_sc;
    return f;
}

} // namespace scaled

/// Linearized thrust-magnitude path row, scaled:
///   u_N + m_coeff * m + r_coeff . r = rhs
/// from u_N = ((T_vac - p A_e)/m̄)(2 - m/m̄) - (A_e/m̄)(dp/dr).(r - r̄).
struct ThrustAccelRow {
    double m_coeff = 0.0;
    Vec3 r_coeff = Vec3::Zero();
    double rhs = 0.0;
};

inline ThrustAccelRow linearize_thrust_accel(const StageSpec& stage, const Vec7& x_ref_si,
                                             double t_abs, const ScaledUnits& su) {
    double m_ref = x_ref_si(6);
    Vec3 r_ref = x_ref_si.segment<3>(0);
    double alt = std::max(r_ref.norm() - kEarthRadius, -500.0);
    AtmosphereSample atm = atmosphere(alt);
    AtmosphereGradient grad = atmosphere_gradient(alt);
    double tnet = stage.vacuum_thrust(t_abs) - atm.p * stage.exit_area;
    Vec3 rhat = r_ref.normalized();
    const double Aacc = su.accel();

    ThrustAccelRow row;
    row.m_coeff = tnet / (m_ref * m_ref) * su.sc.mass / Aacc;
    row.r_coeff = stage.exit_area / m_ref * grad.dp_dh * rhat * su.sc.length / Aacc;
    row.rhs = (2.0 * tnet / m_ref +
               stage.exit_area / m_ref * grad.dp_dh * rhat.dot(r_ref)) /
              Aacc;
    return row;
}

/// Linearized, normalized heat-flux row, scaled:
///   r_coeff . r + v_coeff . v <= rhs + delta_Q
struct HeatFluxRow {
    Vec3 r_coeff = Vec3::Zero();
    Vec3 v_coeff = Vec3::Zero();
    double rhs = 0.0;
    double flux_ref = 0.0; // Qdot at the reference, W/m^2
};

inline HeatFluxRow linearize_heat_flux(const Vec7& x_ref_si, double Qdot_max,
                                       const ScaledUnits& su) {
    Vec3 r = x_ref_si.segment<3>(0), v = x_ref_si.segment<3>(3);
    double alt = r.norm() - kEarthRadius;
    AtmosphereSample atm = atmosphere(alt);
    AtmosphereGradient grad = atmosphere_gradient(alt);
    Vec3 vrel = relative_velocity(r, v);
    double vn = vrel.norm();
    HeatFluxRow row;
    row.flux_ref = 0.5 * atm.rho * vn * vn * vn;
    Vec3 gr = 0.5 * grad.drho_dh * vn * vn * vn * r.normalized() +
              1.5 * atm.rho * vn * earth_omega_vec().cross(vrel);
    Vec3 gv = 1.5 * atm.rho * vn * vrel;
    row.r_coeff = gr * su.sc.length / Qdot_max;
    row.v_coeff = gv * su.sc.speed / Qdot_max;
    row.rhs = 1.0 - (row.flux_ref - gr.dot(r) - gv.dot(v)) / Qdot_max;
    return row;
}

/// Linearization of the time-dilated dynamics x' = s f(x, u, tau) about a
/// reference node, per the successive-convexification recipe.
inline LinearizedNode linearize_dynamics(const OcpInstance& ocp, const OcpPhase& ph,
                                         const Vec7& x_ref, const Vec3& u_ref, double s_ref,
                                         double tau) {
    LinearizedNode node;
    Eigen::Matrix<double, 7, 7> jac;
    Vec7 f = scaled::drift(ocp, ph, x_ref, tau, &jac, /*safeguard=*/true);
    if (ph.controlled) f.segment<3>(3) += u_ref;
    node.A = s_ref * jac;
    node.B.setZero();
    if (ph.controlled) node.B.block<3, 3>(3, 0) = s_ref * Mat3::Identity();
    node.Sigma = f;
    node.c = -(node.A * x_ref + node.B * u_ref);
    return node;
}

// ============================================================
// Decision-variable layout
// ============================================================

struct DecisionLayout {
    std::vector<int> x_off, u_off, q_off; // per phase position
    std::vector<int> n_support, n_ctrl, n_colloc;
    int s_off = 0;
    std::vector<int> delta_idx; // per phase position, -1 if none
    int w_off = 0, n_w = 0;
    int tq_off = 0, tw_off = 0;
    int dq_idx = -1; // heat-flux slack
    int n_vars = 0;
    int n_phases = 0;

    int xi(int ph, int node, int comp = 0) const { return x_off[ph] + 7 * node + comp; }
    int ui(int ph, int k, int comp = 0) const { return u_off[ph] + 4 * k + comp; }
    int uNi(int ph, int k) const { return u_off[ph] + 4 * k + 3; }
    int qi(int ph, int k, int comp = 0) const { return q_off[ph] + 7 * k + comp; }
    int tqi(int ph, int k, int comp = 0) const {
        return tq_off + (q_off[ph] - q_off[0]) + 7 * k + comp;
    }
    int si(int ph) const { return s_off + ph; }
    int wi(int k) const { return w_off + k; }
    int twi(int k) const { return tw_off + k; }

    static DecisionLayout build(const OcpInstance& ocp) {
        DecisionLayout L;
        L.n_phases = static_cast<int>(ocp.phases.size());
        int at = 0;
        for (const auto& ph : ocp.phases) {
            L.x_off.push_back(at);
            L.n_support.push_back(ph.n_support());
            L.n_colloc.push_back(ph.n_colloc());
            at += 7 * ph.n_support();
        }
        for (const auto& ph : ocp.phases) {
            L.u_off.push_back(at);
            L.n_ctrl.push_back(ph.n_ctrl());
            at += 4 * ph.n_ctrl();
        }
        for (const auto& ph : ocp.phases) {
            L.q_off.push_back(at);
            at += 7 * ph.n_colloc();
        }
        L.s_off = at;
        at += L.n_phases;
        for (const auto& ph : ocp.phases) {
            bool trust = !ph.duration.fixed &&
                         (ph.mission_index == 6 || ph.mission_index == 7);
            L.delta_idx.push_back(trust ? at++ : -1);
        }
        // buffered boundary rows: 4 terminal + (radius, z) per return phase
        L.n_w = 0;
        if (ocp.terminal_position() >= 0 &&
            ocp.find(7) != nullptr) L.n_w += 4;
        for (const auto& ph : ocp.phases)
            if (ph.kind == PhaseKind::BallisticReturn) L.n_w += 2;
        L.w_off = at;
        at += L.n_w;
        L.tq_off = at;
        for (const auto& ph : ocp.phases) at += 7 * ph.n_colloc();
        L.tw_off = at;
        at += L.n_w;
        if (ocp.heat_relax) L.dq_idx = at++;
        L.n_vars = at;
        return L;
    }
};

/// Penalty weights of the augmented cost.
struct ConvexifyWeights {
    double lambda_q = 1e4;
    double lambda_w = 1e4;
    double lambda_delta = 1e-4;
    double lambda_Q = 1e-2;
    double trust_fraction = 0.05;   // delta_max as a fraction of the reference duration
    double rate_limit_floor = 1e-9; // lower bound on reference u_N in scaled units
};

struct AssembledProblem {
    ConicProblemIR ir;
    DecisionLayout layout;
    int subsurface_ref_nodes = 0; // reference nodes below the -500 m clamp
};

// ============================================================
// Assembly
// ============================================================

namespace detail {

class RowBuilder {
  public:
    void coeff(int row, int col, double v) {
        // scaled problem: anything below 1e-14 is numerical dust
        if (std::abs(v) > 1e-14) trips_.emplace_back(row, col, v);
    }
    int add_row(double rhs) {
        rhs_.push_back(rhs);
        return static_cast<int>(rhs_.size()) - 1;
    }
    void finalize(std::vector<Eigen::Triplet<double>>& trips, Eigen::VectorXd& rhs) {
        trips = std::move(trips_);
        rhs = Eigen::Map<Eigen::VectorXd>(rhs_.data(), static_cast<long>(rhs_.size()));
    }
    int rows() const { return static_cast<int>(rhs_.size()); }

  private:
    std::vector<Eigen::Triplet<double>> trips_;
    std::vector<double> rhs_;
};

/// phase-normalized tau of every collocation node, and of every control node
inline std::vector<double> colloc_taus(const PhaseMesh& mesh) {
    std::vector<double> taus;
    for (int k = 0; k < mesh.segments(); ++k) {
        const auto& ops = segment_operators(mesh.orders[k]);
        double lo = mesh.boundaries[k], hi = mesh.boundaries[k + 1];
        for (int i = 0; i < ops.p; ++i)
            taus.push_back(lo + 0.5 * (ops.colloc(i) + 1.0) * (hi - lo));
    }
    return taus;
}

} // namespace detail

/// Assembles the convex subproblem for `ocp` linearized about `ref`.
inline AssembledProblem assemble_subproblem(const OcpInstance& ocp, const Trajectory& ref,
                                            const ConvexifyWeights& wts = {}) {
    if (ref.phases.size() != ocp.phases.size())
        throw AssemblyError("reference does not match the phase list");
    const DecisionLayout L = DecisionLayout::build(ocp);
    const ScaledUnits su(ocp.scales);
    const double Aacc = su.accel();

    AssembledProblem out;
    out.layout = L;
    ConicProblemIR& ir = out.ir;
    ir.init(L.n_vars);

    detail::RowBuilder eq, ineq;

    // ---- cost ----
    {
        int term = ocp.terminal_position();
        if (term < 0) throw AssemblyError("no terminal ascent phase in instance");
        ir.cost(L.xi(term, L.n_support[term] - 1, 6)) = -1.0; // maximize final mass
        for (int ph = 0; ph < L.n_phases; ++ph)
            for (int k = 0; k < L.n_colloc[ph]; ++k)
                for (int c = 0; c < 7; ++c) ir.cost(L.tqi(ph, k, c)) = wts.lambda_q;
        for (int k = 0; k < L.n_w; ++k) ir.cost(L.twi(k)) = wts.lambda_w;
        for (int ph = 0; ph < L.n_phases; ++ph)
            if (L.delta_idx[ph] >= 0) ir.cost(L.delta_idx[ph]) = wts.lambda_delta;
        if (L.dq_idx >= 0) ir.cost(L.dq_idx) = wts.lambda_Q;
    }

    // ---- initial condition ----
    {
        Vec7 x0 = su.scale_state(ocp.x0.pack());
        for (int c = 0; c < 7; ++c) {
            int row = eq.add_row(x0(c));
            eq.coeff(row, L.xi(0, 0, c), 1.0);
        }
    }

    // ---- durations ----
    for (int ph = 0; ph < L.n_phases; ++ph) {
        const auto& dur = ocp.phases[ph].duration;
        if (dur.fixed) {
            int row = eq.add_row(dur.value / su.time());
            eq.coeff(row, L.si(ph), 1.0);
        } else {
            ir.lb(L.si(ph)) = dur.lo / su.time();
            ir.ub(L.si(ph)) = dur.hi / su.time();
        }
    }

    // ---- collocation with virtual controls ----
    for (int ph = 0; ph < L.n_phases; ++ph) {
        const OcpPhase& phase = ocp.phases[ph];
        const PhaseTrajectory& rp = ref.phases[ph];
        auto taus = detail::colloc_taus(phase.mesh);
        int base = 0;  // support-node offset of the segment
        int cidx = 0;  // collocation counter within the phase
        for (int k = 0; k < phase.mesh.segments(); ++k) {
            const auto& ops = segment_operators(phase.mesh.orders[k]);
            double half = 0.5 * (phase.mesh.boundaries[k + 1] - phase.mesh.boundaries[k]);
            for (int i = 0; i < ops.p; ++i, ++cidx) {
                Vec3 u_ref = Vec3::Zero();
                if (phase.controlled) u_ref = rp.controls.col(cidx);
                if (rp.state_col(base + i).segment<3>(0).norm() * su.sc.length <
                    kEarthRadius - 500.0)
                    ++out.subsurface_ref_nodes;
                LinearizedNode lin = linearize_dynamics(ocp, phase, rp.state_col(base + i),
                                                        u_ref, rp.duration, taus[cidx]);
                for (int c = 0; c < 7; ++c) {
                    int row = eq.add_row(half * lin.c(c));
                    for (int j = 0; j <= ops.p; ++j)
                        if (j != i) eq.coeff(row, L.xi(ph, base + j, c), ops.diff(i, j));
                    // the collocated node merges its differentiation weight
                    // with the Jacobian block
                    for (int c2 = 0; c2 < 7; ++c2)
                        eq.coeff(row, L.xi(ph, base + i, c2),
                                 -half * lin.A(c, c2) + (c2 == c ? ops.diff(i, i) : 0.0));
                    if (phase.controlled)
                        for (int c2 = 0; c2 < 3; ++c2)
                            eq.coeff(row, L.ui(ph, cidx, c2), -half * lin.B(c, c2));
                    eq.coeff(row, L.si(ph), -half * lin.Sigma(c));
                    eq.coeff(row, L.qi(ph, cidx, c), -half);
                }
            }
            base += ops.p;
        }
    }

    // ---- pointing cone, thrust-magnitude path rows, rate rows ----
    for (int ph = 0; ph < L.n_phases; ++ph) {
        const OcpPhase& phase = ocp.phases[ph];
        if (!phase.controlled) continue;
        const PhaseTrajectory& rp = ref.phases[ph];
        const StageSpec& stage = ocp.vehicle.stages[phase.stage];
        auto taus = detail::colloc_taus(phase.mesh);

        for (int k = 0; k < L.n_ctrl[ph]; ++k) {
            // relaxed pointing constraint ||u|| <= u_N
            ir.cones.push_back({{L.uNi(ph, k), L.ui(ph, k, 0), L.ui(ph, k, 1), L.ui(ph, k, 2)}});

            // u_N tied to (T_vac - p A_e)/m, linearized about the reference
            // (support node k is the collocation node k within the phase)
            int node = k;
            Vec7 xr = su.unscale_state(rp.state_col(node));
            double t_abs = phase.t_start +
                           (phase.duration.fixed ? phase.duration.value : 0.0) * taus[k];
            ThrustAccelRow tr = linearize_thrust_accel(stage, xr, t_abs, su);
            int row = eq.add_row(tr.rhs);
            eq.coeff(row, L.uNi(ph, k), 1.0);
            eq.coeff(row, L.xi(ph, node, 6), tr.m_coeff);
            for (int c = 0; c < 3; ++c) eq.coeff(row, L.xi(ph, node, c), tr.r_coeff(c));
        }

        // control rate rows across consecutive control nodes (phase 3 only)
        if (phase.rate_limited) {
            double s_si = phase.duration.fixed ? phase.duration.value
                                               : rp.duration * su.time();
            for (int k = 0; k + 1 < L.n_ctrl[ph]; ++k) {
                double uN_a = std::max(rp.u_norm(k), wts.rate_limit_floor);
                double uN_b = std::max(rp.u_norm(k + 1), wts.rate_limit_floor);
                double dt = s_si * (taus[k + 1] - taus[k]);
                double bound = ocp.mission.rate_limit * dt;
                for (int c = 0; c < 3; ++c) {
                    int row = ineq.add_row(bound);
                    ineq.coeff(row, L.ui(ph, k + 1, c), 1.0 / uN_b);
                    ineq.coeff(row, L.ui(ph, k, c), -1.0 / uN_a);
                    row = ineq.add_row(bound);
                    ineq.coeff(row, L.ui(ph, k + 1, c), -1.0 / uN_b);
                    ineq.coeff(row, L.ui(ph, k, c), 1.0 / uN_a);
                }
            }
        }
    }

    // ---- heat flux rows (phases 2..7), optionally relaxed ----
    for (int ph = 0; ph < L.n_phases; ++ph) {
        const OcpPhase& phase = ocp.phases[ph];
        if (phase.mission_index < 2 || phase.mission_index > 7) continue;
        const PhaseTrajectory& rp = ref.phases[ph];
        for (int k = 0; k < L.n_colloc[ph]; ++k) {
            Vec7 xr = su.unscale_state(rp.state_col(k));
            HeatFluxRow hf = linearize_heat_flux(xr, ocp.mission.Qdot_max, su);
            // vacuum nodes produce a vacuously satisfied row; skip it
            if (hf.r_coeff.cwiseAbs().maxCoeff() < 1e-14 &&
                hf.v_coeff.cwiseAbs().maxCoeff() < 1e-14)
                continue;
            int row = ineq.add_row(hf.rhs);
            for (int c = 0; c < 3; ++c) {
                ineq.coeff(row, L.xi(ph, k, c), hf.r_coeff(c));
                ineq.coeff(row, L.xi(ph, k, 3 + c), hf.v_coeff(c));
            }
            if (L.dq_idx >= 0) ineq.coeff(row, L.dq_idx, -1.0);
        }
    }

    // ---- linkage and boundary rows ----
    {
        const TargetInvariants tgt = targets(ocp.mission);
        const double Ls = su.sc.length, Vs = su.sc.speed;
        const double a_s = tgt.a_des / Ls, v_s = tgt.v_des / Vs;
        const double hz_s = tgt.h_z_des / (Ls * Vs), zR_s = tgt.z_R_des / Ls;

        // chronological continuity with mass drops
        int prev = -1;
        for (int idx = 1; idx <= 7; ++idx) {
            int ph = ocp.position(idx);
            if (ph < 0) continue;
            if (prev >= 0) {
                int pl = L.n_support[prev] - 1;
                for (int c = 0; c < 6; ++c) {
                    int row = eq.add_row(0.0);
                    eq.coeff(row, L.xi(ph, 0, c), 1.0);
                    eq.coeff(row, L.xi(prev, pl, c), -1.0);
                }
                double drop = 0.0;
                if (idx == 2) drop = ocp.vehicle.fairing_mass / su.sc.mass;
                if (idx == 4) drop = ocp.vehicle.srm3().dry_mass / su.sc.mass;
                int row = eq.add_row(-drop);
                eq.coeff(row, L.xi(ph, 0, 6), 1.0);
                eq.coeff(row, L.xi(prev, pl, 6), -1.0);
            }
            prev = ph;
        }

        // return phases attach to the Phase-3 burnout state
        int ph3 = ocp.position(3);
        for (int idx : {8, 9}) {
            int ph = ocp.position(idx);
            if (ph < 0) continue;
            if (ph3 < 0) throw AssemblyError("return phase without phase 3 in instance");
            int p3l = L.n_support[ph3] - 1;
            for (int c = 0; c < 3; ++c) {
                int row = eq.add_row(0.0);
                eq.coeff(row, L.xi(ph, 0, c), 1.0);
                eq.coeff(row, L.xi(ph3, p3l, c), -1.0);
            }
            if (idx == 8) {
                for (int c = 0; c < 3; ++c) {
                    int row = eq.add_row(0.0);
                    eq.coeff(row, L.xi(ph, 0, 3 + c), 1.0);
                    eq.coeff(row, L.xi(ph3, p3l, 3 + c), -1.0);
                }
            } else {
                // v0(9) = vf(3) + (dV/uN_ref) u(tf3), re-linearized each pass;
                // the burnout control is the last collocated one (the phase-3
                // rate limit holds the attitude across the remaining span)
                int kend = L.n_ctrl[ph3] - 1;
                double uN_ref = ref.phases[ph3].u_norm(kend);
                if (uN_ref <= 1e-9)
                    throw AssemblyError("degenerate reference: u_N at phase-3 end is zero");
                double dv_s = ocp.mission.dV_NA / Vs;
                for (int c = 0; c < 3; ++c) {
                    int row = eq.add_row(0.0);
                    eq.coeff(row, L.xi(ph, 0, 3 + c), 1.0);
                    eq.coeff(row, L.xi(ph3, p3l, 3 + c), -1.0);
                    eq.coeff(row, L.ui(ph3, kend, c), -dv_s / uN_ref);
                }
            }
            int row = eq.add_row(ocp.vehicle.srm3().dry_mass / su.sc.mass);
            eq.coeff(row, L.xi(ph, 0, 6), 1.0);
        }

        // buffered boundary rows chi = w
        int wk = 0;
        int term = ocp.position(7);
        if (term >= 0) {
            int tl = L.n_support[term] - 1;
            Vec7 xr = ref.phases[term].state_col(tl);
            Vec3 rb = xr.segment<3>(0), vb = xr.segment<3>(3);

            int row = eq.add_row(a_s * a_s + rb.squaredNorm());
            for (int c = 0; c < 3; ++c) eq.coeff(row, L.xi(term, tl, c), 2.0 * rb(c));
            eq.coeff(row, L.wi(wk), -1.0);
            ++wk;

            row = eq.add_row(v_s * v_s + vb.squaredNorm());
            for (int c = 0; c < 3; ++c) eq.coeff(row, L.xi(term, tl, 3 + c), 2.0 * vb(c));
            eq.coeff(row, L.wi(wk), -1.0);
            ++wk;

            row = eq.add_row(rb.dot(vb));
            for (int c = 0; c < 3; ++c) {
                eq.coeff(row, L.xi(term, tl, c), vb(c));
                eq.coeff(row, L.xi(term, tl, 3 + c), rb(c));
            }
            eq.coeff(row, L.wi(wk), -1.0);
            ++wk;

            row = eq.add_row(hz_s + vb(1) * rb(0) - vb(0) * rb(1));
            eq.coeff(row, L.xi(term, tl, 0), vb(1));
            eq.coeff(row, L.xi(term, tl, 1), -vb(0));
            eq.coeff(row, L.xi(term, tl, 3), -rb(1));
            eq.coeff(row, L.xi(term, tl, 4), rb(0));
            eq.coeff(row, L.wi(wk), -1.0);
            ++wk;
        }
        for (int idx : {8, 9}) {
            int ph = ocp.position(idx);
            if (ph < 0) continue;
            int pl = L.n_support[ph] - 1;
            Vec3 rb = ref.phases[ph].state_col(pl).segment<3>(0);
            int row = eq.add_row(1.0 + rb.squaredNorm()); // R_E^2 scaled = 1
            for (int c = 0; c < 3; ++c) eq.coeff(row, L.xi(ph, pl, c), 2.0 * rb(c));
            eq.coeff(row, L.wi(wk), -1.0);
            ++wk;

            row = eq.add_row(zR_s);
            eq.coeff(row, L.xi(ph, pl, 2), 1.0);
            eq.coeff(row, L.wi(wk), -1.0);
            ++wk;
        }
        if (wk != L.n_w) throw AssemblyError("buffer count mismatch");
    }

    // ---- trust regions on free coast/insertion durations ----
    for (int ph = 0; ph < L.n_phases; ++ph) {
        int d = L.delta_idx[ph];
        if (d < 0) continue;
        double s_ref = ref.phases[ph].duration;
        ir.lb(d) = 0.0;
        ir.ub(d) = wts.trust_fraction * s_ref;
        int row = ineq.add_row(s_ref); // s - delta <= s_ref
        ineq.coeff(row, L.si(ph), 1.0);
        ineq.coeff(row, d, -1.0);
        row = ineq.add_row(-s_ref); // -s - delta <= -s_ref
        ineq.coeff(row, L.si(ph), -1.0);
        ineq.coeff(row, d, -1.0);
    }

    // ---- 1-norm epigraphs for q and w ----
    for (int ph = 0; ph < L.n_phases; ++ph) {
        for (int k = 0; k < L.n_colloc[ph]; ++k)
            for (int c = 0; c < 7; ++c) {
                int row = ineq.add_row(0.0);
                ineq.coeff(row, L.qi(ph, k, c), 1.0);
                ineq.coeff(row, L.tqi(ph, k, c), -1.0);
                row = ineq.add_row(0.0);
                ineq.coeff(row, L.qi(ph, k, c), -1.0);
                ineq.coeff(row, L.tqi(ph, k, c), -1.0);
            }
    }
    for (int k = 0; k < L.n_w; ++k) {
        int row = ineq.add_row(0.0);
        ineq.coeff(row, L.wi(k), 1.0);
        ineq.coeff(row, L.twi(k), -1.0);
        row = ineq.add_row(0.0);
        ineq.coeff(row, L.wi(k), -1.0);
        ineq.coeff(row, L.twi(k), -1.0);
    }
    if (L.dq_idx >= 0) ir.lb(L.dq_idx) = 0.0;

    eq.finalize(ir.eq, ir.eq_rhs);
    ineq.finalize(ir.ineq, ir.ineq_rhs);
    return out;
}

// ============================================================
// Solution extraction
// ============================================================

struct SubproblemSolution {
    Trajectory traj;    // scaled
    double objective = 0.0;
    double final_mass_scaled = 0.0;
    double max_q = 0.0;      // largest virtual-control magnitude
    double max_w = 0.0;      // largest virtual-buffer magnitude
    double heat_slack = 0.0; // delta_Qdot
};

/// Embeds a trajectory into a full decision vector (virtual variables at
/// zero); used by tests to probe row residuals at the reference point.
inline Eigen::VectorXd embed_reference(const OcpInstance& ocp, const DecisionLayout& L,
                                       const Trajectory& ref) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(L.n_vars);
    for (std::size_t ph = 0; ph < ocp.phases.size(); ++ph) {
        const auto& tp = ref.phases[ph];
        for (int j = 0; j < L.n_support[static_cast<int>(ph)]; ++j)
            for (int c = 0; c < 7; ++c) x(L.xi(static_cast<int>(ph), j, c)) = tp.states(c, j);
        for (int k = 0; k < L.n_ctrl[static_cast<int>(ph)]; ++k) {
            for (int c = 0; c < 3; ++c) x(L.ui(static_cast<int>(ph), k, c)) = tp.controls(c, k);
            x(L.uNi(static_cast<int>(ph), k)) = tp.u_norm(k);
        }
        x(L.si(static_cast<int>(ph))) = tp.duration;
    }
    return x;
}

inline SubproblemSolution extract_solution(const OcpInstance& ocp, const DecisionLayout& L,
                                           const Eigen::VectorXd& primal, double objective) {
    SubproblemSolution sol;
    sol.objective = objective;
    sol.traj = Trajectory(ocp.phases.size());
    for (int ph = 0; ph < L.n_phases; ++ph) {
        auto& tp = sol.traj.phases[ph];
        tp.states.resize(7, L.n_support[ph]);
        for (int j = 0; j < L.n_support[ph]; ++j)
            for (int c = 0; c < 7; ++c) tp.states(c, j) = primal(L.xi(ph, j, c));
        if (L.n_ctrl[ph] > 0) {
            tp.controls.resize(3, L.n_ctrl[ph]);
            tp.u_norm.resize(L.n_ctrl[ph]);
            for (int k = 0; k < L.n_ctrl[ph]; ++k) {
                for (int c = 0; c < 3; ++c) tp.controls(c, k) = primal(L.ui(ph, k, c));
                tp.u_norm(k) = primal(L.uNi(ph, k));
            }
        }
        tp.duration = primal(L.si(ph));
        for (int k = 0; k < L.n_colloc[ph]; ++k)
            for (int c = 0; c < 7; ++c)
                sol.max_q = std::max(sol.max_q, std::abs(primal(L.qi(ph, k, c))));
    }
    int term = ocp.terminal_position();
    sol.final_mass_scaled = primal(L.xi(term, L.n_support[term] - 1, 6));
    for (int k = 0; k < L.n_w; ++k)
        sol.max_w = std::max(sol.max_w, std::abs(primal(L.wi(k))));
    if (L.dq_idx >= 0) sol.heat_slack = primal(L.dq_idx);
    return sol;
}

} // namespace ascent
