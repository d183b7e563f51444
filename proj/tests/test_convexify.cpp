#include <catch2/catch_amalgamated.hpp>

#include "ascent/config_io.hpp"
#include "ascent/convexify.hpp"
#include "ascent/scp.hpp"

using namespace ascent;
using Catch::Approx;

namespace {

struct Setup {
    VehicleConfig vehicle;
    MissionSpec mission;
    OcpInstance ocp;
    Setup() {
        vehicle = load_vehicle("data/vehicle.json");
        mission = load_mission("data/mission.json");
        ocp = build_nominal_ocp(mission, vehicle);
    }
};

Eigen::VectorXd eq_residual(const ConicProblemIR& ir, const Eigen::VectorXd& x) {
    Eigen::VectorXd r = -ir.eq_rhs;
    for (const auto& t : ir.eq) r(t.row()) += t.value() * x(t.col());
    return r;
}

/// rows of the equality block that touch any variable in [lo, hi)
std::vector<int> rows_touching(const ConicProblemIR& ir, int lo, int hi) {
    std::vector<bool> seen(ir.eq_rhs.size(), false);
    for (const auto& t : ir.eq)
        if (t.col() >= lo && t.col() < hi) seen[t.row()] = true;
    std::vector<int> rows;
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (seen[i]) rows.push_back(static_cast<int>(i));
    return rows;
}

} // namespace

TEST_CASE("control transform") {
    auto [u, uN] = control_transform(200000.0, 10000.0, Vec3(0, 0, 1));
    CHECK(uN == Approx(20.0));
    CHECK(u.norm() == Approx(uN));

    Vec3 dir = Vec3(1.0, -2.0, 0.5).normalized();
    auto [u2, uN2] = control_transform(123456.0, 7890.0, dir);
    CHECK((u2 / uN2 - dir).norm() < 1e-14);
    CHECK_THROWS_AS(control_transform(1.0, 0.0, dir), std::domain_error);
}

TEST_CASE("linearization identity and finite-difference Jacobian") {
    Setup s;
    ScaledUnits su(s.ocp.scales);
    const OcpPhase& phase2 = s.ocp.phases[1];
    REQUIRE(phase2.mission_index == 2);

    // representative powered-flight node
    EciState st;
    st.r = Vec3(kEarthRadius + 1.4e5, 2e4, 9e5);
    st.v = Vec3(1200.0, 50.0, 5200.0);
    st.m = 11000.0;
    Vec7 x_sc = su.scale_state(st.pack());
    Vec3 u_sc = Vec3(2.0, 0.1, 3.0);
    double s_ref = 0.12, tau = 0.4;

    LinearizedNode lin = linearize_dynamics(s.ocp, phase2, x_sc, u_sc, s_ref, tau);

    SECTION("B has the velocity-row block structure scaled by s_ref") {
        Eigen::Matrix<double, 7, 3> expect = Eigen::Matrix<double, 7, 3>::Zero();
        expect.block<3, 3>(3, 0) = s_ref * Mat3::Identity();
        CHECK((lin.B - expect).norm() == 0.0);
    }

    SECTION("algebraic identity A x + B u + Sigma s + c = s f at the reference") {
        Vec7 lhs = lin.A * x_sc + lin.B * u_sc + lin.Sigma * s_ref + lin.c;
        Vec7 rhs = s_ref * scaled::rhs(s.ocp, phase2, x_sc, u_sc, tau);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10 * rhs.cwiseAbs().maxCoeff());
    }

    SECTION("A matches central finite differences of s f") {
        // both a thin-air node and a dense-atmosphere node (drag active)
        std::vector<Vec7> probes = {x_sc};
        EciState low;
        low.r = Vec3(kEarthRadius + 8.2e4, 1e4, 3e5);
        low.v = Vec3(800.0, -40.0, 5100.0);
        low.m = 11800.0;
        probes.push_back(su.scale_state(low.pack()));

        for (const Vec7& xp0 : probes) {
            LinearizedNode ln = linearize_dynamics(s.ocp, phase2, xp0, u_sc, s_ref, tau);
            double Amax = ln.A.cwiseAbs().maxCoeff();
            for (int j = 0; j < 7; ++j) {
                double h = 1e-6 * std::max(1.0, std::abs(xp0(j)));
                Vec7 xp = xp0, xm = xp0;
                xp(j) += h;
                xm(j) -= h;
                Vec7 col = s_ref *
                           (scaled::rhs(s.ocp, phase2, xp, u_sc, tau) -
                            scaled::rhs(s.ocp, phase2, xm, u_sc, tau)) /
                           (2.0 * h);
                double scale = std::max(col.cwiseAbs().maxCoeff(), 1e-6 * Amax);
                CHECK((ln.A.col(j) - col).cwiseAbs().maxCoeff() / scale < 1e-5);
            }
        }
    }

    SECTION("exoatmospheric node: velocity rows reduce to the gravity gradient") {
        EciState hi;
        hi.r = Vec3(kEarthRadius + 8e5, 1e5, 3e6);
        hi.v = Vec3(900.0, 0.0, 7000.0);
        hi.m = 3000.0;
        Vec7 xh = su.scale_state(hi.pack());
        LinearizedNode ln = linearize_dynamics(s.ocp, phase2, xh, u_sc, s_ref, tau);
        Mat3 block = ln.A.block<3, 3>(3, 0) / s_ref;
        // scaled gravity gradient: T^2 * d(g)/dr
        Mat3 expect = gravity_gradient(hi.r) * su.sc.time * su.sc.time;
        CHECK((block - expect).norm() / expect.norm() < 1e-9);
        CHECK((block - block.transpose()).norm() / block.norm() < 1e-9);
    }

    SECTION("reference below the atmosphere floor is clamped and reported") {
        EciState low = st;
        low.r = (kEarthRadius - 600.0) * Vec3(1, 0, 0);
        // the linearization stays total (clamped atmosphere)
        LinearizedNode ln =
            linearize_dynamics(s.ocp, phase2, su.scale_state(low.pack()), u_sc, s_ref, tau);
        CHECK(ln.A.allFinite());
        // and assembly counts such nodes so callers can report them
        Trajectory bad = initial_reference(s.ocp);
        bad.phases[1].states.row(0).setConstant((kEarthRadius - 600.0) / su.sc.length);
        bad.phases[1].states.row(1).setZero();
        bad.phases[1].states.row(2).setZero();
        AssembledProblem prob = assemble_subproblem(s.ocp, bad);
        CHECK(prob.subsurface_ref_nodes > 0);
    }
}

TEST_CASE("thrust-magnitude path row") {
    Setup s;
    ScaledUnits su(s.ocp.scales);
    const StageSpec& srm = s.vehicle.srm3();

    EciState st;
    st.r = Vec3(kEarthRadius + 1.3e5, 0, 1e5);
    st.v = Vec3(0, 0, 4800.0);
    st.m = 12000.0;
    double t_abs = 30.0;
    ThrustAccelRow row = linearize_thrust_accel(srm, st.pack(), t_abs, su);
    double Aacc = su.accel();
    double p_ref = atmosphere(st.r.norm() - kEarthRadius).p;
    double tnet = srm.vacuum_thrust(t_abs) - p_ref * srm.exit_area;

    SECTION("at the reference point u_N equals (T_vac - p A_e)/m") {
        Vec7 x_sc = su.scale_state(st.pack());
        double uN = row.rhs - row.m_coeff * x_sc(6) - row.r_coeff.dot(x_sc.segment<3>(0));
        CHECK(uN * Aacc == Approx(tnet / st.m).epsilon(1e-12));
    }

    SECTION("vacuum node: mass (1+eps) scales u_N by (1-eps)") {
        EciState hi = st;
        hi.r = Vec3(kEarthRadius + 2e6, 0, 0); // pressure terms vanish
        ThrustAccelRow vrow = linearize_thrust_accel(srm, hi.pack(), t_abs, su);
        CHECK(vrow.r_coeff.norm() < 1e-20);
        double eps = 0.01;
        Vec7 x_sc = su.scale_state(hi.pack());
        x_sc(6) *= 1.0 + eps;
        double uN = vrow.rhs - vrow.m_coeff * x_sc(6);
        CHECK(uN * Aacc == Approx(srm.vacuum_thrust(t_abs) / hi.m * (1.0 - eps)).epsilon(1e-10));

        // first-order agreement with the nonlinear T/m
        double nonlinear = srm.vacuum_thrust(t_abs) / (hi.m * (1.0 + eps));
        CHECK(uN * Aacc == Approx(nonlinear).epsilon(2e-4)); // O(eps^2) remainder
    }
}

TEST_CASE("heat flux row") {
    Setup s;
    ScaledUnits su(s.ocp.scales);
    EciState st;
    st.r = Vec3(kEarthRadius + 1.18e5, 0, 8e5);
    st.v = Vec3(200.0, 100.0, 4500.0);
    st.m = 9000.0;
    double Qmax = 900.0;
    HeatFluxRow row = linearize_heat_flux(st.pack(), Qmax, su);

    SECTION("at the reference the row evaluates to Q/Qmax") {
        Vec7 x_sc = su.scale_state(st.pack());
        double lhs = row.r_coeff.dot(x_sc.segment<3>(0)) + row.v_coeff.dot(x_sc.segment<3>(3));
        double expect = row.flux_ref / Qmax - (1.0 - row.rhs);
        CHECK(lhs == Approx(expect).margin(1e-12));
        AtmosphereSample atm = atmosphere(st.r.norm() - kEarthRadius);
        CHECK(row.flux_ref == Approx(heat_flux(st.r, st.v, atm)).epsilon(1e-12));
    }

    SECTION("gradients match finite differences") {
        auto flux_of = [&](const Vec7& x_si) {
            Vec3 r = x_si.segment<3>(0), v = x_si.segment<3>(3);
            return heat_flux(r, v, atmosphere(r.norm() - kEarthRadius));
        };
        Vec7 x = st.pack();
        for (int c = 0; c < 6; ++c) {
            double h = (c < 3 ? 0.5 : 1e-3);
            Vec7 xp = x, xm = x;
            xp(c) += h;
            xm(c) -= h;
            double fd = (flux_of(xp) - flux_of(xm)) / (2 * h);
            double coeff = c < 3 ? row.r_coeff(c) * Qmax / su.sc.length
                                 : row.v_coeff(c - 3) * Qmax / su.sc.speed;
            CHECK(coeff == Approx(fd).epsilon(1e-6).margin(1e-12));
        }
    }

    SECTION("exoatmospheric node is inactive") {
        EciState hi = st;
        hi.r = Vec3(kEarthRadius + 2e6, 0, 0);
        HeatFluxRow r2 = linearize_heat_flux(hi.pack(), Qmax, su);
        CHECK(r2.r_coeff.norm() < 1e-15);
        CHECK(r2.v_coeff.norm() < 1e-15);
        CHECK(r2.flux_ref < 1e-12);
    }
}

TEST_CASE("assembled subproblem structure") {
    Setup s;
    Trajectory ref = initial_reference(s.ocp);
    AssembledProblem prob = assemble_subproblem(s.ocp, ref);
    const DecisionLayout& L = prob.layout;

    SECTION("variable count matches the closed-form layout count") {
        // supports: 6,20,6,10,20,20,20,101,101 ; colloc: 5,19,5,9,19,19,19,100,100
        // ctrl nodes: 5,19,5+1,19,19
        int supports = 6 + 20 + 6 + 10 + 20 + 20 + 20 + 101 + 101;
        int colloc = 5 + 19 + 5 + 9 + 19 + 19 + 19 + 100 + 100;
        int ctrl = 5 + 19 + 5 + 19 + 19;
        int n_w = 4 + 2 + 2;
        int expect = 7 * supports + 4 * ctrl + 7 * colloc + 9 + 2 + n_w + 7 * colloc + n_w + 0;
        CHECK(L.n_vars == expect);
        CHECK(L.n_w == n_w);
        CHECK(L.dq_idx == -1); // nominal solve carries no heat-flux slack
    }

    SECTION("one pointing cone per control node") {
        CHECK(prob.ir.cones.size() == std::size_t(5 + 19 + 5 + 19 + 19));
        for (const auto& c : prob.ir.cones) CHECK(c.indices.size() == 4);
    }

    SECTION("IR validates cleanly") {
        auto d = validate(prob.ir);
        CHECK(d.ok());
        CHECK(d.warnings.empty());
    }

    SECTION("epigraph rows carry the +-1 pattern") {
        // t_q and t_w each get two rows; all other inequality rows are
        // heat flux, rate, trust region and bound rows
        int colloc = 5 + 19 + 5 + 9 + 19 + 19 + 19 + 100 + 100;
        int epigraph_rows = 2 * (7 * colloc + L.n_w);
        CHECK(prob.ir.n_ineq() >= epigraph_rows);
    }
}

TEST_CASE("reference embedding satisfies the linearized system exactly where expected") {
    Setup s;
    Trajectory ref = initial_reference(s.ocp);
    AssembledProblem prob = assemble_subproblem(s.ocp, ref);
    const DecisionLayout& L = prob.layout;
    Eigen::VectorXd x = embed_reference(s.ocp, L, ref);
    Eigen::VectorXd resid = eq_residual(prob.ir, x);

    SECTION("collocation rows at the reference reduce to the discretization defect") {
        // rows touching q variables are the collocation rows; with q = 0 the
        // residual equals D x - (dtau/2) s f(x,u) evaluated at the reference,
        // i.e. the pure discretization defect with no linearization residual
        auto rows = rows_touching(prob.ir, L.q_off[0], L.q_off[0] + 1); // first q comp
        REQUIRE(!rows.empty());

        double direct = max_dynamics_defect(s.ocp, ref);
        auto all_colloc_rows = rows_touching(prob.ir, L.q_off[0], L.s_off);
        double max_row = 0.0;
        for (int r : all_colloc_rows) max_row = std::max(max_row, std::abs(resid(r)));
        CHECK(max_row == Approx(direct).epsilon(1e-10));
    }

    SECTION("thrust-magnitude rows hold exactly at the reference") {
        auto rows = rows_touching(prob.ir, L.uNi(0, 0), L.uNi(0, 0) + 1);
        for (int r : rows) CHECK(std::abs(resid(r)) < 1e-12);
    }
}

TEST_CASE("boundary rows: gradients versus finite differences, feasible reference") {
    Setup s;
    Trajectory ref = initial_reference(s.ocp);

    // overwrite the phase-7 terminal node with an exactly feasible state
    const TargetInvariants tgt = targets(s.mission);
    ScaledUnits su(s.ocp.scales);
    int p7 = s.ocp.position(7);
    REQUIRE(p7 >= 0);
    {
        EciState orbit;
        orbit.r = Vec3(0, 0, tgt.a_des);
        orbit.v = Vec3(-tgt.v_des, 0, 0); // polar, h_z = 0
        orbit.m = 2500.0;
        Vec7 x_sc = su.scale_state(orbit.pack());
        ref.phases[p7].states.col(ref.phases[p7].states.cols() - 1) = x_sc;
    }
    // and the return endpoints with surface points at the target latitude
    for (int idx : {8, 9}) {
        int ph = s.ocp.position(idx);
        REQUIRE(ph >= 0);
        EciState surf;
        surf.r = kEarthRadius * Vec3(std::cos(s.mission.phi_R_des), 0, std::sin(s.mission.phi_R_des));
        surf.v = Vec3(0, 0, -100.0);
        surf.m = s.vehicle.srm3().dry_mass;
        ref.phases[ph].states.col(ref.phases[ph].states.cols() - 1) =
            su.scale_state(surf.pack());
    }

    AssembledProblem prob = assemble_subproblem(s.ocp, ref);
    const DecisionLayout& L = prob.layout;
    Eigen::VectorXd x = embed_reference(s.ocp, L, ref);
    Eigen::VectorXd resid = eq_residual(prob.ir, x);

    SECTION("buffered rows vanish at a feasible reference (w = 0)") {
        auto rows = rows_touching(prob.ir, L.w_off, L.w_off + L.n_w);
        REQUIRE(static_cast<int>(rows.size()) == L.n_w);
        for (int r : rows) CHECK(std::abs(resid(r)) < 1e-9);
    }

    SECTION("row gradients match finite differences of the nonlinear residuals") {
        // nonlinear chi residuals in scaled units, ordered as assembled
        const double a_s = tgt.a_des / su.sc.length;
        const double v_s = tgt.v_des / su.sc.speed;
        const double hz_s = tgt.h_z_des / (su.sc.length * su.sc.speed);
        auto chi = [&](const Eigen::VectorXd& xv) {
            Eigen::VectorXd out(4);
            int tl = L.n_support[p7] - 1;
            Vec3 r(xv(L.xi(p7, tl, 0)), xv(L.xi(p7, tl, 1)), xv(L.xi(p7, tl, 2)));
            Vec3 v(xv(L.xi(p7, tl, 3)), xv(L.xi(p7, tl, 4)), xv(L.xi(p7, tl, 5)));
            out(0) = r.squaredNorm() - a_s * a_s;
            out(1) = v.squaredNorm() - v_s * v_s;
            out(2) = r.dot(v);
            out(3) = r(0) * v(1) - r(1) * v(0) - hz_s;
            return out;
        };
        auto rows = rows_touching(prob.ir, L.w_off, L.w_off + 4);
        std::sort(rows.begin(), rows.end());
        Eigen::MatrixXd coeffs = Eigen::MatrixXd::Zero(4, L.n_vars);
        for (const auto& t : prob.ir.eq)
            for (int k = 0; k < 4; ++k)
                if (t.row() == rows[k] && t.col() < L.w_off) coeffs(k, t.col()) = t.value();

        int tl = L.n_support[p7] - 1;
        for (int c = 0; c < 6; ++c) {
            int col = L.xi(p7, tl, c);
            double h = 1e-6;
            Eigen::VectorXd xp = x, xm = x;
            xp(col) += h;
            xm(col) -= h;
            Eigen::VectorXd fd = (chi(xp) - chi(xm)) / (2 * h);
            for (int k = 0; k < 4; ++k)
                CHECK(coeffs(k, col) == Approx(fd(k)).epsilon(1e-6).margin(1e-9));
        }

        // polar-orbit reference: the angular-momentum row has no v_z term
        CHECK(coeffs(3, L.xi(p7, tl, 5)) == 0.0);
    }
}

TEST_CASE("nondimensionalization round trip") {
    ScaledUnits su(Scales::for_mass(14000.0));
    Vec7 x;
    x << 6.6e6, -1.2e5, 3.3e6, 120.0, -7300.0, 50.0, 13999.0;
    Vec7 back = su.unscale_state(su.scale_state(x));
    CHECK((back - x).cwiseAbs().maxCoeff() / x.cwiseAbs().maxCoeff() < 1e-15);
}
