#include <catch2/catch_amalgamated.hpp>

#include "ascent/orbit.hpp"
#include "ascent/vehicle.hpp"

using namespace ascent;
using Catch::Approx;

namespace {

StageSpec test_stage() {
    StageSpec s;
    s.name = "test-srm";
    s.profile.samples = {{0.0, 300000.0, 100.0}, {50.0, 260000.0, 90.0}, {110.0, 60000.0, 20.0}};
    s.profile.burn_time = 110.0;
    s.exit_area = 1.1;
    s.dry_mass = 1000.0;
    s.ref_surface = 2.8;
    s.drag_coeff = 0.6;
    return s;
}

Eigen::Matrix3d rot_z(double th) {
    Eigen::Matrix3d R;
    R << std::cos(th), -std::sin(th), 0, std::sin(th), std::cos(th), 0, 0, 0, 1;
    return R;
}

} // namespace

TEST_CASE("US76 atmosphere matches published table anchors") {
    auto sl = atmosphere(0.0);
    CHECK(sl.rho == Approx(1.225).epsilon(1e-3));
    CHECK(sl.p == Approx(101325.0).epsilon(1e-6));

    // tropopause: published p = 22632 Pa at 11 km geopotential
    double z11 = us76::kGeoRadius * 11000.0 / (us76::kGeoRadius - 11000.0);
    CHECK(atmosphere(z11).p == Approx(22632.0).epsilon(1e-3));

    // vacuum asymptote
    auto high = atmosphere(1.0e6);
    CHECK(high.rho < 1e-12);
    CHECK(high.p < 1e-7);
}

TEST_CASE("atmosphere is nonnegative and monotone non-increasing") {
    double prev_rho = std::numeric_limits<double>::infinity();
    double prev_p = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 1000; ++i) {
        double z = -500.0 + i * 200.0; // up to ~199 km
        auto s = atmosphere(z);
        REQUIRE(s.rho >= 0.0);
        REQUIRE(s.p >= 0.0);
        CHECK(s.rho <= prev_rho);
        CHECK(s.p <= prev_p);
        prev_rho = s.rho;
        prev_p = s.p;
    }
}

TEST_CASE("atmosphere gradient matches central finite differences") {
    for (double z : {2000.0, 15000.0, 33000.0, 60000.0, 80000.0, 84000.0, 100000.0, 150000.0}) {
        double dz = 0.5;
        auto g = atmosphere_gradient(z);
        auto lo = atmosphere(z - dz);
        auto hi = atmosphere(z + dz);
        CHECK(g.dp_dh == Approx((hi.p - lo.p) / (2 * dz)).epsilon(1e-5));
        CHECK(g.drho_dh == Approx((hi.rho - lo.rho) / (2 * dz)).epsilon(1e-5));
    }
}

TEST_CASE("atmosphere is continuous across the 86 km seam") {
    double z = us76::top_anchor().z86;
    auto below = atmosphere(z - 1e-4);
    auto above = atmosphere(z + 1e-4);
    CHECK(below.p == Approx(above.p).epsilon(1e-7));
    CHECK(below.rho == Approx(above.rho).epsilon(1e-7));
}

TEST_CASE("gravity is inverse-square and central") {
    Vec3 g = gravity_accel(Vec3(kEarthRadius, 0, 0));
    CHECK(g(0) == Approx(-kMu / (kEarthRadius * kEarthRadius)));
    CHECK(g.norm() == Approx(9.798).epsilon(1e-3));
    CHECK(g(1) == 0.0);
    CHECK(g(2) == 0.0);

    Vec3 r(1.2e7, -3.4e6, 5.6e6);
    Vec3 gr = gravity_accel(r);
    CHECK(gr.normalized().dot(r.normalized()) == Approx(-1.0).epsilon(1e-14));
    CHECK(gravity_accel(2 * r).norm() == Approx(gr.norm() / 4.0).epsilon(1e-14));

    CHECK_THROWS_AS(gravity_accel(Vec3::Zero()), std::domain_error);
}

TEST_CASE("gravity gradient matches finite differences") {
    Vec3 r(6.6e6, 1.1e6, -2.2e6);
    Mat3 J = gravity_gradient(r);
    CHECK((J - J.transpose()).norm() < 1e-18 * J.norm() + 1e-20);
    double h = 1.0;
    for (int k = 0; k < 3; ++k) {
        Vec3 dr = Vec3::Zero();
        dr(k) = h;
        Vec3 col = (gravity_accel(r + dr) - gravity_accel(r - dr)) / (2 * h);
        CHECK((J.col(k) - col).norm() < 1e-6 * J.norm());
    }
}

TEST_CASE("relative velocity") {
    // on the spin axis the transport term vanishes
    Vec3 v(123.0, -45.0, 678.0);
    CHECK((relative_velocity(Vec3(0, 0, 8e6), v) - v).norm() == 0.0);

    // equatorial surface point at rest sees the full corotation speed
    Vec3 vr = relative_velocity(Vec3(kEarthRadius, 0, 0), Vec3::Zero());
    CHECK(vr.norm() == Approx(kEarthOmega * kEarthRadius).epsilon(1e-12));
    CHECK(vr.norm() == Approx(465.1).epsilon(1e-3));

    // generic case against a component-wise cross product
    Vec3 r(5.1e6, -2.2e6, 3.3e6);
    Vec3 w(0, 0, kEarthOmega);
    Vec3 manual = v - Vec3(w(1) * r(2) - w(2) * r(1), w(2) * r(0) - w(0) * r(2),
                           w(0) * r(1) - w(1) * r(0));
    CHECK((relative_velocity(r, v) - manual).norm() < 1e-12);
}

TEST_CASE("drag acceleration") {
    StageSpec stage = test_stage();
    EciState st;
    st.r = Vec3(0, 0, kEarthRadius + 2.5e5);
    st.v = Vec3(7500.0, 0, 0); // r on the spin axis: v_rel = v
    st.m = 1000.0;

    SECTION("no relative flow gives zero") {
        EciState rest = st;
        rest.v = earth_omega_vec().cross(rest.r);
        CHECK(drag_accel(rest, {1.0, 0.0}, stage).norm() == 0.0);
    }
    SECTION("linear in density") {
        Vec3 a1 = drag_accel(st, {5e-9, 0.0}, stage);
        Vec3 a2 = drag_accel(st, {1e-8, 0.0}, stage);
        CHECK((a2 - 2.0 * a1).norm() < 1e-18);
    }
    SECTION("matches the scalar formula") {
        Vec3 a = drag_accel(st, {5e-9, 0.0}, stage);
        double expect = 0.5 * 5e-9 * 7500.0 * 7500.0 * stage.ref_surface * stage.drag_coeff / st.m;
        CHECK(a.norm() == Approx(expect).epsilon(1e-12));
        CHECK(a.normalized().dot(st.v.normalized()) == Approx(-1.0).epsilon(1e-12));
    }
}

TEST_CASE("net thrust interpolation") {
    StageSpec stage = test_stage();
    CHECK(net_thrust(0.0, 0.0, stage) == 300000.0);
    CHECK(net_thrust(50.0, 0.0, stage) == 260000.0);
    CHECK(net_thrust(120.0, 0.0, stage) == 0.0); // motor off
    // midway between samples: arithmetic mean
    CHECK(net_thrust(25.0, 0.0, stage) == Approx(0.5 * (300000.0 + 260000.0)));
    // ambient pressure bleeds p*A_e off the vacuum value
    CHECK(net_thrust(0.0, 1000.0, stage) == Approx(300000.0 - 1000.0 * 1.1));
}

TEST_CASE("heat flux") {
    Vec3 r(0, 0, kEarthRadius + 6e4);
    Vec3 v(7500.0, 0, 0);
    CHECK(heat_flux(r, v, {0.0, 0.0}) == 0.0);
    CHECK(heat_flux(r, v, {5e-9, 0.0}) == Approx(1054.69).epsilon(1e-4));
    CHECK(heat_flux(r, 2.0 * v, {5e-9, 0.0}) ==
          Approx(8.0 * heat_flux(r, v, {5e-9, 0.0})).epsilon(1e-12));
}

TEST_CASE("dynamics right-hand side") {
    StageSpec stage = test_stage();

    SECTION("coasting circular orbit reduces to two-body") {
        double rn = kEarthRadius + 7e5;
        EciState st;
        st.r = Vec3(rn, 0, 0);
        st.v = Vec3(0, std::sqrt(kMu / rn), 0);
        st.m = 1000.0;
        ForceModel vac;
        vac.drag = false;
        Vec7 dx = dynamics_rhs(st, Vec3::Zero(), 0.0, stage, false, vac);
        CHECK((dx.segment<3>(0) - st.v).norm() == 0.0);
        CHECK(dx.segment<3>(3).norm() == Approx(kMu / (rn * rn)).epsilon(1e-14));
        CHECK(dx.segment<3>(3).normalized().dot(st.r.normalized()) == Approx(-1.0));
        CHECK(dx(6) == 0.0);
    }

    SECTION("thrust-only acceleration") {
        EciState st;
        st.r = Vec3(0, 0, kEarthRadius + 5e5);
        st.v = Vec3::Zero();
        st.m = 2000.0;
        ForceModel none;
        none.gravity = none.drag = false;
        Vec3 dir(0, 1, 0);
        Vec7 dx = dynamics_rhs(st, dir, 50.0, stage, true, none);
        double p = atmosphere(5e5).p;
        double expect = (260000.0 - p * stage.exit_area) / st.m;
        CHECK((dx.segment<3>(3) - expect * dir).norm() < 1e-12);
        CHECK(dx(6) == Approx(-stage.mass_flow(50.0)));
        CHECK(dx(6) == -90.0);
    }

    SECTION("nonpositive mass is a domain error") {
        EciState st;
        st.r = Vec3(kEarthRadius, 0, 0);
        st.m = 0.0;
        CHECK_THROWS_AS(dynamics_rhs(st, Vec3(1, 0, 0), 0.0, stage, true), std::domain_error);
    }

    SECTION("equivariant under rotations about the spin axis") {
        EciState st;
        st.r = Vec3(kEarthRadius + 9e4, 1e5, 2e6);
        st.v = Vec3(4000.0, 300.0, 5000.0);
        st.m = 9000.0;
        Vec3 dir = Vec3(0.3, 0.2, 0.93).normalized();
        Vec7 dx = dynamics_rhs(st, dir, 30.0, stage, true);

        Eigen::Matrix3d R = rot_z(0.7345);
        EciState rt;
        rt.r = R * st.r;
        rt.v = R * st.v;
        rt.m = st.m;
        Vec7 dxr = dynamics_rhs(rt, R * dir, 30.0, stage, true);
        CHECK((dxr.segment<3>(0) - R * dx.segment<3>(0)).norm() < 1e-9);
        CHECK((dxr.segment<3>(3) - R * dx.segment<3>(3)).norm() < 1e-12);
        CHECK(dxr(6) == dx(6));
    }
}

TEST_CASE("thrust profile integrals and validation") {
    StageSpec stage = test_stage();
    // trapezoid by hand: [0,50]: (300+260)/2*50 = 14000 kN*s; [50,110]: (260+60)/2*60 = 9600
    CHECK(stage.profile.total_impulse() == Approx(1.4e7 + 9.6e6));
    CHECK(stage.profile.total_propellant() == Approx(0.5 * (100 + 90) * 50 + 0.5 * (90 + 20) * 60));

    ThrustProfile bad;
    bad.samples = {{0.0, 1.0, 1.0}, {0.0, 1.0, 1.0}};
    bad.burn_time = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("orbit elements of a constructed circular polar orbit") {
    double a = 7.078137e6;
    Vec3 r(0, 0, a);
    Vec3 v(std::sqrt(kMu / a), 0, 0);
    auto el = orbit_elements(r, v);
    CHECK(el.a == Approx(a).epsilon(1e-12));
    CHECK(el.e < 1e-12);
    CHECK(el.inc == Approx(kPi / 2).epsilon(1e-12));
}
