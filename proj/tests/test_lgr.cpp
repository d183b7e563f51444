#include <catch2/catch_amalgamated.hpp>

#include "ascent/lgr.hpp"

using namespace ascent;
using Catch::Approx;

TEST_CASE("LGR points at low order match the closed forms") {
    auto p1 = lgr_points(1);
    REQUIRE(p1.size() == 1);
    CHECK(p1(0) == -1.0);

    // roots of x + (3x^2 - 1)/2: {-1, 1/3}
    auto p2 = lgr_points(2);
    REQUIRE(p2.size() == 2);
    CHECK(p2(0) == -1.0);
    CHECK(p2(1) == Approx(1.0 / 3.0).margin(1e-14));

    CHECK_THROWS_AS(lgr_points(0), std::invalid_argument);
    CHECK_THROWS_AS(lgr_points(65), std::invalid_argument);
}

TEST_CASE("LGR points are ascending, include -1, exclude +1") {
    for (int p : {3, 5, 9, 19, 20, 40, 64}) {
        auto x = lgr_points(p);
        CHECK(x(0) == -1.0);
        for (int i = 1; i < p; ++i) CHECK(x(i) > x(i - 1));
        CHECK(x(p - 1) < 1.0);
        // they are roots of P_{p-1} + P_p
        for (int i = 0; i < p; ++i)
            CHECK(std::abs(legendre(p - 1, x(i)) + legendre(p, x(i))) < 1e-11);
    }
}

TEST_CASE("quadrature weights are positive and sum to 2") {
    for (int p = 1; p <= 40; ++p) {
        auto x = lgr_points(p);
        auto w = lgr_weights(p, x);
        for (int i = 0; i < p; ++i) CHECK(w(i) > 0.0);
        CHECK(std::abs(w.sum() - 2.0) < 1e-12);
    }
}

TEST_CASE("differentiation matrix differentiates polynomials exactly") {
    for (int p : {3, 5, 10, 19, 20}) {
        const auto& ops = segment_operators(p);

        // constants are annihilated
        Eigen::VectorXd ones = Eigen::VectorXd::Ones(p + 1);
        CHECK((ops.diff * ones).cwiseAbs().maxCoeff() < 1e-12);

        // f(t) = t has unit derivative
        CHECK(((ops.diff * ops.support).array() - 1.0).abs().maxCoeff() < 1e-12);

        // monomial t^p has derivative p t^{p-1} at the collocation points
        Eigen::VectorXd tp(p + 1);
        for (int j = 0; j <= p; ++j) tp(j) = std::pow(ops.support(j), p);
        Eigen::VectorXd d = ops.diff * tp;
        for (int i = 0; i < p; ++i)
            CHECK(d(i) == Approx(p * std::pow(ops.colloc(i), p - 1)).margin(1e-10));
    }
}

TEST_CASE("barycentric interpolation is exact at nodes and for polynomials") {
    const auto& ops = segment_operators(8);
    auto poly = [](double t) {
        return 1.0 - 2.0 * t + 0.5 * t * t * t - 0.3 * std::pow(t, 7);
    };
    Eigen::VectorXd vals(9);
    for (int j = 0; j <= 8; ++j) vals(j) = poly(ops.support(j));

    for (int j = 0; j <= 8; ++j)
        CHECK(barycentric_eval(ops.support, ops.bary_support, vals, ops.support(j)) == vals(j));
    for (double t = -1.0; t <= 1.0; t += 0.05)
        CHECK(barycentric_eval(ops.support, ops.bary_support, vals, t) ==
              Approx(poly(t)).margin(1e-10));
}

TEST_CASE("control extrapolation at the segment end matches the polynomial") {
    // samples only at collocation points (as controls are represented):
    // evaluating at tau = +1 is an extrapolation of the fitted polynomial
    const auto& ops = segment_operators(6);
    auto poly = [](double t) { return 2.0 + t - 0.7 * t * t + 0.1 * std::pow(t, 5); };
    Eigen::VectorXd vals(6);
    for (int j = 0; j < 6; ++j) vals(j) = poly(ops.colloc(j));
    CHECK(barycentric_eval(ops.colloc, ops.bary_colloc, vals, 1.0) ==
          Approx(poly(1.0)).margin(1e-10));
}

TEST_CASE("collocating x' = x reproduces the exponential") {
    // one segment, order 10, unit tau-span: solve D x = (1/2) x at the
    // collocation points with x(-1) = 1, then check the endpoint against e
    int p = 10;
    const auto& ops = segment_operators(p);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    // unknowns: x at support nodes 1..p (node 0 pinned to 1)
    for (int i = 0; i < p; ++i) {
        for (int j = 1; j <= p; ++j) A(i, j - 1) = ops.diff(i, j);
        b(i) = -ops.diff(i, 0) * 1.0;
        if (i >= 1) A(i, i - 1) -= 0.5; // dx/dsigma = x/2 at colloc i (node i)
        else b(i) += 0.5 * 1.0;         // colloc 0 is the support node 0 itself
    }
    Eigen::VectorXd x = A.fullPivLu().solve(b);
    CHECK(x(p - 1) == Approx(std::exp(1.0)).margin(1e-9));
}

TEST_CASE("mission mesh table") {
    auto m2 = mission_phase_mesh(2);
    CHECK(m2.segments() == 1);
    CHECK(m2.orders[0] == 19);
    auto m8 = mission_phase_mesh(8);
    CHECK(m8.segments() == 5);
    CHECK(m8.orders == std::vector<int>(5, 20));
    CHECK(m8.colloc_count() == 100);
    CHECK(m8.support_count() == 101);
    CHECK_THROWS_AS(mission_phase_mesh(10), std::invalid_argument);
}

TEST_CASE("mesh shrink rule") {
    auto mesh = mission_phase_mesh(2);
    CHECK(shrink_mesh(mesh, 1.0).orders == mesh.orders);
    CHECK(shrink_mesh(mesh, 0.1).orders[0] == 5);   // floor at 5 nodes
    CHECK(shrink_mesh(mesh, 0.5).orders[0] == 10);  // round(9.5) away from zero

    SECTION("monotone in the remaining fraction") {
        int last = 0;
        for (double f = 0.05; f <= 1.0; f += 0.01) {
            int p = shrink_mesh(mesh, f).orders[0];
            CHECK(p >= last);
            last = p;
        }
    }
    CHECK_THROWS_AS(shrink_mesh(mesh, 0.0), std::invalid_argument);
}
