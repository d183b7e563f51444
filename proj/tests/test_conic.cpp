#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "ascent/conic_check.hpp"
#include "ascent/ipm.hpp"

using namespace ascent;
using Catch::Approx;

namespace {

/// Random SOCP with a known strictly feasible point and compact feasible
/// set (box bounds on every variable).
ConicProblemIR random_socp(std::mt19937& rng) {
    std::uniform_int_distribution<int> nd(6, 20);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    int n = nd(rng);

    ConicProblemIR ir;
    ir.init(n);
    Eigen::VectorXd x0(n);
    for (int i = 0; i < n; ++i) x0(i) = ud(rng);

    // a couple of small cones over disjoint leading blocks
    int pos = 0;
    int ncones = (rng() % 2) + 1;
    for (int k = 0; k < ncones && pos + 3 <= n; ++k) {
        ConicProblemIR::Cone c;
        c.indices = {pos, pos + 1, pos + 2};
        x0(pos) = x0.segment(pos + 1, 2).norm() + 0.3;
        ir.cones.push_back(c);
        pos += 3;
    }

    // equalities through x0
    int p = n / 4;
    Eigen::MatrixXd A(p, n);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = ud(rng);
    Eigen::VectorXd b = A * x0;
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < n; ++j)
            if (A(i, j) != 0.0) ir.eq.emplace_back(i, j, A(i, j));
    ir.eq_rhs = b;

    // a few slack inequalities through x0
    int q = n / 4;
    Eigen::VectorXd hr(q);
    for (int i = 0; i < q; ++i) {
        Eigen::VectorXd g(n);
        for (int j = 0; j < n; ++j) g(j) = ud(rng);
        hr(i) = g.dot(x0) + 0.5;
        for (int j = 0; j < n; ++j)
            if (g(j) != 0.0) ir.ineq.emplace_back(i, j, g(j));
    }
    ir.ineq_rhs = hr;

    // compact box keeps the problem bounded
    ir.lb = x0.array() - 2.0;
    ir.ub = x0.array() + 2.0;
    for (const auto& c : ir.cones) ir.ub(c.indices[0]) = x0(c.indices[0]) + 4.0;

    for (int i = 0; i < n; ++i) ir.cost(i) = ud(rng);
    return ir;
}

} // namespace

TEST_CASE("analytic SOCP: minimize the cone bound of a fixed vector") {
    // min x0  s.t.  x0 >= ||(x1, x2)||, x1 = 1, x2 = 1  ->  x0* = sqrt(2)
    ConicProblemIR ir;
    ir.init(3);
    ir.cost(0) = 1.0;
    ir.eq.emplace_back(0, 1, 1.0);
    ir.eq.emplace_back(1, 2, 1.0);
    ir.eq_rhs = Eigen::Vector2d(1.0, 1.0);
    ir.cones.push_back({{0, 1, 2}});

    auto out = solve(ir);
    REQUIRE(out.status == SolveStatus::Optimal);
    CHECK(out.objective == Approx(std::sqrt(2.0)).epsilon(1e-7));
    CHECK(out.primal(0) == Approx(std::sqrt(2.0)).epsilon(1e-6));

    // primal feasibility at the reported tolerances
    CHECK(out.primal(1) == Approx(1.0).margin(1e-8));
    CHECK(out.primal(2) == Approx(1.0).margin(1e-8));
    CHECK(out.primal(0) >= out.primal.segment(1, 2).norm() - 1e-8);
}

TEST_CASE("contradictory equalities are reported infeasible") {
    ConicProblemIR ir;
    ir.init(1);
    ir.cost(0) = 1.0;
    ir.eq.emplace_back(0, 0, 1.0);
    ir.eq.emplace_back(1, 0, 1.0);
    ir.eq_rhs = Eigen::Vector2d(1.0, 2.0);
    auto out = solve(ir);
    CHECK(out.status == SolveStatus::Infeasible);
    CHECK(out.primal.size() == 0);
}

TEST_CASE("free descent direction is reported unbounded") {
    ConicProblemIR ir;
    ir.init(1);
    ir.cost(0) = 1.0;
    auto out = solve(ir);
    CHECK(out.status == SolveStatus::Unbounded);
}

TEST_CASE("bounded LP corner solution") {
    // min -x0 - 2 x1, 0 <= x <= 1 -> (1, 1)
    ConicProblemIR ir;
    ir.init(2);
    ir.cost << -1.0, -2.0;
    ir.lb.setZero();
    ir.ub.setOnes();
    auto out = solve(ir);
    REQUIRE(out.status == SolveStatus::Optimal);
    CHECK(out.objective == Approx(-3.0).epsilon(1e-7));
}

TEST_CASE("IR validation diagnostics") {
    ConicProblemIR ir;
    ir.init(3);
    ir.eq.emplace_back(0, 0, 1.0);
    ir.eq_rhs = Eigen::VectorXd::Ones(1);
    auto d = validate(ir);
    CHECK(d.ok());
    CHECK(d.warnings.empty());

    SECTION("cone referencing out-of-range variable") {
        ir.cones.push_back({{0, 3}});
        auto d2 = validate(ir);
        CHECK_FALSE(d2.ok());
    }
    SECTION("duplicate triplets merged with a warning") {
        ir.eq.emplace_back(0, 0, 2.0);
        auto d2 = validate(ir);
        CHECK(d2.ok());
        REQUIRE(d2.warnings.size() == 1);
        REQUIRE(ir.eq.size() == 1);
        CHECK(ir.eq[0].value() == 3.0);
    }
    SECTION("NaN cost rejected") {
        ir.cost(1) = std::numeric_limits<double>::quiet_NaN();
        CHECK_FALSE(validate(ir).ok());
    }
    SECTION("undersized cone rejected") {
        ir.cones.push_back({{1}});
        CHECK_FALSE(validate(ir).ok());
    }
}

TEST_CASE("Nesterov-Todd scaling identities") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    ipm::ConeOps ops;
    ops.l = 3;
    ops.cones = {{3, 4}};
    int m = 7;

    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd s(m), z(m);
        for (int i = 0; i < m; ++i) {
            s(i) = ud(rng);
            z(i) = ud(rng);
        }
        s = ops.bring_to_cone(s);
        z = ops.bring_to_cone(z);

        ipm::Scaling W;
        W.ops = ops;
        REQUIRE(W.update(s, z));

        // W^2 z = s  (NT scaling maps z to s through W twice)
        Eigen::VectorXd Wz = W.apply(z);
        Eigen::VectorXd WWz = W.apply(Wz);
        CHECK((WWz - s).norm() < 1e-10 * s.norm());

        // the dense SOC W^2 block agrees with the structured apply
        Eigen::MatrixXd Wsq = W.soc_wsq(0);
        Eigen::VectorXd zc = z.segment(3, 4);
        CHECK((Wsq * zc - WWz.segment(3, 4)).norm() < 1e-10);

        // Jordan identities: lambda o (lambda \ v) = v
        Eigen::VectorXd lambda = Wz;
        Eigen::VectorXd v(m);
        for (int i = 0; i < m; ++i) v(i) = ud(rng);
        Eigen::VectorXd back = ops.product(lambda, ops.division(lambda, v));
        CHECK((back - v).norm() < 1e-9 * std::max(1.0, v.norm()));
    }
}

TEST_CASE("adapter equivalence: IPM vs ADMM on random feasible SOCPs") {
    std::mt19937 rng(42);
    int checked = 0;
    for (int k = 0; k < 20; ++k) {
        ConicProblemIR ir = random_socp(rng);
        auto out = solve(ir);
        REQUIRE(out.status == SolveStatus::Optimal);

        auto ref = admm_solve(ir, 1.0, 400000, 1e-10);
        REQUIRE(ref.converged);
        double denom = std::max(1.0, std::abs(ref.objective));
        CHECK(std::abs(out.objective - ref.objective) / denom < 1e-6);
        ++checked;
    }
    CHECK(checked == 20);
}

TEST_CASE("identical IR and tolerances give identical outcomes") {
    std::mt19937 rng(3);
    ConicProblemIR ir = random_socp(rng);
    auto a = solve(ir);
    auto b = solve(ir);
    REQUIRE(a.status == b.status);
    REQUIRE(a.primal.size() == b.primal.size());
    for (int i = 0; i < a.primal.size(); ++i) CHECK(a.primal(i) == b.primal(i));
    CHECK(a.iterations == b.iterations);
}
