#pragma once

// Tiny first-order verification solver for small SOCPs. Deliberately
// independent of the interior-point backend: dense ADMM splitting with
// closed-form cone projections. Meant for cross-checking objectives in
// tests, not for production solves.

#include <Eigen/Dense>

#include "ascent/conic.hpp"
#include "ascent/ipm.hpp"

namespace ascent {

struct AdmmResult {
    bool converged = false;
    Eigen::VectorXd x;
    double objective = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
};

namespace detail {

inline void project_onto_cone(Eigen::VectorXd& s, int l, const std::vector<ipm::ConeBlock>& cones) {
    for (int i = 0; i < l; ++i) s(i) = std::max(s(i), 0.0);
    for (const auto& c : cones) {
        double t = s(c.start);
        auto v = s.segment(c.start + 1, c.dim - 1);
        double vn = v.norm();
        if (vn <= t) continue;
        if (vn <= -t) {
            s.segment(c.start, c.dim).setZero();
        } else {
            double beta = 0.5 * (t + vn);
            s(c.start) = beta;
            v *= beta / vn;
        }
    }
}

} // namespace detail

/// Solves min c'x s.t. Ax = b, Gx + s = h, s in K by ADMM on the slack
/// split. Dense linear algebra; suitable below ~200 variables.
inline AdmmResult admm_solve(const ConicProblemIR& ir_in, double rho = 1.0,
                             int max_iters = 200000, double eps = 1e-9) {
    ConicProblemIR ir = ir_in;
    IrDiagnostics diag = validate(ir);
    AdmmResult res;
    if (!diag.ok()) return res;

    ipm::StandardForm f = ipm::to_standard_form(ir);
    const int n = f.n, p = f.p, m = f.m;
    Eigen::MatrixXd A = Eigen::MatrixXd(f.A);
    Eigen::MatrixXd G = Eigen::MatrixXd(f.G);

    // KKT of the x-update: [rho G'G + eps I, A'; A, 0]
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + p, n + p);
    kkt.topLeftCorner(n, n) = rho * G.transpose() * G +
                              1e-9 * Eigen::MatrixXd::Identity(n, n);
    kkt.topRightCorner(n, p) = A.transpose();
    kkt.bottomLeftCorner(p, n) = A;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(m); // scaled dual
    detail::project_onto_cone(s, f.l, f.cones);

    const double alpha = 1.6; // over-relaxation
    for (int it = 0; it < max_iters; ++it) {
        Eigen::VectorXd rhs(n + p);
        rhs.head(n) = -f.c - rho * G.transpose() * (s - f.h + u);
        rhs.tail(p) = f.b;
        x = lu.solve(rhs).head(n);

        Eigen::VectorXd Gx = G * x;
        Eigen::VectorXd Gx_rel = alpha * Gx + (1.0 - alpha) * (f.h - s);
        Eigen::VectorXd s_prev = s;
        s = f.h - Gx_rel - u;
        detail::project_onto_cone(s, f.l, f.cones);
        u += Gx_rel + s - f.h;

        if (it % 50 == 0) {
            double prim = (Gx + s - f.h).norm();
            double dual = rho * (G.transpose() * (s - s_prev)).norm();
            double scale = std::max({1.0, s.norm(), f.h.norm()});
            if (prim / scale < eps && dual / std::max(1.0, x.norm()) < eps) {
                res.converged = true;
                res.iterations = it;
                break;
            }
        }
    }
    res.x = x;
    res.objective = f.c.dot(x);
    if (!res.converged) res.iterations = max_iters;
    return res;
}

} // namespace ascent
