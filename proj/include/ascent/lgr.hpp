#pragma once

// Legendre-Gauss-Radau collocation machinery: node generation via Newton
// iteration on P_{p-1} + P_p, quadrature weights, barycentric Lagrange
// differentiation matrices and interpolation, hp mesh bookkeeping and the
// receding-horizon mesh shrink rule.

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace ascent {

// ============================================================
// Legendre polynomials
// ============================================================

/// P_n(x) by the three-term recurrence.
inline double legendre(int n, double x) {
    if (n == 0) return 1.0;
    double pm = 1.0, pc = x;
    for (int k = 1; k < n; ++k) {
        double pn = ((2.0 * k + 1.0) * x * pc - k * pm) / (k + 1.0);
        pm = pc;
        pc = pn;
    }
    return pc;
}

/// P_n'(x) for x strictly inside (-1, 1).
inline double legendre_deriv(int n, double x) {
    if (n == 0) return 0.0;
    return n * (x * legendre(n, x) - legendre(n - 1, x)) / (x * x - 1.0);
}

// ============================================================
// LGR nodes and weights
// ============================================================

/// The p Legendre-Gauss-Radau points on [-1, 1): roots of P_{p-1} + P_p,
/// ascending, first point exactly -1.
inline Eigen::VectorXd lgr_points(int p) {
    if (p < 1 || p > 64) throw std::invalid_argument("lgr_points: order out of [1, 64]");
    Eigen::VectorXd x(p);
    x(0) = -1.0;
    const double pi = 3.14159265358979323846;
    for (int j = 1; j < p; ++j) {
        // Chebyshev-Radau initial guess
        double xi = -std::cos(2.0 * pi * j / (2.0 * p - 1.0));
        for (int it = 0; it < 100; ++it) {
            double f = legendre(p - 1, xi) + legendre(p, xi);
            double fp = legendre_deriv(p - 1, xi) + legendre_deriv(p, xi);
            double dx = f / fp;
            xi -= dx;
            if (std::abs(dx) < 1e-14) break;
        }
        x(j) = xi;
    }
    std::sort(x.data(), x.data() + p);
    x(0) = -1.0;
    return x;
}

/// Quadrature weights matching lgr_points: w_0 = 2/p^2 at the -1 node,
/// w_i = (1 - x_i) / (p^2 P_{p-1}(x_i)^2) elsewhere. Positive, sum to 2.
inline Eigen::VectorXd lgr_weights(int p, const Eigen::VectorXd& x) {
    Eigen::VectorXd w(p);
    w(0) = 2.0 / (static_cast<double>(p) * p);
    for (int i = 1; i < p; ++i) {
        double pl = legendre(p - 1, x(i));
        w(i) = (1.0 - x(i)) / (static_cast<double>(p) * p * pl * pl);
    }
    return w;
}

// ============================================================
// Barycentric Lagrange interpolation
// ============================================================

/// Barycentric weights of a node set, normalized to unit max magnitude.
inline Eigen::VectorXd barycentric_weights(const Eigen::VectorXd& nodes) {
    int n = static_cast<int>(nodes.size());
    Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            if (k != j) w(j) /= (nodes(j) - nodes(k));
    w /= w.cwiseAbs().maxCoeff();
    return w;
}

/// Second-form barycentric evaluation; exact at the nodes and valid for
/// queries outside the node span (polynomial extrapolation).
inline double barycentric_eval(const Eigen::VectorXd& nodes, const Eigen::VectorXd& bary,
                               const Eigen::VectorXd& values, double x) {
    int n = static_cast<int>(nodes.size());
    double num = 0.0, den = 0.0;
    for (int j = 0; j < n; ++j) {
        double d = x - nodes(j);
        if (d == 0.0) return values(j);
        double t = bary(j) / d;
        num += t * values(j);
        den += t;
    }
    return num / den;
}

/// Row-wise barycentric evaluation of a sample matrix (one column per node).
inline Eigen::VectorXd barycentric_eval_cols(const Eigen::VectorXd& nodes,
                                             const Eigen::VectorXd& bary,
                                             const Eigen::MatrixXd& values, double x) {
    Eigen::VectorXd out(values.rows());
    for (int r = 0; r < values.rows(); ++r)
        out(r) = barycentric_eval(nodes, bary, values.row(r).transpose(), x);
    return out;
}

// ============================================================
// Segment operators
// ============================================================

/// Collocation data of one segment of order p: the p LGR points, the p+1
/// support points (LGR plus the non-collocated right endpoint), quadrature
/// weights, and the p x (p+1) differentiation matrix mapping support values
/// to derivatives at the collocation points.
struct SegmentOperators {
    int p = 0;
    Eigen::VectorXd colloc;       // p
    Eigen::VectorXd support;      // p + 1, support(p) = +1
    Eigen::VectorXd weights;      // p
    Eigen::MatrixXd diff;         // p x (p+1)
    Eigen::VectorXd bary_support; // p + 1
    Eigen::VectorXd bary_colloc;  // p
};

inline SegmentOperators make_segment_operators(int p) {
    SegmentOperators ops;
    ops.p = p;
    ops.colloc = lgr_points(p);
    ops.weights = lgr_weights(p, ops.colloc);
    ops.support.resize(p + 1);
    ops.support.head(p) = ops.colloc;
    ops.support(p) = 1.0;
    ops.bary_support = barycentric_weights(ops.support);
    ops.bary_colloc = barycentric_weights(ops.colloc);

    Eigen::MatrixXd D(p + 1, p + 1);
    for (int i = 0; i <= p; ++i) {
        double rowsum = 0.0;
        for (int j = 0; j <= p; ++j) {
            if (i == j) continue;
            D(i, j) = (ops.bary_support(j) / ops.bary_support(i)) /
                      (ops.support(i) - ops.support(j));
            rowsum += D(i, j);
        }
        D(i, i) = -rowsum; // rows annihilate constants
    }
    ops.diff = D.topRows(p);
    return ops;
}

/// Cached operators per order; the table is read-only after first use.
inline const SegmentOperators& segment_operators(int p) {
    static std::map<int, std::unique_ptr<SegmentOperators>> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(p);
    if (it == cache.end())
        it = cache.emplace(p, std::make_unique<SegmentOperators>(make_segment_operators(p))).first;
    return *it->second;
}

// ============================================================
// Mesh bookkeeping
// ============================================================

/// Collocation layout of one phase over normalized time [0, 1].
struct PhaseMesh {
    std::vector<double> boundaries; // h + 1, strictly increasing, 0 to 1
    std::vector<int> orders;        // h

    int segments() const { return static_cast<int>(orders.size()); }
    int colloc_count() const {
        int n = 0;
        for (int p : orders) n += p;
        return n;
    }
    // states live at all collocation points plus the phase endpoint;
    // adjacent segments share their interface node
    int support_count() const { return colloc_count() + 1; }

    static PhaseMesh uniform(int h, int p) {
        PhaseMesh m;
        m.boundaries.resize(h + 1);
        for (int k = 0; k <= h; ++k) m.boundaries[k] = static_cast<double>(k) / h;
        m.orders.assign(h, p);
        return m;
    }

    void validate() const {
        if (orders.empty() || boundaries.size() != orders.size() + 1)
            throw std::invalid_argument("PhaseMesh: inconsistent sizes");
        if (boundaries.front() != 0.0 || boundaries.back() != 1.0)
            throw std::invalid_argument("PhaseMesh: boundaries must span [0, 1]");
        for (std::size_t k = 1; k < boundaries.size(); ++k)
            if (boundaries[k] <= boundaries[k - 1])
                throw std::invalid_argument("PhaseMesh: boundaries must increase");
        for (int p : orders)
            if (p < 1) throw std::invalid_argument("PhaseMesh: order must be >= 1");
    }
};

/// Segment count and collocation order per mission phase 1..9.
inline PhaseMesh mission_phase_mesh(int mission_index) {
    switch (mission_index) {
        case 1: return PhaseMesh::uniform(1, 5);
        case 2: return PhaseMesh::uniform(1, 19);
        case 3: return PhaseMesh::uniform(1, 5);
        case 4: return PhaseMesh::uniform(1, 9);
        case 5: return PhaseMesh::uniform(1, 19);
        case 6: return PhaseMesh::uniform(1, 19);
        case 7: return PhaseMesh::uniform(1, 19);
        case 8: return PhaseMesh::uniform(5, 20);
        case 9: return PhaseMesh::uniform(5, 20);
        default: throw std::invalid_argument("mission_phase_mesh: phase out of 1..9");
    }
}

/// Receding-horizon order reduction: per-segment order scales with the
/// remaining fraction of the phase, floored at 5 nodes. Segment count and
/// boundaries are kept.
inline PhaseMesh shrink_mesh(const PhaseMesh& mesh, double remaining_fraction) {
    if (remaining_fraction <= 0.0 || remaining_fraction > 1.0)
        throw std::invalid_argument("shrink_mesh: fraction out of (0, 1]");
    PhaseMesh out = mesh;
    for (auto& p : out.orders)
        p = std::max<long>(5, std::lround(p * remaining_fraction));
    return out;
}

} // namespace ascent
