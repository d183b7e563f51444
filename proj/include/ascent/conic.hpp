#pragma once

// Solver-agnostic SOCP intermediate representation. A subproblem is
//
//   minimize    cost' x
//   subject to  eq rows:    A x  = b
//               ineq rows:  G x <= h          (nonnegative orthant)
//               cones:      x[head] >= || x[tail] ||_2
//               bounds:     lb <= x <= ub     (+-inf allowed)
//
// Any interior-point backend that honors this contract can be plugged in.

#include <Eigen/Sparse>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace ascent {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct ConicProblemIR {
    int n_vars = 0;
    Eigen::VectorXd cost;

    std::vector<Eigen::Triplet<double>> eq;
    Eigen::VectorXd eq_rhs; // size = number of equality rows

    std::vector<Eigen::Triplet<double>> ineq;
    Eigen::VectorXd ineq_rhs;

    struct Cone {
        std::vector<int> indices; // indices[0] is the cone bound (head)
    };
    std::vector<Cone> cones;

    Eigen::VectorXd lb, ub;

    int n_eq() const { return static_cast<int>(eq_rhs.size()); }
    int n_ineq() const { return static_cast<int>(ineq_rhs.size()); }

    void init(int n) {
        n_vars = n;
        cost = Eigen::VectorXd::Zero(n);
        lb = Eigen::VectorXd::Constant(n, -kInf);
        ub = Eigen::VectorXd::Constant(n, kInf);
    }
};

struct IrDiagnostics {
    std::vector<std::string> errors;   // structural problems, reject before solving
    std::vector<std::string> warnings; // merged duplicates and similar repairs
    bool ok() const { return errors.empty(); }
};

namespace detail {

/// Sorts triplets row-major and merges duplicates in place.
inline int canonicalize_triplets(std::vector<Eigen::Triplet<double>>& t) {
    std::sort(t.begin(), t.end(), [](const auto& a, const auto& b) {
        return a.row() != b.row() ? a.row() < b.row() : a.col() < b.col();
    });
    int merged = 0;
    std::vector<Eigen::Triplet<double>> out;
    out.reserve(t.size());
    for (const auto& e : t) {
        if (!out.empty() && out.back().row() == e.row() && out.back().col() == e.col()) {
            out.back() = {e.row(), e.col(), out.back().value() + e.value()};
            ++merged;
        } else {
            out.push_back(e);
        }
    }
    t.swap(out);
    return merged;
}

} // namespace detail

/// Structural validation; merges duplicate triplets (reported as warnings)
/// and reports out-of-range indices, non-finite coefficients and malformed
/// cones as errors.
inline IrDiagnostics validate(ConicProblemIR& ir) {
    IrDiagnostics d;
    auto err = [&](const std::string& s) { d.errors.push_back(s); };

    if (ir.n_vars <= 0) err("n_vars must be positive");
    if (ir.cost.size() != ir.n_vars) err("cost size != n_vars");
    if (ir.lb.size() != ir.n_vars || ir.ub.size() != ir.n_vars) err("bounds size != n_vars");
    if (!d.errors.empty()) return d;

    for (int i = 0; i < ir.n_vars; ++i) {
        if (std::isnan(ir.cost(i))) err("NaN in cost at " + std::to_string(i));
        if (ir.lb(i) > ir.ub(i))
            err("lb > ub for variable " + std::to_string(i));
    }

    auto check_rows = [&](const std::vector<Eigen::Triplet<double>>& t,
                          const Eigen::VectorXd& rhs, const std::string& what) {
        for (const auto& e : t) {
            if (e.row() < 0 || e.row() >= rhs.size())
                err(what + " row index out of range: " + std::to_string(e.row()));
            if (e.col() < 0 || e.col() >= ir.n_vars)
                err(what + " column index out of range: " + std::to_string(e.col()));
            if (!std::isfinite(e.value()))
                err(what + " has non-finite coefficient at row " + std::to_string(e.row()));
        }
        for (int i = 0; i < rhs.size(); ++i)
            if (!std::isfinite(rhs(i)))
                err(what + " rhs non-finite at row " + std::to_string(i));
    };
    check_rows(ir.eq, ir.eq_rhs, "equality");
    check_rows(ir.ineq, ir.ineq_rhs, "inequality");

    int merged = detail::canonicalize_triplets(ir.eq) + detail::canonicalize_triplets(ir.ineq);
    if (merged > 0)
        d.warnings.push_back("merged " + std::to_string(merged) + " duplicate triplets");

    for (std::size_t k = 0; k < ir.cones.size(); ++k) {
        const auto& c = ir.cones[k];
        if (c.indices.size() < 2) {
            err("cone " + std::to_string(k) + " has fewer than 2 indices");
            continue;
        }
        for (int idx : c.indices)
            if (idx < 0 || idx >= ir.n_vars)
                err("cone " + std::to_string(k) + " references variable " + std::to_string(idx));
    }
    return d;
}

// ============================================================
// Solve outcome
// ============================================================

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure, IterationLimit };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::NumericalFailure: return "numerical-failure";
        case SolveStatus::IterationLimit: return "iteration-limit";
    }
    return "?";
}

struct ConicTolerances {
    double feas_tol = 1e-8;
    double abs_gap_tol = 1e-8;
    double rel_gap_tol = 1e-8;
    int max_iterations = 100;
};

struct SolveOutcome {
    SolveStatus status = SolveStatus::NumericalFailure;
    Eigen::VectorXd primal; // present iff status == Optimal
    double objective = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    double wall_time_s = 0.0;
    std::string message;
};

} // namespace ascent
