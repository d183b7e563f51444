#pragma once

// Primal-dual interior-point SOCP solver on the homogeneous self-dual
// embedding, in the style of the ECOS algorithm: Nesterov-Todd scaling,
// Mehrotra predictor-corrector, sparse LDLT of the statically regularized
// KKT system with iterative refinement, and infeasibility certificates
// from the embedding.
//
// Standard form handled internally:
//   min c'x   s.t.  A x = b,   G x + s = h,   s in R+^l x SOC(q_1..q_N)
// The public entry point converts a ConicProblemIR (orthant rows, variable
// bounds, variable cones) into this form.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <chrono>
#include <cstdio>

#include "ascent/conic.hpp"

namespace ascent {

namespace ipm {

struct Params {
    double feastol = 1e-8;
    double abstol = 1e-8;
    double reltol = 1e-8;
    double feastol_inacc = 1e-4;
    double abstol_inacc = 5e-5;
    double reltol_inacc = 5e-5;
    int max_iters = 100;
    int nitref = 25;
    double linsysacc = 1e-14;
    double static_reg = 1e-8;
    double step_damping = 0.99; // gamma
    double stepmin = 1e-6;
    double stepmax = 0.999;
    double sigmamin = 1e-4;
    double sigmamax = 1.0;
    double safeguard = 500.0;
    bool equilibrate = true;
    int equil_iters = 3;
    bool verbose = false;
};

/// One SOC block within the slack vector.
struct ConeBlock {
    int start = 0; // offset into s/z
    int dim = 0;
};

struct StandardForm {
    int n = 0, p = 0, m = 0, l = 0; // vars, eq rows, slack dim, orthant dim
    Eigen::SparseMatrix<double> A, G;
    Eigen::VectorXd c, b, h;
    std::vector<ConeBlock> cones;
};

// ============================================================
// Cone algebra
// ============================================================

class ConeOps {
  public:
    int l = 0;
    std::vector<ConeBlock> cones;

    int degree() const { return l + static_cast<int>(cones.size()); }

    /// unit element e of the cone
    Eigen::VectorXd identity(int m) const {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
        e.head(l).setOnes();
        for (const auto& c : cones) e(c.start) = 1.0;
        return e;
    }

    /// w = u o v (Jordan product); orthant part is elementwise
    Eigen::VectorXd product(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
        Eigen::VectorXd w(u.size());
        w.head(l) = u.head(l).cwiseProduct(v.head(l));
        for (const auto& c : cones) {
            auto u1 = u.segment(c.start + 1, c.dim - 1);
            auto v1 = v.segment(c.start + 1, c.dim - 1);
            w(c.start) = u.segment(c.start, c.dim).dot(v.segment(c.start, c.dim));
            w.segment(c.start + 1, c.dim - 1) = u(c.start) * v1 + v(c.start) * u1;
        }
        return w;
    }

    /// v = u \ w (inverse Jordan product)
    Eigen::VectorXd division(const Eigen::VectorXd& u, const Eigen::VectorXd& w) const {
        Eigen::VectorXd v(u.size());
        v.head(l) = w.head(l).cwiseQuotient(u.head(l));
        for (const auto& c : cones) {
            auto u1 = u.segment(c.start + 1, c.dim - 1);
            auto w1 = w.segment(c.start + 1, c.dim - 1);
            const double u0 = u(c.start), w0 = w(c.start);
            const double rho = u0 * u0 - u1.squaredNorm();
            const double zeta = u1.dot(w1);
            v(c.start) = (u0 * w0 - zeta) / rho;
            v.segment(c.start + 1, c.dim - 1) = ((zeta / u0 - w0) / rho) * u1 + w1 / u0;
        }
        return v;
    }

    /// s = r shifted into the interior of the cone along e
    Eigen::VectorXd bring_to_cone(const Eigen::VectorXd& r) const {
        double alpha = -0.99;
        for (int i = 0; i < l; ++i)
            if (r(i) <= 0.0 && -r(i) > alpha) alpha = -r(i);
        for (const auto& c : cones) {
            double res = r(c.start) - r.segment(c.start + 1, c.dim - 1).norm();
            if (res <= 0.0 && -res > alpha) alpha = -res;
        }
        Eigen::VectorXd s = r;
        alpha += 1.0;
        s.head(l).array() += alpha;
        for (const auto& c : cones) s(c.start) += alpha;
        return s;
    }
};

/// Nesterov-Todd scaling state: W with lambda = W z = W^{-T} s.
class Scaling {
  public:
    ConeOps ops;
    Eigen::VectorXd w_lp; // sqrt(s_i / z_i)
    struct SocScale {
        double eta = 1.0;      // (sres/zres)^(1/4)
        double a = 1.0;        // w_bar(0)
        Eigen::VectorXd q;     // w_bar tail
    };
    std::vector<SocScale> soc;

    void set_identity(int m) {
        w_lp = Eigen::VectorXd::Ones(ops.l);
        soc.assign(ops.cones.size(), {});
        for (std::size_t k = 0; k < ops.cones.size(); ++k) {
            soc[k].q = Eigen::VectorXd::Zero(ops.cones[k].dim - 1);
        }
        (void)m;
    }

    /// Updates W from a strictly feasible (s, z) pair; false if either has
    /// left its cone (a breakdown signal, not an expected path).
    bool update(const Eigen::VectorXd& s, const Eigen::VectorXd& z) {
        for (int i = 0; i < ops.l; ++i)
            if (s(i) <= 0.0 || z(i) <= 0.0) return false;
        w_lp = (s.head(ops.l).cwiseQuotient(z.head(ops.l))).cwiseSqrt();
        soc.resize(ops.cones.size());
        for (std::size_t k = 0; k < ops.cones.size(); ++k) {
            const auto& c = ops.cones[k];
            auto s1 = s.segment(c.start + 1, c.dim - 1);
            auto z1 = z.segment(c.start + 1, c.dim - 1);
            double sres = s(c.start) * s(c.start) - s1.squaredNorm();
            double zres = z(c.start) * z(c.start) - z1.squaredNorm();
            if (sres <= 0.0 || zres <= 0.0) return false;
            double snorm = std::sqrt(sres), znorm = std::sqrt(zres);
            Eigen::VectorXd sbar = s.segment(c.start, c.dim) / snorm;
            Eigen::VectorXd zbar = z.segment(c.start, c.dim) / znorm;
            double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
            auto& sc = soc[k];
            sc.eta = std::sqrt(snorm / znorm);
            sc.a = (0.5 / gamma) * (sbar(0) + zbar(0));
            sc.q = (0.5 / gamma) * (sbar.tail(c.dim - 1) - zbar.tail(c.dim - 1));
        }
        return true;
    }

    /// u -> W u
    Eigen::VectorXd apply(const Eigen::VectorXd& u) const {
        Eigen::VectorXd out(u.size());
        out.head(ops.l) = w_lp.cwiseProduct(u.head(ops.l));
        for (std::size_t k = 0; k < ops.cones.size(); ++k) {
            const auto& c = ops.cones[k];
            const auto& sc = soc[k];
            auto u1 = u.segment(c.start + 1, c.dim - 1);
            double zeta = sc.q.dot(u1);
            out(c.start) = sc.eta * (sc.a * u(c.start) + zeta);
            out.segment(c.start + 1, c.dim - 1) =
                sc.eta * (u1 + (u(c.start) + zeta / (1.0 + sc.a)) * sc.q);
        }
        return out;
    }

    /// dense W^2 block of one SOC: eta^2 (2 w_bar w_bar' - J)
    Eigen::MatrixXd soc_wsq(std::size_t k) const {
        const auto& sc = soc[k];
        int dim = static_cast<int>(sc.q.size()) + 1;
        Eigen::VectorXd wbar(dim);
        wbar(0) = sc.a;
        wbar.tail(dim - 1) = sc.q;
        Eigen::MatrixXd J = -Eigen::MatrixXd::Identity(dim, dim);
        J(0, 0) = 1.0;
        return sc.eta * sc.eta * (2.0 * wbar * wbar.transpose() - J);
    }
};

// ============================================================
// Solver
// ============================================================

class Solver {
  public:
    Solver(StandardForm sf, Params params = {}) : f_(std::move(sf)), prm_(params) {
        cone_.l = f_.l;
        cone_.cones = f_.cones;
        scaling_.ops = cone_;
    }

    SolveOutcome solve() {
        auto t0 = std::chrono::steady_clock::now();
        SolveOutcome out;
        if (prm_.equilibrate) equilibrate();
        setup_kkt();

        const int n = f_.n, p = f_.p, m = f_.m;
        Eigen::VectorXd rhs1(n + p + m), rhs2(n + p + m);
        rhs1.setZero();
        rhs1.segment(n, p) = f_.b;
        rhs1.tail(m) = f_.h;
        rhs2.setZero();
        rhs2.head(n) = -f_.c;

        resx0_ = std::max(1.0, f_.c.norm());
        resy0_ = std::max(1.0, f_.b.norm());
        resz0_ = std::max(1.0, f_.h.norm());

        scaling_.set_identity(m);
        update_kkt_scalings();
        ldlt_.analyzePattern(K_);
        ldlt_.factorize(K_);
        if (ldlt_.info() != Eigen::Success) {
            out.message = "initial KKT factorization failed";
            return finish(out, t0);
        }

        Eigen::VectorXd dx1(n), dy1(p), dz1(m), dx2(n), dy2(p), dz2(m);
        solve_kkt(rhs1, dx1, dy1, dz1);
        x_ = dx1;
        s_ = cone_.bring_to_cone(-dz1);
        solve_kkt(rhs2, dx2, dy2, dz2);
        y_ = dy2;
        z_ = cone_.bring_to_cone(dz2);
        tau_ = 1.0;
        kap_ = 1.0;
        rhs1.head(n) = -f_.c; // now rhs1 = [-c; b; h]

        double pres_prev = std::numeric_limits<double>::max();
        Best best;
        Status code = Status::NotConverged;

        for (iter_ = 0; iter_ <= prm_.max_iters; ++iter_) {
            compute_residuals();
            update_statistics();

            // unreliable direction safeguard
            if (iter_ > 0 && (pres_ > prm_.safeguard * pres_prev || gap_ < 0.0)) {
                restore(best);
                code = check_exit(true);
                if (code == Status::NotConverged) code = Status::Numerics;
                break;
            }
            pres_prev = pres_;

            code = check_exit(false);
            if (code != Status::NotConverged) break;

            if (iter_ > 0 && step_ == prm_.stepmin * prm_.step_damping) {
                restore(best);
                code = check_exit(true);
                if (code == Status::NotConverged) code = Status::Numerics;
                break;
            }
            if (iter_ == prm_.max_iters) {
                if (!is_better_than(best)) restore(best);
                code = check_exit(true);
                if (code == Status::NotConverged) code = Status::MaxIters;
                break;
            }
            if (std::isnan(pcost_)) {
                if (iter_ > 0 && !is_better_than(best)) {
                    restore(best);
                    code = check_exit(true);
                }
                if (code == Status::NotConverged) code = Status::Numerics;
                break;
            }

            if (iter_ == 0 || is_better_than(best)) save(best);

            if (!scaling_.update(s_, z_)) {
                restore(best);
                code = check_exit(true);
                if (code == Status::NotConverged) code = Status::Numerics;
                break;
            }
            lambda_ = scaling_.apply(z_);
            set_regularization(prm_.static_reg);
            ldlt_.factorize(K_);
            // zero pivot under extreme scalings: escalate the regularization
            // for this iteration; iterative refinement absorbs the bias
            for (int attempt = 0; attempt < 6 && ldlt_.info() != Eigen::Success; ++attempt) {
                set_regularization(cur_reg_ * 100.0);
                ldlt_.factorize(K_);
            }
            if (ldlt_.info() != Eigen::Success) {
                out.message = "KKT refactorization failed";
                code = Status::Numerics;
                break;
            }

            solve_kkt(rhs1, dx1, dy1, dz1);

            // affine (predictor) direction
            rhs2.head(n) = rx_;
            rhs2.segment(n, p) = -ry_;
            rhs2.tail(m) = s_ - rz_;
            solve_kkt(rhs2, dx2, dy2, dz2);

            const double dtau_denom =
                kap_ / tau_ - f_.c.dot(dx1) - f_.b.dot(dy1) - f_.h.dot(dz1);
            const double dtauaff =
                (rt_ - kap_ + f_.c.dot(dx2) + f_.b.dot(dy2) + f_.h.dot(dz2)) / dtau_denom;

            Eigen::VectorXd dzaff = dz2 + dtauaff * dz1;
            Eigen::VectorXd W_dzaff = scaling_.apply(dzaff);
            Eigen::VectorXd dsaff_by_W = -W_dzaff - lambda_;
            const double dkapaff = -kap_ - kap_ / tau_ * dtauaff;

            const double step_aff =
                line_search(dsaff_by_W, W_dzaff, tau_, dtauaff, kap_, dkapaff);
            const double sigma =
                std::clamp(std::pow(1.0 - step_aff, 3), prm_.sigmamin, prm_.sigmamax);

            // combined (corrector) direction
            Eigen::VectorXd ds_comb =
                cone_.product(lambda_, lambda_) + cone_.product(dsaff_by_W, W_dzaff);
            const double sigmamu = sigma * mu_;
            ds_comb.head(f_.l).array() -= sigmamu;
            for (const auto& c : f_.cones) ds_comb(c.start) -= sigmamu;

            Eigen::VectorXd lambda_div_ds = cone_.division(lambda_, ds_comb);
            Eigen::VectorXd W_lambda_div_ds = scaling_.apply(lambda_div_ds);

            const double one_minus_sigma = 1.0 - sigma;
            rhs2.head(n) = one_minus_sigma * rx_;
            rhs2.segment(n, p) = -one_minus_sigma * ry_;
            rhs2.tail(m) = -one_minus_sigma * rz_ + W_lambda_div_ds;
            solve_kkt(rhs2, dx2, dy2, dz2);

            const double bkap = kap_ * tau_ + dkapaff * dtauaff - sigmamu;
            const double dtau = (one_minus_sigma * rt_ - bkap / tau_ + f_.c.dot(dx2) +
                                 f_.b.dot(dy2) + f_.h.dot(dz2)) /
                                dtau_denom;
            dx2 += dtau * dx1;
            dy2 += dtau * dy1;
            dz2 += dtau * dz1;

            Eigen::VectorXd W_dz = scaling_.apply(dz2);
            Eigen::VectorXd ds_by_W = -(lambda_div_ds + W_dz);
            const double dkap = -(bkap + kap_ * dtau) / tau_;

            step_ = prm_.step_damping * line_search(ds_by_W, W_dz, tau_, dtau, kap_, dkap);
            Eigen::VectorXd ds = scaling_.apply(ds_by_W);

            x_ += step_ * dx2;
            y_ += step_ * dy2;
            z_ += step_ * dz2;
            s_ += step_ * ds;
            kap_ += step_ * dkap;
            tau_ += step_ * dtau;
        }

        // scale back to the problem's variables
        x_ /= tau_;
        y_ /= tau_;
        z_ /= tau_;
        s_ /= tau_;
        if (equilibrated_) {
            x_ = x_.cwiseQuotient(e_cols_);
            // y, z, s not reported; objective uses x only
        }

        switch (code) {
            case Status::Optimal:
                out.status = SolveStatus::Optimal;
                out.primal = x_;
                out.objective = c_orig_.dot(x_);
                break;
            case Status::PrimalInfeasible:
            case Status::ClosePrimalInfeasible:
                out.status = SolveStatus::Infeasible;
                break;
            case Status::DualInfeasible:
            case Status::CloseDualInfeasible:
                out.status = SolveStatus::Unbounded;
                break;
            case Status::MaxIters:
                out.status = SolveStatus::IterationLimit;
                break;
            case Status::CloseOptimal:
                out.status = SolveStatus::NumericalFailure;
                out.message = "reduced accuracy only";
                break;
            default:
                out.status = SolveStatus::NumericalFailure;
                if (out.message.empty()) out.message = "numerical problems";
        }
        return finish(out, t0);
    }

  private:
    enum class Status {
        NotConverged,
        Optimal,
        CloseOptimal,
        PrimalInfeasible,
        ClosePrimalInfeasible,
        DualInfeasible,
        CloseDualInfeasible,
        MaxIters,
        Numerics
    };

    struct Best {
        Eigen::VectorXd x, y, z, s;
        double tau = 1, kap = 1;
        double pres = std::numeric_limits<double>::max();
        double dres = std::numeric_limits<double>::max();
        double gap = std::numeric_limits<double>::max();
        double mu = std::numeric_limits<double>::max();
        double kapovert = std::numeric_limits<double>::max();
        bool set = false;
    };

    SolveOutcome finish(SolveOutcome out, std::chrono::steady_clock::time_point t0) {
        out.iterations = iter_;
        out.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return out;
    }

    // ---------- equilibration ----------

    void equilibrate() {
        const int n = f_.n, p = f_.p;
        c_orig_ = f_.c;
        e_cols_ = Eigen::VectorXd::Ones(n);
        e_rows_A_ = Eigen::VectorXd::Ones(p);
        e_rows_G_ = Eigen::VectorXd::Ones(f_.m);
        for (int it = 0; it < prm_.equil_iters; ++it) {
            Eigen::VectorXd col_max = Eigen::VectorXd::Zero(n);
            Eigen::VectorXd rowA_max = Eigen::VectorXd::Zero(p);
            Eigen::VectorXd rowG_max = Eigen::VectorXd::Zero(f_.m);
            visit(f_.A, [&](int r, int c, double v) {
                col_max(c) = std::max(col_max(c), std::abs(v));
                rowA_max(r) = std::max(rowA_max(r), std::abs(v));
            });
            visit(f_.G, [&](int r, int c, double v) {
                col_max(c) = std::max(col_max(c), std::abs(v));
                rowG_max(r) = std::max(rowG_max(r), std::abs(v));
            });
            // keep SOC row blocks uniformly scaled so the cone geometry is intact
            for (const auto& cb : f_.cones) {
                double blk = rowG_max.segment(cb.start, cb.dim).maxCoeff();
                rowG_max.segment(cb.start, cb.dim).setConstant(blk);
            }
            auto sqrt_or_one = [](Eigen::VectorXd& v) {
                // clamp so near-empty rows/columns cannot blow up the scaling
                for (int i = 0; i < v.size(); ++i)
                    v(i) = v(i) > 0.0 ? std::clamp(std::sqrt(v(i)), 1e-5, 1e5) : 1.0;
            };
            sqrt_or_one(col_max);
            sqrt_or_one(rowA_max);
            sqrt_or_one(rowG_max);
            scale_mat(f_.A, rowA_max, col_max);
            scale_mat(f_.G, rowG_max, col_max);
            e_cols_ = e_cols_.cwiseProduct(col_max);
            e_rows_A_ = e_rows_A_.cwiseProduct(rowA_max);
            e_rows_G_ = e_rows_G_.cwiseProduct(rowG_max);
        }
        f_.c = f_.c.cwiseQuotient(e_cols_);
        f_.b = f_.b.cwiseQuotient(e_rows_A_);
        f_.h = f_.h.cwiseQuotient(e_rows_G_);
        equilibrated_ = true;
    }

    template <typename F> static void visit(const Eigen::SparseMatrix<double>& M, F&& fn) {
        for (int k = 0; k < M.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(M, k); it; ++it)
                fn(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
    static void scale_mat(Eigen::SparseMatrix<double>& M, const Eigen::VectorXd& r,
                          const Eigen::VectorXd& c) {
        for (int k = 0; k < M.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(M, k); it; ++it)
                it.valueRef() /= (r(it.row()) * c(it.col()));
    }

    // ---------- KKT ----------

    void setup_kkt() {
        const int n = f_.n, p = f_.p, m = f_.m;
        if (!equilibrated_) c_orig_ = f_.c;
        const int N = n + p + m;
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(4 * (f_.A.nonZeros() + f_.G.nonZeros()) / 2 + N + 16 * f_.cones.size());
        for (int i = 0; i < n; ++i) trips.emplace_back(i, i, prm_.static_reg);
        for (int i = 0; i < p; ++i) trips.emplace_back(n + i, n + i, -prm_.static_reg);
        visit(f_.A, [&](int r, int c, double v) {
            trips.emplace_back(n + r, c, v);
            trips.emplace_back(c, n + r, v);
        });
        visit(f_.G, [&](int r, int c, double v) {
            trips.emplace_back(n + p + r, c, v);
            trips.emplace_back(c, n + p + r, v);
        });
        for (int i = 0; i < f_.l; ++i)
            trips.emplace_back(n + p + i, n + p + i, -1.0 - prm_.static_reg);
        for (const auto& cb : f_.cones)
            for (int i = 0; i < cb.dim; ++i)
                for (int j = 0; j < cb.dim; ++j)
                    trips.emplace_back(n + p + cb.start + i, n + p + cb.start + j,
                                       (i == j) ? -1.0 - prm_.static_reg : 0.0);
        K_.resize(N, N);
        K_.setFromTriplets(trips.begin(), trips.end());
        K_.makeCompressed();

        // pointers into the compressed storage for the scaling blocks and
        // the regularized diagonals
        lp_ptr_.clear();
        for (int i = 0; i < f_.l; ++i) lp_ptr_.push_back(&K_.coeffRef(n + p + i, n + p + i));
        soc_ptr_.clear();
        for (const auto& cb : f_.cones) {
            std::vector<double*> blk;
            for (int i = 0; i < cb.dim; ++i)
                for (int j = 0; j < cb.dim; ++j)
                    blk.push_back(&K_.coeffRef(n + p + cb.start + i, n + p + cb.start + j));
            soc_ptr_.push_back(std::move(blk));
        }
        xdiag_ptr_.clear();
        ydiag_ptr_.clear();
        for (int i = 0; i < n; ++i) xdiag_ptr_.push_back(&K_.coeffRef(i, i));
        for (int i = 0; i < p; ++i) ydiag_ptr_.push_back(&K_.coeffRef(n + i, n + i));
        cur_reg_ = prm_.static_reg;

        reg_sign_ = Eigen::VectorXd::Ones(N);
        reg_sign_.tail(p + m).setConstant(-1.0);
    }

    void update_kkt_scalings() {
        for (int i = 0; i < f_.l; ++i) {
            double w = scaling_.w_lp(i);
            *lp_ptr_[i] = -w * w - cur_reg_;
        }
        for (std::size_t k = 0; k < f_.cones.size(); ++k) {
            Eigen::MatrixXd Wsq = scaling_.soc_wsq(k);
            int d = f_.cones[k].dim;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    *soc_ptr_[k][i * d + j] = -Wsq(i, j) - (i == j ? cur_reg_ : 0.0);
        }
    }

    void set_regularization(double reg) {
        cur_reg_ = reg;
        for (auto* p : xdiag_ptr_) *p = reg;
        for (auto* p : ydiag_ptr_) *p = -reg;
        update_kkt_scalings();
    }

    /// LDLT solve with iterative refinement against the unregularized matrix.
    void solve_kkt(const Eigen::VectorXd& rhs, Eigen::VectorXd& dx, Eigen::VectorXd& dy,
                   Eigen::VectorXd& dz) {
        Eigen::VectorXd u = ldlt_.solve(rhs);
        const double thresh = (1.0 + rhs.lpNorm<Eigen::Infinity>()) * prm_.linsysacc;
        double prev_err = std::numeric_limits<double>::max();
        Eigen::VectorXd u_prev = u;
        for (int it = 0; it <= prm_.nitref; ++it) {
            // residual of the exact system: K_exact u = K u - reg .* u
            Eigen::VectorXd resid = rhs - (K_ * u - cur_reg_ * reg_sign_.cwiseProduct(u));
            double err = resid.lpNorm<Eigen::Infinity>();
            if (err < thresh) break;
            if (err > prev_err) {
                u = u_prev;
                break;
            }
            prev_err = err;
            u_prev = u;
            u += ldlt_.solve(resid);
        }
        dx = u.head(f_.n);
        dy = u.segment(f_.n, f_.p);
        dz = u.tail(f_.m);
    }

    // ---------- residuals, statistics, exits ----------

    void compute_residuals() {
        rx_ = -(f_.G.transpose() * z_);
        if (f_.p > 0) rx_ -= f_.A.transpose() * y_;
        hresx_ = rx_.norm();
        rx_ -= tau_ * f_.c;

        if (f_.p > 0) {
            ry_ = f_.A * x_;
            hresy_ = ry_.norm();
            ry_ -= tau_ * f_.b;
        } else {
            ry_.resize(0);
            hresy_ = 0.0;
        }

        rz_ = s_ + f_.G * x_;
        hresz_ = rz_.norm();
        rz_ -= tau_ * f_.h;

        cx_ = f_.c.dot(x_);
        by_ = f_.p > 0 ? f_.b.dot(y_) : 0.0;
        hz_ = f_.h.dot(z_);
        rt_ = kap_ + cx_ + by_ + hz_;
    }

    void update_statistics() {
        gap_ = s_.dot(z_);
        mu_ = (gap_ + kap_ * tau_) / (cone_.degree() + 1);
        kapovert_ = kap_ / tau_;
        pcost_ = cx_ / tau_;
        dcost_ = -(hz_ + by_) / tau_;
        if (pcost_ < 0.0) relgap_ = gap_ / (-pcost_);
        else if (dcost_ > 0.0) relgap_ = gap_ / dcost_;
        else relgap_ = std::numeric_limits<double>::max();

        double nx = x_.norm(), ny = y_.norm(), nz = z_.norm(), ns = s_.norm();
        double nry = f_.p > 0 ? ry_.norm() / std::max(resy0_ + nx, 1.0) : 0.0;
        double nrz = rz_.norm() / std::max(resz0_ + nx + ns, 1.0);
        pres_ = std::max(nry, nrz) / tau_;
        dres_ = rx_.norm() / std::max(resx0_ + ny + nz, 1.0) / tau_;

        pinfres_ = std::numeric_limits<double>::max();
        dinfres_ = std::numeric_limits<double>::max();
        if ((hz_ + by_) / std::max(ny + nz, 1.0) < -prm_.reltol)
            pinfres_ = hresx_ / std::max(ny + nz, 1.0);
        if (cx_ / std::max(nx, 1.0) < -prm_.reltol)
            dinfres_ = std::max(hresy_ / std::max(nx, 1.0), hresz_ / std::max(nx + ns, 1.0));

        if (prm_.verbose)
            std::printf("%3d  pc %+9.3e dc %+9.3e gap %8.2e pres %8.2e dres %8.2e k/t %8.2e mu %8.2e step %5.3f\n",
                        iter_, pcost_, dcost_, gap_, pres_, dres_, kapovert_, mu_, step_);
    }

    Status check_exit(bool reduced) {
        const double feastol = reduced ? prm_.feastol_inacc : prm_.feastol;
        const double abstol = reduced ? prm_.abstol_inacc : prm_.abstol;
        const double reltol = reduced ? prm_.reltol_inacc : prm_.reltol;

        if ((-cx_ > 0.0 || -by_ - hz_ >= -abstol) && pres_ < feastol && dres_ < feastol &&
            (gap_ < abstol || relgap_ < reltol))
            return reduced ? Status::CloseOptimal : Status::Optimal;
        if (dinfres_ < feastol && tau_ < kap_)
            return reduced ? Status::CloseDualInfeasible : Status::DualInfeasible;
        if ((pinfres_ < feastol && tau_ < kap_) ||
            (tau_ < feastol && kap_ < feastol && pinfres_ < feastol))
            return reduced ? Status::ClosePrimalInfeasible : Status::PrimalInfeasible;
        return Status::NotConverged;
    }

    bool is_better_than(const Best& b) const {
        if (!b.set) return true;
        return gap_ > 0.0 && b.gap > 0.0 && gap_ < b.gap && pres_ > 0.0 && pres_ < b.pres &&
               dres_ > 0.0 && dres_ < b.dres && kapovert_ > 0.0 && kapovert_ < b.kapovert &&
               mu_ > 0.0 && mu_ < b.mu;
    }
    void save(Best& b) {
        b.x = x_; b.y = y_; b.z = z_; b.s = s_;
        b.tau = tau_; b.kap = kap_;
        b.pres = pres_; b.dres = dres_; b.gap = gap_; b.mu = mu_; b.kapovert = kapovert_;
        b.set = true;
    }
    void restore(const Best& b) {
        if (!b.set) return;
        x_ = b.x; y_ = b.y; z_ = b.z; s_ = b.s;
        tau_ = b.tau; kap_ = b.kap;
        compute_residuals();
        update_statistics();
    }

    // ---------- line search ----------

    double line_search(const Eigen::VectorXd& ds, const Eigen::VectorXd& dz, double tau,
                       double dtau, double kap, double dkap) const {
        double alpha = 10.0;
        if (f_.l > 0) {
            double rhomin = (ds.head(f_.l).cwiseQuotient(lambda_.head(f_.l))).minCoeff();
            double sigmin = (dz.head(f_.l).cwiseQuotient(lambda_.head(f_.l))).minCoeff();
            const double eps = 1e-13;
            if (-sigmin > -rhomin)
                alpha = sigmin < 0.0 ? 1.0 / (-sigmin) : 1.0 / eps;
            else
                alpha = rhomin < 0.0 ? 1.0 / (-rhomin) : 1.0 / eps;
        }
        double mt = -tau / dtau, mk = -kap / dkap;
        if (mt > 0.0 && mt < alpha) alpha = mt;
        if (mk > 0.0 && mk < alpha) alpha = mk;

        for (const auto& c : f_.cones) {
            auto lam1 = lambda_.segment(c.start + 1, c.dim - 1);
            double lk2 = lambda_(c.start) * lambda_(c.start) - lam1.squaredNorm();
            if (lk2 <= 0.0) continue;
            double lknorm = std::sqrt(lk2), lkinv = 1.0 / lknorm;
            Eigen::VectorXd lkbar = lambda_.segment(c.start, c.dim) / lknorm;

            auto soc_step = [&](const Eigen::VectorXd& d) {
                auto d1 = d.segment(c.start + 1, c.dim - 1);
                double lkbar_d = lkbar(0) * d(c.start) - lkbar.tail(c.dim - 1).dot(d1);
                double factor = (lkbar_d + d(c.start)) / (lkbar(0) + 1.0);
                Eigen::VectorXd rho(c.dim);
                rho(0) = lkinv * lkbar_d;
                rho.tail(c.dim - 1) = lkinv * (d1 - factor * lkbar.tail(c.dim - 1));
                return rho.tail(c.dim - 1).norm() - rho(0);
            };
            double conic_step = std::max({0.0, soc_step(ds), soc_step(dz)});
            if (conic_step != 0.0) alpha = std::min(alpha, 1.0 / conic_step);
        }
        return std::clamp(alpha, prm_.stepmin, prm_.stepmax);
    }

    StandardForm f_;
    Params prm_;
    ConeOps cone_;
    Scaling scaling_;

    Eigen::SparseMatrix<double> K_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt_;
    std::vector<double*> lp_ptr_, xdiag_ptr_, ydiag_ptr_;
    double cur_reg_ = 1e-8;
    std::vector<std::vector<double*>> soc_ptr_;
    Eigen::VectorXd reg_sign_;

    Eigen::VectorXd x_, y_, z_, s_, lambda_;
    double tau_ = 1.0, kap_ = 1.0;
    int iter_ = 0;
    double step_ = 0.0;

    Eigen::VectorXd rx_, ry_, rz_;
    double hresx_ = 0, hresy_ = 0, hresz_ = 0;
    double cx_ = 0, by_ = 0, hz_ = 0, rt_ = 0;
    double gap_ = 0, mu_ = 0, kapovert_ = 0, pcost_ = 0, dcost_ = 0, relgap_ = 0;
    double pres_ = 0, dres_ = 0, pinfres_ = 0, dinfres_ = 0;
    double resx0_ = 1, resy0_ = 1, resz0_ = 1;

    bool equilibrated_ = false;
    Eigen::VectorXd e_cols_, e_rows_A_, e_rows_G_, c_orig_;
};

// ============================================================
// IR -> standard form
// ============================================================

inline StandardForm to_standard_form(const ConicProblemIR& ir) {
    StandardForm f;
    f.n = ir.n_vars;
    f.p = ir.n_eq();
    f.c = ir.cost;

    Eigen::SparseMatrix<double> A(f.p, f.n);
    A.setFromTriplets(ir.eq.begin(), ir.eq.end());
    f.A = std::move(A);
    f.b = ir.eq_rhs;

    // orthant rows: explicit inequalities first, then finite bounds
    std::vector<Eigen::Triplet<double>> gt(ir.ineq.begin(), ir.ineq.end());
    std::vector<double> h(ir.ineq_rhs.data(), ir.ineq_rhs.data() + ir.ineq_rhs.size());
    int row = static_cast<int>(h.size());
    for (int i = 0; i < f.n; ++i) {
        if (std::isfinite(ir.ub(i))) {
            gt.emplace_back(row++, i, 1.0);
            h.push_back(ir.ub(i));
        }
        if (std::isfinite(ir.lb(i))) {
            gt.emplace_back(row++, i, -1.0);
            h.push_back(-ir.lb(i));
        }
    }
    f.l = row;

    // keep the cone machinery alive when the problem has no inequalities
    if (row == 0 && ir.cones.empty()) {
        h.push_back(1.0);
        row = 1;
        f.l = 1;
    }

    // variable cones become unit selection rows with zero offset
    for (const auto& cone : ir.cones) {
        ConeBlock cb;
        cb.start = row;
        cb.dim = static_cast<int>(cone.indices.size());
        for (int idx : cone.indices) {
            gt.emplace_back(row++, idx, -1.0);
            h.push_back(0.0);
        }
        f.cones.push_back(cb);
    }
    f.m = row;

    Eigen::SparseMatrix<double> G(f.m, f.n);
    G.setFromTriplets(gt.begin(), gt.end());
    f.G = std::move(G);
    f.h = Eigen::Map<Eigen::VectorXd>(h.data(), static_cast<long>(h.size()));
    return f;
}

} // namespace ipm

/// Reference backend: validates the IR and solves it with the in-tree
/// interior-point method. `tweaks`, when given, overrides the numerical
/// knobs (equilibration effort, regularization) but not the tolerances.
inline SolveOutcome solve(ConicProblemIR ir, const ConicTolerances& tol = {},
                          const ipm::Params* tweaks = nullptr) {
    IrDiagnostics diag = validate(ir);
    if (!diag.ok()) {
        SolveOutcome out;
        out.status = SolveStatus::NumericalFailure;
        out.message = "malformed IR: " + diag.errors.front();
        return out;
    }
    ipm::StandardForm f = ipm::to_standard_form(ir);
    ipm::Params prm = tweaks ? *tweaks : ipm::Params{};
    prm.feastol = tol.feas_tol;
    prm.abstol = tol.abs_gap_tol;
    prm.reltol = tol.rel_gap_tol;
    prm.max_iters = tol.max_iterations;
    ipm::Solver solver(std::move(f), prm);
    return solver.solve();
}

} // namespace ascent
