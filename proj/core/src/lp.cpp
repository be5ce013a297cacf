#include "smbound/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace smbound {

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::MaxIter: return "max_iter";
        case SolveStatus::RestorationFailed: return "restoration_failed";
    }
    return "unknown";
}

namespace {
constexpr double kPivotTol = 1e-11;
constexpr int kBlandAfter = 50;
}  // namespace

PolytopeMaximizer::PolytopeMaximizer(const RowMatrix& G, const Vector& h, const Vector& lower,
                                     const Vector& upper, LpOptions opts)
    : r_(G.rows()), d_(G.cols()), opts_(opts) {
    G_ = G;
    h_ = h;
    row_scale_ = Vector::Ones(r_);
    row_dead_.assign(static_cast<std::size_t>(r_), 0);
    double hscale = 1.0;
    for (Index j = 0; j < r_; ++j) hscale = std::max(hscale, normalize_row(j));
    lo_ = lower.size() == d_ ? lower : Vector::Constant(d_, -std::numeric_limits<double>::infinity());
    hi_ = upper.size() == d_ ? upper : Vector::Constant(d_, std::numeric_limits<double>::infinity());
    double bscale = hscale;
    for (Index i = 0; i < d_; ++i) {
        if (std::isfinite(lo_(i))) bscale = std::max(bscale, std::abs(lo_(i)));
        if (std::isfinite(hi_(i))) bscale = std::max(bscale, std::abs(hi_(i)));
        if (std::isfinite(lo_(i)) && std::isfinite(hi_(i)) && lo_(i) > hi_(i) + opts_.tol)
            trivially_infeasible_ = true;
    }
    // Variables without a finite bound get a far-away virtual one. It only serves as a
    // starting basis; if it is still binding at the optimum the problem is unbounded.
    const double big = 1e8 * bscale;
    lo_virtual_.assign(static_cast<std::size_t>(d_), 0);
    hi_virtual_.assign(static_cast<std::size_t>(d_), 0);
    for (Index i = 0; i < d_; ++i) {
        if (!std::isfinite(lo_(i))) { lo_(i) = -big; lo_virtual_[i] = 1; }
        if (!std::isfinite(hi_(i))) { hi_(i) = big; hi_virtual_[i] = 1; }
    }
    head_.assign(static_cast<std::size_t>(d_), -1);
    where_.assign(static_cast<std::size_t>(r_ + 2 * d_), -1);
}

double PolytopeMaximizer::normalize_row(Index j) {
    const double nrm = G_.row(j).norm();
    if (nrm < 1e-300) {
        row_dead_[j] = 1;
        if (h_(j) < -opts_.tol) trivially_infeasible_ = true;
        return 0.0;
    }
    row_scale_(j) = nrm;
    G_.row(j) /= nrm;
    h_(j) /= nrm;
    return std::abs(h_(j));
}

void PolytopeMaximizer::add_rows(const RowMatrix& G, const Vector& h) {
    const Index a = G.rows();
    if (a == 0) return;
    if (G.cols() != d_ || h.size() != a) throw std::invalid_argument("add_rows: dimension mismatch");
    const Index r0 = r_;
    G_.conservativeResize(r0 + a, Eigen::NoChange);
    G_.bottomRows(a) = G;
    h_.conservativeResize(r0 + a);
    h_.tail(a) = h;
    row_scale_.conservativeResize(r0 + a);
    row_scale_.tail(a).setOnes();
    row_dead_.resize(static_cast<std::size_t>(r0 + a), 0);
    r_ = r0 + a;
    for (Index j = r0; j < r_; ++j) normalize_row(j);
    // Bound columns follow the rows, so their indices shift by a.
    where_.assign(static_cast<std::size_t>(r_ + 2 * d_), -1);
    for (Index k = 0; k < d_; ++k) {
        if (head_[k] >= r0) head_[k] += a;
        if (head_[k] >= 0) where_[head_[k]] = k;
    }
    if (have_basis_) {
        slack_.conservativeResize(r_);
        slack_.tail(a) = h_.tail(a) - G_.bottomRows(a) * x_;
    }
}

void PolytopeMaximizer::load_column(Index j, Vector& out) const {
    if (j < r_) {
        out = G_.row(j).transpose();
        return;
    }
    out.setZero(d_);
    if (j < r_ + d_) out(j - r_) = 1.0;
    else out(j - r_ - d_) = -1.0;
}

double PolytopeMaximizer::column_cost(Index j) const {
    if (j < r_) return h_(j);
    if (j < r_ + d_) return hi_(j - r_);
    return -lo_(j - r_ - d_);
}

double PolytopeMaximizer::reduced_cost(Index j) const {
    if (j < r_) return slack_(j);
    if (j < r_ + d_) return hi_(j - r_) - x_(j - r_);
    Index i = j - r_ - d_;
    return x_(i) - lo_(i);
}

void PolytopeMaximizer::recompute_primal_point() {
    Vector cB(d_);
    for (Index k = 0; k < d_; ++k) cB(k) = column_cost(head_[k]);
    x_.noalias() = Binv_.transpose() * cB;
    slack_ = h_;
    slack_.noalias() -= G_ * x_;
}

bool PolytopeMaximizer::refactor() {
    Matrix B(d_, d_);
    Vector col;
    for (Index k = 0; k < d_; ++k) {
        load_column(head_[k], col);
        B.col(k) = col;
    }
    Eigen::PartialPivLU<Matrix> lu(B);
    if (!(lu.rcond() > 1e-14)) return false;
    Binv_ = lu.inverse();
    since_refactor_ = 0;
    recompute_primal_point();
    return true;
}

void PolytopeMaximizer::pivot(Index r, Index q, const Vector& delta) {
    const double piv = delta(r);
    Eigen::RowVectorXd rowr = Binv_.row(r) / piv;
    Binv_.noalias() -= delta * rowr;
    Binv_.row(r) = rowr;
    where_[head_[r]] = -1;
    head_[r] = q;
    where_[q] = r;
    ++since_refactor_;
    ++total_pivots_;
}

void PolytopeMaximizer::cold_basis(const Vector& c) {
    std::fill(where_.begin(), where_.end(), -1);
    Binv_ = Matrix::Zero(d_, d_);
    for (Index i = 0; i < d_; ++i) {
        bool up;
        if (c(i) > 0) up = true;
        else if (c(i) < 0) up = false;
        else up = !hi_virtual_[i] || lo_virtual_[i];
        Index j = up ? r_ + i : r_ + d_ + i;
        head_[i] = j;
        where_[j] = i;
        Binv_(i, i) = up ? 1.0 : -1.0;
    }
    since_refactor_ = 0;
    recompute_primal_point();
    wB_.noalias() = Binv_ * c;
    have_basis_ = true;
    bland_ = false;
    degenerate_run_ = 0;
}

SolveStatus PolytopeMaximizer::run_primal(const Vector& c, int& iters, int max_iter) {
    const double cscale = 1.0 + c.lpNorm<Eigen::Infinity>();
    best_obj_ = std::numeric_limits<double>::infinity();
    degenerate_run_ = 0;
    bland_ = false;
    Vector a, delta;
    while (iters < max_iter) {
        const double ptol = opts_.tol * (1.0 + x_.lpNorm<Eigen::Infinity>());
        Index q = -1;
        double best = -ptol;
        for (Index j = 0; j < r_; ++j) {
            if (row_dead_[j] || where_[j] >= 0) continue;
            double rc = slack_(j);
            if (rc < best) {
                q = j;
                if (bland_) break;
                best = rc;
            }
        }
        if (q < 0 || !bland_) {
            for (Index j = r_; j < r_ + 2 * d_; ++j) {
                if (where_[j] >= 0) continue;
                double rc = reduced_cost(j);
                if (rc < best) {
                    if (bland_ && q >= 0) break;
                    q = j;
                    best = rc;
                    if (bland_) break;
                }
            }
        }
        if (q < 0) return SolveStatus::Optimal;

        load_column(q, a);
        delta.noalias() = Binv_ * a;
        const double dtol = opts_.tol * cscale;
        const double ptol_piv = kPivotTol * std::max(1.0, delta.lpNorm<Eigen::Infinity>());
        Index r = -1;
        if (bland_) {
            double best_t = std::numeric_limits<double>::infinity();
            for (Index i = 0; i < d_; ++i) {
                if (delta(i) <= ptol_piv) continue;
                double t = std::max(0.0, wB_(i)) / delta(i);
                if (t < best_t - 1e-15 || (t <= best_t + 1e-15 && r >= 0 && head_[i] < head_[r])) {
                    best_t = t;
                    r = i;
                }
            }
        } else {
            double tmax = std::numeric_limits<double>::infinity();
            for (Index i = 0; i < d_; ++i)
                if (delta(i) > ptol_piv) tmax = std::min(tmax, (std::max(0.0, wB_(i)) + dtol) / delta(i));
            double bigd = 0.0;
            for (Index i = 0; i < d_; ++i) {
                if (delta(i) <= ptol_piv) continue;
                if (std::max(0.0, wB_(i)) / delta(i) <= tmax && delta(i) > bigd) {
                    bigd = delta(i);
                    r = i;
                }
            }
        }
        if (r < 0) return SolveStatus::Infeasible;

        const double t = std::max(0.0, wB_(r)) / delta(r);
        wB_.noalias() -= t * delta;
        wB_(r) = t;
        // Stalling is judged on the objective: Harris steps can be positive yet cycle.
        const double obj = c.dot(x_);
        if (obj < best_obj_ - 1e-12 * (1.0 + std::abs(best_obj_))) {
            best_obj_ = obj;
            degenerate_run_ = 0;
        } else {
            ++degenerate_run_;
        }
        bland_ = degenerate_run_ > kBlandAfter;
        pivot(r, q, delta);
        ++iters;
        if (since_refactor_ >= opts_.refactor_period) {
            if (!refactor()) return SolveStatus::MaxIter;
            wB_.noalias() = Binv_ * c;
        } else {
            recompute_primal_point();
        }
    }
    return SolveStatus::MaxIter;
}

SolveStatus PolytopeMaximizer::run_dual(const Vector& c, int& iters, int max_iter) {
    const double cscale = 1.0 + c.lpNorm<Eigen::Infinity>();
    best_obj_ = -std::numeric_limits<double>::infinity();
    degenerate_run_ = 0;
    bland_ = false;
    Vector rho, alpha, a, delta;
    while (iters < max_iter) {
        const double dtol = opts_.tol * cscale;
        Index r = -1;
        if (bland_) {
            for (Index i = 0; i < d_; ++i)
                if (wB_(i) < -dtol && (r < 0 || head_[i] < head_[r])) r = i;
        } else {
            double best = 0.0;
            for (Index i = 0; i < d_; ++i) {
                if (wB_(i) >= -dtol) continue;
                double score = wB_(i) * wB_(i) / std::max(1e-300, Binv_.row(i).squaredNorm());
                if (score > best) {
                    best = score;
                    r = i;
                }
            }
        }
        if (r < 0) return SolveStatus::Optimal;

        rho = Binv_.row(r).transpose();
        alpha.noalias() = G_ * rho;
        const double ptol = opts_.tol * (1.0 + x_.lpNorm<Eigen::Infinity>());
        const double atol = kPivotTol * std::max(1.0, rho.lpNorm<Eigen::Infinity>());
        auto alpha_of = [&](Index j) {
            if (j < r_) return alpha(j);
            if (j < r_ + d_) return rho(j - r_);
            return -rho(j - r_ - d_);
        };
        const Index ncols = r_ + 2 * d_;
        Index q = -1;
        if (bland_) {
            double best_t = std::numeric_limits<double>::infinity();
            for (Index j = 0; j < ncols; ++j) {
                if (where_[j] >= 0 || (j < r_ && row_dead_[j])) continue;
                double aj = alpha_of(j);
                if (aj >= -atol) continue;
                double t = std::max(0.0, reduced_cost(j)) / (-aj);
                if (t < best_t - 1e-15) {
                    best_t = t;
                    q = j;
                }
            }
        } else {
            double tmax = std::numeric_limits<double>::infinity();
            for (Index j = 0; j < ncols; ++j) {
                if (where_[j] >= 0 || (j < r_ && row_dead_[j])) continue;
                double aj = alpha_of(j);
                if (aj >= -atol) continue;
                tmax = std::min(tmax, (std::max(0.0, reduced_cost(j)) + ptol) / (-aj));
            }
            double biga = 0.0;
            for (Index j = 0; j < ncols; ++j) {
                if (where_[j] >= 0 || (j < r_ && row_dead_[j])) continue;
                double aj = alpha_of(j);
                if (aj >= -atol) continue;
                if (std::max(0.0, reduced_cost(j)) / (-aj) <= tmax && -aj > biga) {
                    biga = -aj;
                    q = j;
                }
            }
        }
        if (q < 0) return SolveStatus::Unbounded;

        const double aq = alpha_of(q);
        const double theta = std::max(0.0, reduced_cost(q)) / (-aq);
        x_.noalias() -= theta * rho;
        slack_.noalias() += theta * alpha;

        load_column(q, a);
        delta.noalias() = Binv_ * a;
        if (std::abs(delta(r)) < 1e-13) {
            if (!refactor()) return SolveStatus::MaxIter;
            wB_.noalias() = Binv_ * c;
            ++iters;
            continue;
        }
        const double t = wB_(r) / delta(r);
        wB_.noalias() -= t * delta;
        wB_(r) = t;
        const double obj = c.dot(x_);
        if (obj > best_obj_ + 1e-12 * (1.0 + std::abs(best_obj_))) {
            best_obj_ = obj;
            degenerate_run_ = 0;
        } else {
            ++degenerate_run_;
        }
        bland_ = degenerate_run_ > kBlandAfter;
        pivot(r, q, delta);
        ++iters;
        if (since_refactor_ >= opts_.refactor_period) {
            if (!refactor()) return SolveStatus::MaxIter;
            wB_.noalias() = Binv_ * c;
        }
    }
    return SolveStatus::MaxIter;
}

SolveReport PolytopeMaximizer::finish(const Vector& c, SolveStatus st, int iters) {
    SolveReport rep;
    rep.status = st;
    rep.iterations = iters;
    rep.x = x_;
    rep.objective = c.dot(x_);
    double dual_obj = 0.0;
    rep.multipliers = Vector::Zero(r_);
    for (Index k = 0; k < d_; ++k) {
        Index j = head_[k];
        dual_obj += column_cost(j) * wB_(k);
        if (j < r_) rep.multipliers(j) = wB_(k) / row_scale_(j);
    }
    rep.duality_gap = std::abs(rep.objective - dual_obj);
    double viol = 0.0;
    for (Index j = 0; j < r_; ++j)
        if (!row_dead_[j]) viol = std::max(viol, -slack_(j) * row_scale_(j));
    for (Index i = 0; i < d_; ++i) {
        if (!lo_virtual_[i]) viol = std::max(viol, lo_(i) - x_(i));
        if (!hi_virtual_[i]) viol = std::max(viol, x_(i) - hi_(i));
    }
    rep.max_violation = viol;
    return rep;
}

SolveReport PolytopeMaximizer::maximize(const Vector& c) {
    SolveReport rep;
    if (c.size() != d_) {
        rep.status = SolveStatus::MaxIter;
        rep.message = "cost vector has wrong length";
        return rep;
    }
    if (trivially_infeasible_) {
        rep.status = SolveStatus::Infeasible;
        rep.message = "constraint with zero row and negative right-hand side";
        return rep;
    }
    const int max_iter = opts_.max_iter > 0 ? opts_.max_iter : static_cast<int>(100 * d_ + 5000);
    int iters = 0;
    SolveStatus st = SolveStatus::MaxIter;
    for (int attempt = 0; attempt < 4; ++attempt) {
        bland_ = false;
        degenerate_run_ = 0;
        if (!have_basis_ || attempt == 3) {
            // A cold start from the box is dual degenerate in every coordinate with zero cost.
            // Solving first with a small deterministic cost perturbation avoids long stalls;
            // the true cost is then restored from the perturbed optimal basis.
            const double eps = 1e-6 * (1.0 + c.lpNorm<Eigen::Infinity>());
            Vector cp = c;
            for (Index i = 0; i < d_; ++i) {
                const double spread = 1.0 + static_cast<double>((i * 7919) % 101) / 101.0;
                if (c(i) > 0) cp(i) += eps * spread;
                else if (c(i) < 0) cp(i) -= eps * spread;
                else cp(i) = (!hi_virtual_[i] || lo_virtual_[i]) ? eps * spread : -eps * spread;
            }
            cold_basis(cp);
            st = run_primal(cp, iters, max_iter);
            if (st == SolveStatus::Optimal) {
                wB_.noalias() = Binv_ * c;
                bland_ = false;
                degenerate_run_ = 0;
                st = run_dual(c, iters, max_iter);
                if (st == SolveStatus::Optimal) st = run_primal(c, iters, max_iter);
            }
        } else {
            wB_.noalias() = Binv_ * c;
            st = run_dual(c, iters, max_iter);
            if (st == SolveStatus::Optimal) st = run_primal(c, iters, max_iter);
        }
        if (st == SolveStatus::MaxIter && iters < max_iter) {
            // singular basis: start over from the box
            have_basis_ = false;
            continue;
        }
        if (st != SolveStatus::Optimal) break;
        if (since_refactor_ > 0) {
            if (!refactor()) {
                have_basis_ = false;
                continue;
            }
            wB_.noalias() = Binv_ * c;
        }
        const double ptol = 10 * opts_.tol * (1.0 + x_.lpNorm<Eigen::Infinity>());
        const double dtol = 10 * opts_.tol * (1.0 + c.lpNorm<Eigen::Infinity>());
        bool clean = wB_.minCoeff() >= -dtol;
        for (Index j = 0; j < r_ && clean; ++j)
            if (!row_dead_[j] && slack_(j) < -ptol) clean = false;
        for (Index i = 0; i < d_ && clean; ++i)
            if (x_(i) < lo_(i) - ptol || x_(i) > hi_(i) + ptol) clean = false;
        if (clean) break;
        st = SolveStatus::MaxIter;
    }
    if (st == SolveStatus::Infeasible) have_basis_ = false;
    rep = finish(c, st, iters);
    if (st == SolveStatus::Optimal) {
        for (Index k = 0; k < d_; ++k) {
            Index j = head_[k];
            if (j < r_ || wB_(k) <= 10 * opts_.tol * (1.0 + c.lpNorm<Eigen::Infinity>())) continue;
            Index i = j < r_ + d_ ? j - r_ : j - r_ - d_;
            bool virt = j < r_ + d_ ? hi_virtual_[i] : lo_virtual_[i];
            if (virt) {
                rep.status = SolveStatus::Unbounded;
                rep.message = "objective unbounded along variable " + std::to_string(i);
                break;
            }
        }
    } else if (st == SolveStatus::MaxIter) {
        rep.message = "iteration limit or numerical breakdown";
    }
    return rep;
}

SolveReport solve_lp(const LinearProgram& lp, double tol) {
    LpOptions opts;
    opts.tol = tol;
    PolytopeMaximizer solver(lp.G, lp.h, lp.lower, lp.upper, opts);
    SolveReport rep = solver.maximize(-lp.c);
    rep.objective = -rep.objective;
    return rep;
}

}  // namespace smbound
