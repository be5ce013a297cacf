#include "smbound/qp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace smbound {

namespace {

// Givens rotation that zeroes b into a; returns (c, s) and overwrites a with the norm.
bool givens(double& a, double& b, double& c, double& s) {
    const double h = std::hypot(a, b);
    if (h == 0.0) return false;
    c = a / h;
    s = b / h;
    a = h;
    b = 0.0;
    return true;
}

void rotate_columns(Matrix& J, Index j0, Index j1, double c, double s) {
    for (Index k = 0; k < J.rows(); ++k) {
        const double t0 = J(k, j0), t1 = J(k, j1);
        J(k, j0) = c * t0 + s * t1;
        J(k, j1) = -s * t0 + c * t1;
    }
}

class DualActiveSet {
public:
    explicit DualActiveSet(const QuadraticProgram& qp, const QpOptions& opts) : qp_(qp), opts_(opts) {}

    SolveReport run() {
        const Index n = qp_.g.size(), m = qp_.A.rows();
        SolveReport rep;
        Eigen::LLT<Matrix> llt(qp_.H);
        if (llt.info() != Eigen::Success) {
            rep.status = SolveStatus::MaxIter;
            rep.message = "Hessian is not positive definite";
            return rep;
        }
        // J = L^{-T}, so that J J^T = H^{-1}.
        const Matrix L = llt.matrixL();
        J_ = L.transpose().triangularView<Eigen::Upper>().solve(Matrix::Identity(n, n));
        R_ = Matrix::Zero(n, n);
        x_ = -llt.solve(qp_.g);
        row_norm_.resize(m);
        for (Index j = 0; j < m; ++j) row_norm_(j) = std::max(qp_.A.row(j).norm(), 1e-300);
        excluded_.assign(static_cast<std::size_t>(m), 0);
        const int max_iter = opts_.max_iter > 0 ? opts_.max_iter : static_cast<int>(10 * (n + m) + 100);
        int iters = 0;

        for (;;) {
            if (++iters > max_iter) return finish(SolveStatus::MaxIter, iters, "iteration limit");
            // Most violated constraint, measured as scaled distance.
            Index p = -1;
            double worst = -opts_.tol * (1.0 + x_.lpNorm<Eigen::Infinity>());
            const Vector s = qp_.b - qp_.A * x_;
            for (Index j = 0; j < m; ++j) {
                if (excluded_[static_cast<std::size_t>(j)] || is_active(j)) continue;
                const double v = s(j) / row_norm_(j);
                if (v < worst) {
                    worst = v;
                    p = j;
                }
            }
            if (p < 0) return finish(SolveStatus::Optimal, iters, "");

            double up = 0.0;  // multiplier of the entering constraint
            for (;;) {
                if (++iters > max_iter) return finish(SolveStatus::MaxIter, iters, "iteration limit");
                const Vector np = -qp_.A.row(p).transpose();
                const Index q = static_cast<Index>(active_.size());
                const Vector d = J_.transpose() * np;
                const Vector z = J_.rightCols(n - q) * d.tail(n - q);
                Vector r(q);
                if (q > 0) r = R_.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));
                double t1 = std::numeric_limits<double>::infinity();
                Index l = -1;
                for (Index k = 0; k < q; ++k)
                    if (r(k) > 0.0 && u_[static_cast<std::size_t>(k)] / r(k) < t1) {
                        t1 = u_[static_cast<std::size_t>(k)] / r(k);
                        l = k;
                    }
                const double slack = qp_.b(p) - qp_.A.row(p).dot(x_);
                const double zn = z.dot(np);
                const double t2 = z.squaredNorm() > 1e-28 * (1.0 + np.squaredNorm()) && zn > 0.0
                                      ? std::max(0.0, -slack) / zn
                                      : std::numeric_limits<double>::infinity();
                const double t = std::min(t1, t2);
                if (!std::isfinite(t)) return finish(SolveStatus::Infeasible, iters, "constraints are inconsistent");
                for (Index k = 0; k < q; ++k) u_[static_cast<std::size_t>(k)] -= t * r(k);
                up += t;
                if (!std::isfinite(t2)) {
                    drop(l);
                    continue;
                }
                x_ += t * z;
                if (t == t2) {
                    if (!add(p, d)) excluded_[static_cast<std::size_t>(p)] = 1;
                    else u_.push_back(up);
                    break;
                }
                drop(l);
            }
        }
    }

private:
    bool is_active(Index j) const {
        for (Index a : active_)
            if (a == j) return true;
        return false;
    }

    bool add(Index p, Vector d) {
        const Index n = d.size(), q = static_cast<Index>(active_.size());
        for (Index j = n - 1; j > q; --j) {
            double c, s;
            if (!givens(d(j - 1), d(j), c, s)) continue;
            rotate_columns(J_, j - 1, j, c, s);
        }
        if (std::abs(d(q)) <= 1e-12 * std::max(1.0, d.head(q + 1).norm())) return false;
        R_.col(q).head(q + 1) = d.head(q + 1);
        active_.push_back(p);
        return true;
    }

    void drop(Index l) {
        const Index q = static_cast<Index>(active_.size());
        active_.erase(active_.begin() + l);
        u_.erase(u_.begin() + l);
        for (Index j = l; j < q - 1; ++j) R_.col(j) = R_.col(j + 1);
        R_.col(q - 1).setZero();
        for (Index j = l; j < q - 1; ++j) {
            double c, s;
            double a = R_(j, j), b = R_(j + 1, j);
            if (!givens(a, b, c, s)) continue;
            for (Index k = j; k < q - 1; ++k) {
                const double t0 = R_(j, k), t1 = R_(j + 1, k);
                R_(j, k) = c * t0 + s * t1;
                R_(j + 1, k) = -s * t0 + c * t1;
            }
            R_(j + 1, j) = 0.0;
            rotate_columns(J_, j, j + 1, c, s);
        }
    }

    SolveReport finish(SolveStatus st, int iters, const char* msg) {
        SolveReport rep;
        rep.status = st;
        rep.x = x_;
        rep.iterations = iters;
        rep.message = msg;
        rep.objective = 0.5 * x_.dot(qp_.H * x_) + qp_.g.dot(x_);
        rep.multipliers = Vector::Zero(qp_.A.rows());
        for (std::size_t k = 0; k < active_.size(); ++k) rep.multipliers(active_[k]) = u_[k];
        const Vector s = qp_.A * x_ - qp_.b;
        rep.max_violation = s.size() ? std::max(0.0, s.maxCoeff()) : 0.0;
        return rep;
    }

    const QuadraticProgram& qp_;
    QpOptions opts_;
    Matrix J_, R_;
    Vector x_, row_norm_;
    std::vector<Index> active_;
    std::vector<double> u_;
    std::vector<char> excluded_;
};

}  // namespace

SolveReport solve_qp(const QuadraticProgram& qp, const QpOptions& opts) {
    if (qp.A.rows() != qp.b.size() || (qp.A.rows() > 0 && qp.A.cols() != qp.g.size()) ||
        qp.H.rows() != qp.g.size() || qp.H.cols() != qp.g.size())
        throw std::invalid_argument("solve_qp: inconsistent dimensions");
    DualActiveSet s(qp, opts);
    return s.run();
}

}  // namespace smbound
