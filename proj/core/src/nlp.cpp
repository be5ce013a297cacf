#include "smbound/nlp.hpp"

#include "smbound/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace smbound {

namespace {

double positive_sum(const Vector& g) { return g.cwiseMax(0.0).sum(); }
double max_violation(const Vector& g) { return g.size() ? std::max(0.0, g.maxCoeff()) : 0.0; }

struct Point {
    Vector x;
    double f = 0.0;
    Vector gf;
    Vector g;
    RowMatrix J;
};

class Sqp {
public:
    Sqp(const NlpProblem& p, const NlpOptions& o) : P_(p), opts_(o) {}

    Point eval(const Vector& x, bool derivatives) const {
        Point pt;
        pt.x = x;
        pt.f = P_.cost(x, derivatives ? &pt.gf : nullptr);
        pt.g.resize(P_.n_constraints);
        if (P_.n_constraints > 0) P_.constraints(x, pt.g, derivatives ? &pt.J : nullptr);
        if (derivatives && P_.n_constraints == 0) pt.J.resize(0, x.size());
        return pt;
    }

    double merit(const Point& pt, double mu) const { return pt.f + mu * positive_sum(pt.g); }

    SolveReport run(const Vector& x0) {
        const Index n = P_.dim, m = P_.n_constraints;
        Point cur = eval(x0, true);
        Matrix B = Matrix::Identity(n, n);
        if (P_.cost_hessian) B = regularized(P_.cost_hessian(cur.x));
        double mu = 1.0;
        Vector lambda = Vector::Zero(m);
        SolveReport rep;
        for (int it = 1; it <= opts_.max_iter; ++it) {
            rep.iterations = it;
            const double delta = std::max(1.0, 10.0 * cur.x.lpNorm<Eigen::Infinity>());
            Vector d;
            bool elastic = false;
            if (!solve_subproblem(cur, B, delta, mu, d, lambda, elastic)) {
                return finish(cur, lambda, SolveStatus::MaxIter, it, "quadratic subproblem failed");
            }
            const double kkt = kkt_residual(cur, lambda);
            const double feas = max_violation(cur.g);
            const bool feasible = feas <= opts_.feas_tol;
            if (feasible && (kkt <= opts_.tol || d.lpNorm<Eigen::Infinity>() <= opts_.tol * (1.0 + cur.x.lpNorm<Eigen::Infinity>()))) {
                // Take the last short step when it keeps feasibility.
                Point last = eval(cur.x + d, true);
                if (max_violation(last.g) <= opts_.feas_tol && last.f <= cur.f + 1e-12 * (1.0 + std::abs(cur.f)))
                    return finish(last, lambda, SolveStatus::Optimal, it, "");
                return finish(cur, lambda, SolveStatus::Optimal, it, "");
            }

            const double lam_max = lambda.size() ? lambda.lpNorm<Eigen::Infinity>() : 0.0;
            if (mu < 1.1 * lam_max) mu = std::max(2.0 * lam_max, 1.5 * mu);
            const double phi0 = merit(cur, mu);
            const Vector lin = cur.g + cur.J * d;
            const double D = cur.gf.dot(d) + mu * (positive_sum(lin) - positive_sum(cur.g));
            double alpha = 1.0;
            Point next;
            bool accepted = false;
            for (int ls = 0; ls < 40; ++ls) {
                next = eval(cur.x + alpha * d, false);
                if (std::isfinite(next.f) && merit(next, mu) <= phi0 + 1e-4 * alpha * std::min(D, 0.0)) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted) {
                if (feasible && kkt <= 100.0 * opts_.tol)
                    return finish(cur, lambda, SolveStatus::Optimal, it, "line search stalled at a KKT point");
                if (!P_.cost_hessian && B != Matrix::Identity(n, n) * B(0, 0)) {
                    B = Matrix::Identity(n, n) * std::max(1e-8, B.diagonal().mean());
                    continue;
                }
                return finish(cur, lambda, SolveStatus::MaxIter, it, "line search failed");
            }
            next = eval(next.x, true);
            if (P_.cost_hessian) {
                B = regularized(P_.cost_hessian(next.x));
            } else {
                const Vector s = next.x - cur.x;
                Vector y = (next.gf - cur.gf);
                if (m > 0) y += (next.J - cur.J).transpose() * lambda;
                bfgs_update(B, s, y);
            }
            cur = std::move(next);
        }
        const double kkt = kkt_residual(cur, lambda);
        const bool ok = max_violation(cur.g) <= opts_.feas_tol && kkt <= opts_.tol;
        return finish(cur, lambda, ok ? SolveStatus::Optimal : SolveStatus::MaxIter, opts_.max_iter,
                      ok ? "" : "iteration limit");
    }

private:
    static Matrix regularized(Matrix H) {
        H = 0.5 * (H + H.transpose());
        const double scale = std::max(1e-12, H.diagonal().cwiseAbs().maxCoeff());
        H.diagonal().array() += 1e-9 * scale;
        Eigen::LLT<Matrix> llt(H);
        while (llt.info() != Eigen::Success) {
            H.diagonal().array() += 1e-6 * scale;
            llt.compute(H);
        }
        return H;
    }

    static void bfgs_update(Matrix& B, const Vector& s, Vector y) {
        const Vector Bs = B * s;
        const double sBs = s.dot(Bs);
        if (!(sBs > 1e-300)) return;
        double sy = s.dot(y);
        if (sy < 0.2 * sBs) {
            const double th = 0.8 * sBs / (sBs - sy);
            y = th * y + (1.0 - th) * Bs;
            sy = s.dot(y);
        }
        if (!(sy > 1e-300)) return;
        B += y * y.transpose() / sy - Bs * Bs.transpose() / sBs;
        B = 0.5 * (B + B.transpose());
    }

    double kkt_residual(const Point& pt, const Vector& lambda) const {
        Vector grad = pt.gf;
        if (lambda.size()) grad += pt.J.transpose() * lambda;
        const double scale = 1.0 + std::abs(pt.f);
        double comp = 0.0;
        for (Index j = 0; j < lambda.size(); ++j) comp = std::max(comp, std::abs(lambda(j) * pt.g(j)));
        return std::max({grad.lpNorm<Eigen::Infinity>() / scale, comp / scale, max_violation(pt.g)});
    }

    bool solve_subproblem(const Point& pt, const Matrix& B, double delta, double mu, Vector& d, Vector& lambda,
                          bool& elastic) const {
        const Index n = P_.dim, m = P_.n_constraints;
        QuadraticProgram qp;
        qp.H = B;
        qp.g = pt.gf;
        qp.A.resize(m + 2 * n, n);
        qp.b.resize(m + 2 * n);
        if (m > 0) {
            qp.A.topRows(m) = pt.J;
            qp.b.head(m) = -pt.g;
        }
        qp.A.middleRows(m, n) = RowMatrix::Identity(n, n);
        qp.A.bottomRows(n) = -RowMatrix::Identity(n, n);
        qp.b.tail(2 * n).setConstant(delta);
        SolveReport r = solve_qp(qp);
        if (r.status == SolveStatus::Optimal) {
            d = r.x;
            lambda = r.multipliers.head(m);
            elastic = false;
            return true;
        }
        // Elastic mode: one shared slack s >= 0 relaxes every linearized constraint.
        elastic = true;
        QuadraticProgram eq;
        eq.H = Matrix::Zero(n + 1, n + 1);
        eq.H.topLeftCorner(n, n) = B;
        eq.H(n, n) = 1.0;
        eq.g.resize(n + 1);
        eq.g.head(n) = pt.gf;
        eq.g(n) = 100.0 * std::max(mu, 1.0);
        eq.A = RowMatrix::Zero(m + 2 * n + 1, n + 1);
        eq.b.resize(m + 2 * n + 1);
        if (m > 0) {
            eq.A.topLeftCorner(m, n) = pt.J;
            eq.A.block(0, n, m, 1).setConstant(-1.0);
            eq.b.head(m) = -pt.g;
        }
        eq.A.block(m, 0, n, n) = RowMatrix::Identity(n, n);
        eq.A.block(m + n, 0, n, n) = -RowMatrix::Identity(n, n);
        eq.b.segment(m, 2 * n).setConstant(delta);
        eq.A(m + 2 * n, n) = -1.0;
        eq.b(m + 2 * n) = 0.0;
        r = solve_qp(eq);
        if (r.status != SolveStatus::Optimal) return false;
        d = r.x.head(n);
        lambda = r.multipliers.head(m);
        return true;
    }

    SolveReport finish(const Point& pt, const Vector& lambda, SolveStatus st, int it, const char* msg) const {
        SolveReport rep;
        rep.status = st;
        rep.x = pt.x;
        rep.objective = pt.f;
        rep.iterations = it;
        rep.message = msg;
        rep.max_violation = max_violation(pt.g);
        rep.multipliers = lambda;
        Point full = pt;
        if (full.gf.size() == 0) full = eval(pt.x, true);
        rep.kkt_residual = kkt_residual(full, lambda.size() == full.g.size() ? lambda : Vector::Zero(full.g.size()));
        return rep;
    }

    const NlpProblem& P_;
    NlpOptions opts_;
};

}  // namespace

SolveReport solve_nlp(const NlpProblem& nlp, const NlpOptions& opts) {
    if (nlp.x0.size() != nlp.dim || !nlp.cost || (nlp.n_constraints > 0 && !nlp.constraints))
        throw std::invalid_argument("solve_nlp: malformed problem");
    Vector x0 = nlp.x0;
    if (opts.restoration && nlp.n_constraints > 0) {
        Vector g(nlp.n_constraints);
        nlp.constraints(x0, g, nullptr);
        const double viol = max_violation(g);
        if (viol > opts.feas_tol) {
            // Feasibility phase: min t s.t. g_j(x) <= t, t >= -margin.
            const double margin = 10.0 * opts.feas_tol;
            NlpProblem r;
            r.dim = nlp.dim + 1;
            r.n_constraints = nlp.n_constraints + 1;
            r.cost = [n = nlp.dim](const Vector& xt, Vector* grad) {
                if (grad) {
                    grad->setZero(n + 1);
                    (*grad)(n) = 1.0;
                }
                return xt(n);
            };
            r.constraints = [&nlp, margin](const Vector& xt, Vector& gr, RowMatrix* jac) {
                const Index n = nlp.dim, mm = nlp.n_constraints;
                Vector gi(mm);
                RowMatrix Ji;
                nlp.constraints(xt.head(n), gi, jac ? &Ji : nullptr);
                gr.head(mm) = gi.array() - xt(n);
                gr(mm) = -xt(n) - margin;
                if (jac) {
                    jac->setZero(mm + 1, n + 1);
                    jac->topLeftCorner(mm, n) = Ji;
                    jac->block(0, n, mm, 1).setConstant(-1.0);
                    (*jac)(mm, n) = -1.0;
                }
            };
            r.x0.resize(nlp.dim + 1);
            r.x0.head(nlp.dim) = x0;
            r.x0(nlp.dim) = viol * 1.01 + margin;
            NlpOptions ro = opts;
            ro.restoration = false;
            SolveReport rr = Sqp(r, ro).run(r.x0);
            Vector xr = rr.x.head(nlp.dim);
            nlp.constraints(xr, g, nullptr);
            if (max_violation(g) > opts.feas_tol) {
                SolveReport fail;
                fail.status = SolveStatus::RestorationFailed;
                fail.x = xr;
                fail.max_violation = max_violation(g);
                fail.objective = nlp.cost(xr, nullptr);
                fail.iterations = rr.iterations;
                fail.message = "feasibility restoration failed";
                return fail;
            }
            x0 = xr;
        }
    }
    Sqp s(nlp, opts);
    return s.run(x0);
}

}  // namespace smbound
