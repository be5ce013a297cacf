// Random generators and brute-force oracles shared by the property tests and the
// acceptance binary.
#pragma once

#include "smbound/errorbounds.hpp"
#include "smbound/fps.hpp"
#include "smbound/lp.hpp"
#include "smbound/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace smbound::testing {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : g_(seed) {}
    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(g_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(g_); }
    int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(g_); }
    Vector vector(Index n, double a = -1.0, double b = 1.0) {
        Vector v(n);
        for (Index k = 0; k < n; ++k) v(k) = uniform(a, b);
        return v;
    }
    Vector gaussian(Index n) {
        Vector v(n);
        for (Index k = 0; k < n; ++k) v(k) = normal();
        return v;
    }
    RowMatrix matrix(Index r, Index c) {
        RowMatrix M(r, c);
        for (Index i = 0; i < r; ++i)
            for (Index j = 0; j < c; ++j) M(i, j) = normal();
        return M;
    }

private:
    std::mt19937_64 g_;
};

// Outcome of one property suite: how many cases ran, how many failed, the worst error seen.
struct SuiteResult {
    int cases = 0;
    int failures = 0;
    double worst = 0.0;
    std::string first_failure;
    bool pass() const { return cases > 0 && failures == 0; }
};

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Feasible bounded LP: rows through a random interior point, plus a box.
inline LinearProgram random_lp(Rng& rng, Index n, Index m) {
    LinearProgram lp;
    lp.c = rng.gaussian(n);
    lp.G = rng.matrix(m, n);
    const Vector x0 = rng.vector(n, -0.5, 0.5);
    lp.h = lp.G * x0 + rng.vector(m, 0.1, 1.0);
    lp.lower = Vector::Constant(n, -2.0);
    lp.upper = Vector::Constant(n, 2.0);
    return lp;
}

// All rows of an LP including its box, as G x <= h.
inline void stacked_rows(const LinearProgram& lp, RowMatrix& G, Vector& h) {
    const Index n = lp.c.size(), m = lp.G.rows();
    G = RowMatrix::Zero(m + 2 * n, n);
    h.resize(m + 2 * n);
    G.topRows(m) = lp.G;
    h.head(m) = lp.h;
    for (Index j = 0; j < n; ++j) {
        G(m + 2 * j, j) = 1.0;
        h(m + 2 * j) = lp.upper(j);
        G(m + 2 * j + 1, j) = -1.0;
        h(m + 2 * j + 1) = -lp.lower(j);
    }
}

// Vertices of {G x <= h}: every n-subset of rows with a nonsingular system whose solution is feasible.
inline std::vector<Vector> enumerate_vertices(const RowMatrix& G, const Vector& h, double tol = 1e-9) {
    const Index n = G.cols(), r = G.rows();
    std::vector<Vector> out;
    std::vector<Index> pick(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) pick[static_cast<std::size_t>(k)] = k;
    while (true) {
        Matrix A(n, n);
        Vector b(n);
        for (Index k = 0; k < n; ++k) {
            A.row(k) = G.row(pick[static_cast<std::size_t>(k)]);
            b(k) = h(pick[static_cast<std::size_t>(k)]);
        }
        Eigen::FullPivLU<Matrix> lu(A);
        if (lu.isInvertible()) {
            const Vector x = lu.solve(b);
            if (((G * x - h).array() <= tol * (1.0 + h.array().abs())).all()) out.push_back(x);
        }
        Index k = n - 1;
        while (k >= 0 && pick[static_cast<std::size_t>(k)] == r - n + k) --k;
        if (k < 0) break;
        ++pick[static_cast<std::size_t>(k)];
        for (Index j = k + 1; j < n; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
    }
    return out;
}

inline double vertex_min(const LinearProgram& lp) {
    RowMatrix G;
    Vector h;
    stacked_rows(lp, G, h);
    double best = std::numeric_limits<double>::infinity();
    for (const Vector& v : enumerate_vertices(G, h)) best = std::min(best, lp.c.dot(v));
    return best;
}

// LP solver against vertex enumeration on random 5-variable, 8-row problems.
inline SuiteResult lp_vertex_suite(int cases, std::uint64_t seed, double tol = 1e-7) {
    Rng rng(seed);
    SuiteResult r;
    for (int c = 0; c < cases; ++c) {
        const LinearProgram lp = random_lp(rng, 5, 8);
        const SolveReport s = solve_lp(lp);
        const double oracle = vertex_min(lp);
        const double err = s.ok() ? rel_err(s.objective, oracle) : std::numeric_limits<double>::infinity();
        ++r.cases;
        r.worst = std::max(r.worst, err);
        if (!(err <= tol)) {
            ++r.failures;
            if (r.first_failure.empty())
                r.first_failure = "case " + std::to_string(c) + ": lp " + std::to_string(s.objective) + " vs vertices " +
                                  std::to_string(oracle);
        }
    }
    return r;
}

// Stable random ARX one-step vector: output taps from a random stable polynomial.
inline Vector random_stable_arx(Rng& rng, int o, int m) {
    Vector roots = rng.vector(o, -0.9, 0.9);
    Vector poly = Vector::Zero(o + 1);  // monic, highest power first
    poly(0) = 1.0;
    for (int r = 0; r < o; ++r)
        for (int k = r + 1; k >= 1; --k) poly(k) -= roots(r) * poly(k - 1);
    Vector th(o + static_cast<Index>(o) * m);
    for (int l = 1; l <= o; ++l) th(l - 1) = -poly(l);
    th.tail(static_cast<Index>(o) * m) = rng.vector(static_cast<Index>(o) * m);
    return th;
}

inline Dataset random_dataset(Rng& rng, Index T, int m, int q) {
    Dataset ds;
    ds.u = Matrix(T, m);
    ds.y = Matrix(T, q);
    for (Index t = 0; t < T; ++t) {
        for (int j = 0; j < m; ++j) ds.u(t, j) = rng.normal();
        for (int j = 0; j < q; ++j) ds.y(t, j) = rng.normal();
    }
    ds.split_index = T / 2;
    return ds;
}

// Feedback simulation against the explicit multi-step vector: zhat(k+p) = phi_p(k)^T h_p(theta_1).
inline SuiteResult dual_path_suite(int cases, std::uint64_t seed, double tol = 1e-10) {
    Rng rng(seed);
    SuiteResult r;
    for (int c = 0; c < cases; ++c) {
        const int o = rng.integer(1, 4), m = rng.integer(1, 2);
        const Dataset ds = random_dataset(rng, 80, m, 1);
        IdentifiedModel model;
        model.flavor = Flavor::Arx;
        model.o = o;
        model.m = m;
        model.q = 1;
        model.theta1 = {random_stable_arx(rng, o, m)};
        const int P = rng.integer(1, 10);
        const Index k = rng.integer(o - 1, 39 - P);  // rows with k + P inside the identification half
        const Vector z = simulate_model(model, ds, 0, k, P);
        double worst = 0.0;
        for (int p = 1; p <= P; ++p) {
            const RegressorTable t = build_regressors(ds, Flavor::Arx, 0, p, o, Portion::Identification);
            const auto row = std::find(t.k.begin(), t.k.end(), k) - t.k.begin();
            if (row == static_cast<std::ptrdiff_t>(t.k.size())) {
                worst = std::numeric_limits<double>::infinity();
                break;
            }
            const double direct = t.phi.row(row).dot(model_theta_p(model, 0, p));
            worst = std::max(worst, std::abs(direct - z(p - 1)) / std::max(1.0, std::abs(direct)));
        }
        ++r.cases;
        r.worst = std::max(r.worst, worst);
        if (!(worst <= tol)) {
            ++r.failures;
            if (r.first_failure.empty()) r.first_failure = "case " + std::to_string(c) + ": rel err " + std::to_string(worst);
        }
    }
    return r;
}

// Analytic Jacobians of the horizon maps (ARX and state space) against central differences.
inline SuiteResult jacobian_suite(int cases, std::uint64_t seed, double tol = 1e-5) {
    Rng rng(seed);
    SuiteResult r;
    const double h = 1e-6;
    for (int c = 0; c < cases; ++c) {
        double worst = 0.0;
        if (c % 2 == 0) {
            const int o = rng.integer(1, 4), m = rng.integer(1, 2), P = rng.integer(1, 12);
            const Vector th = random_stable_arx(rng, o, m);
            const HorizonMaps an = arx_horizon_maps(th, o, m, P, true);
            for (Index j = 0; j < th.size(); ++j) {
                Vector tp = th, tm = th;
                tp(j) += h;
                tm(j) -= h;
                const HorizonMaps a = arx_horizon_maps(tp, o, m, P, false), b = arx_horizon_maps(tm, o, m, P, false);
                for (int p = 0; p < P; ++p) {
                    const Vector fd = (a.theta[static_cast<std::size_t>(p)] - b.theta[static_cast<std::size_t>(p)]) / (2 * h);
                    const Vector col = an.jac[static_cast<std::size_t>(p)].col(j);
                    worst = std::max(worst, (fd - col).norm() / std::max(1.0, col.norm()));
                }
            }
        } else {
            const int n = rng.integer(1, 3), m = rng.integer(1, 2), P = rng.integer(1, 8);
            Matrix A = Matrix(rng.matrix(n, n)) * (0.5 / std::sqrt(static_cast<double>(n)));
            Matrix B = rng.matrix(n, m);
            const int i = rng.integer(0, n - 1);
            const HorizonMaps an = ss_horizon_maps(A, B, i, P, true);
            const Index per = n + m;
            for (Index j = 0; j < n * per; ++j) {
                const Index row = j / per, col = j % per;
                auto bump = [&](double d) {
                    Matrix A2 = A, B2 = B;
                    if (col < n) A2(row, col) += d;
                    else B2(row, col - n) += d;
                    return ss_horizon_maps(A2, B2, i, P, false);
                };
                const HorizonMaps a = bump(h), b = bump(-h);
                for (int p = 0; p < P; ++p) {
                    const Vector fd = (a.theta[static_cast<std::size_t>(p)] - b.theta[static_cast<std::size_t>(p)]) / (2 * h);
                    const Vector cj = an.jac[static_cast<std::size_t>(p)].col(j);
                    worst = std::max(worst, (fd - cj).norm() / std::max(1.0, cj.norm()));
                }
            }
        }
        ++r.cases;
        r.worst = std::max(r.worst, worst);
        if (!(worst <= tol)) {
            ++r.failures;
            if (r.first_failure.empty()) r.first_failure = "case " + std::to_string(c) + ": rel err " + std::to_string(worst);
        }
    }
    return r;
}

// Random bounded polytope in dimension n: a box, tangent cuts and many loose (redundant) rows.
inline Polytope random_polytope(Rng& rng, Index n, Index tight, Index loose) {
    Polytope P = box_polytope(Vector::Constant(n, -1.0), Vector::Constant(n, 1.0));
    RowMatrix G(tight + loose, n);
    Vector h(tight + loose);
    for (Index k = 0; k < tight + loose; ++k) {
        Vector a = rng.gaussian(n);
        a /= a.norm();
        G.row(k) = a.transpose();
        h(k) = k < tight ? rng.uniform(0.3, 0.9) : rng.uniform(0.9, 2.5);
    }
    Polytope cuts;
    cuts.G = G;
    cuts.h = h;
    cuts.labels.assign(static_cast<std::size_t>(tight + loose), RowLabel{});
    return intersect(P, cuts);
}

// remove_redundant keeps the set: supports of original and reduced sets agree in 50 directions.
inline SuiteResult redundancy_suite(int polytopes, std::uint64_t seed, double tol = 1e-7) {
    Rng rng(seed);
    SuiteResult r;
    for (int c = 0; c < polytopes; ++c) {
        const Index n = rng.integer(2, 4);
        const Polytope P = random_polytope(rng, n, rng.integer(3, 10), rng.integer(10, 60));
        const Polytope R = remove_redundant(P);
        double worst = 0.0;
        for (int d = 0; d < 50; ++d) {
            const Vector dir = rng.gaussian(n);
            const SupportResult a = support(P, dir), b = support(R, dir);
            worst = std::max(worst, std::abs(a.value - b.value) / std::max(1.0, std::abs(a.value)));
        }
        ++r.cases;
        r.worst = std::max(r.worst, worst);
        if (!(worst <= tol) || R.rows() > P.rows()) {
            ++r.failures;
            if (r.first_failure.empty()) r.first_failure = "polytope " + std::to_string(c) + ": rel err " + std::to_string(worst);
        }
    }
    return r;
}

// When tau_max sits below (tau_pbar + d chi) / (1 - chi), the iterated bound never exceeds tau_inf.
inline SuiteResult no_overshoot_suite(int series, std::uint64_t seed) {
    Rng rng(seed);
    SuiteResult r;
    for (int c = 0; c < series; ++c) {
        const int p_bar = rng.integer(5, 40), o = rng.integer(1, 4);
        const double chi = rng.uniform(0.01, 0.95), d = rng.uniform(0.0, 2.0);
        const double tp = rng.uniform(0.1, 5.0);
        const double limit = (tp + d * chi) / (1.0 - chi);
        std::map<int, double> s;
        for (int p = 1; p <= p_bar; ++p) s[p] = rng.uniform(0.0, 1.0) * limit * 0.999;
        s[p_bar] = std::min(tp, limit * 0.999);
        const double tau_pbar = s[p_bar];
        const double lim2 = (tau_pbar + d * chi) / (1.0 - chi);
        for (auto& [p, v] : s) v = std::min(v, lim2 * 0.999);
        const double t_inf = tau_infinity(tau_pbar, chi, d);
        double worst = 0.0;
        for (int p = p_bar + 1; p <= 12 * p_bar; ++p) {
            const double v = iterate_tau(s, chi, d, o, p_bar, p);
            worst = std::max(worst, (v - t_inf) / t_inf);
        }
        ++r.cases;
        r.worst = std::max(r.worst, worst);
        if (worst > 1e-12) {
            ++r.failures;
            if (r.first_failure.empty()) r.first_failure = "series " + std::to_string(c) + ": overshoot " + std::to_string(worst);
        }
    }
    return r;
}

}  // namespace smbound::testing
