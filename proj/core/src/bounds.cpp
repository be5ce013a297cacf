#include "smbound/bounds.hpp"

#include "smbound/lp.hpp"
#include "smbound/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace smbound {

namespace {

// Variables (theta, s); rows  phi^T theta - s <= y + d  and  -phi^T theta - s <= -y + d.
// Solved by row generation: start from evenly spaced samples, add the most violated ones and
// resume from the previous basis. The subset optimum is a lower bound that equals the full
// optimum once no sample is violated.
LambdaResult solve_band(const RegressorTable& t, double d, double omega, double tol) {
    const Index N = t.N(), n = t.dim();
    const Index start = std::min<Index>(N, std::max<Index>(4 * (n + 1), 200));
    const Index batch = std::max<Index>(n + 1, 50);
    std::vector<char> in(static_cast<std::size_t>(N), 0);
    auto rows_for = [&](const std::vector<Index>& ks, RowMatrix& G, Vector& h) {
        const Index a = static_cast<Index>(ks.size());
        G.resize(2 * a, n + 1);
        h.resize(2 * a);
        for (Index r = 0; r < a; ++r) {
            const Index k = ks[static_cast<std::size_t>(r)];
            in[static_cast<std::size_t>(k)] = 1;
            G.row(2 * r).head(n) = t.phi.row(k);
            G.row(2 * r + 1).head(n) = -t.phi.row(k);
            G(2 * r, n) = -1.0;
            G(2 * r + 1, n) = -1.0;
            h(2 * r) = t.y(k) + d;
            h(2 * r + 1) = -t.y(k) + d;
        }
    };
    std::vector<Index> ks;
    for (Index r = 0; r < start; ++r) {
        const Index k = (r * N) / start;
        if (ks.empty() || ks.back() != k) ks.push_back(k);
    }
    RowMatrix G;
    Vector h;
    rows_for(ks, G, h);
    Vector lo = Vector::Constant(n + 1, -omega);
    Vector hi = Vector::Constant(n + 1, omega);
    lo(n) = 0.0;
    hi(n) = std::numeric_limits<double>::infinity();
    Vector c = Vector::Zero(n + 1);
    c(n) = -1.0;
    LpOptions opts;
    opts.tol = tol;
    PolytopeMaximizer lp(G, h, lo, hi, opts);
    Vector row_norm(N);
    for (Index k = 0; k < N; ++k) row_norm(k) = std::sqrt(t.phi.row(k).squaredNorm() + 1.0);
    SolveReport rep;
    for (;;) {
        rep = lp.maximize(c);
        if (rep.status != SolveStatus::Optimal)
            throw std::runtime_error(std::string("lambda LP failed: ") + to_string(rep.status) + " at p=" +
                                     std::to_string(t.p));
        const double s = rep.x(n);
        const Vector viol = ((t.y - t.phi * rep.x.head(n)).cwiseAbs().array() - d - s) / row_norm.array();
        std::vector<std::pair<double, Index>> worst;
        for (Index k = 0; k < N; ++k)
            if (!in[static_cast<std::size_t>(k)] && viol(k) > tol * (1.0 + std::abs(s))) worst.emplace_back(-viol(k), k);
        if (worst.empty()) break;
        const std::size_t take = std::min<std::size_t>(worst.size(), static_cast<std::size_t>(batch));
        std::partial_sort(worst.begin(), worst.begin() + static_cast<std::ptrdiff_t>(take), worst.end());
        ks.clear();
        for (std::size_t q = 0; q < take; ++q) ks.push_back(worst[q].second);
        rows_for(ks, G, h);
        lp.add_rows(G, h);
    }
    LambdaResult out;
    out.status = rep.status;
    out.lambda = std::max(0.0, rep.x(n));
    out.theta = rep.x.head(n);
    out.omega_active = n > 0 && out.theta.lpNorm<Eigen::Infinity>() >= omega * (1 - 1e-9);
    return out;
}

}  // namespace

LambdaResult compute_lambda(const RegressorTable& table, double d_bar_i, double omega, double tol) {
    if (table.N() == 0) throw std::invalid_argument("compute_lambda: empty table");
    if (d_bar_i < 0) throw std::invalid_argument("compute_lambda: negative noise bound");
    return solve_band(table, d_bar_i, omega, tol);
}

LambdaResult chebyshev_residual(const RegressorTable& table, double omega, double tol) {
    if (table.N() == 0) throw std::invalid_argument("chebyshev_residual: empty table");
    return solve_band(table, 0.0, omega, tol);
}

LambdaSeries LambdaSeries::with_d_bar(double d) const {
    LambdaSeries s = *this;
    s.d_bar = d;
    for (std::size_t k = 0; k < s.values.size(); ++k) s.values[k] = std::max(0.0, s.residual[k] - d);
    return s;
}

double LambdaSeries::at(int horizon) const {
    auto it = std::lower_bound(p.begin(), p.end(), horizon);
    if (it == p.end() || *it != horizon) throw std::out_of_range("lambda not computed at p=" + std::to_string(horizon));
    return values[static_cast<std::size_t>(it - p.begin())];
}

std::vector<int> horizon_range(int first, int last) {
    std::vector<int> v;
    for (int p = first; p <= last; ++p) v.push_back(p);
    return v;
}

LambdaSeries lambda_series(const Dataset& ds, Flavor flavor, int i, int o, const std::vector<int>& horizons,
                           double d_bar_i, const LambdaOptions& opts) {
    LambdaSeries s;
    s.i = i;
    s.o = o;
    s.flavor = flavor;
    s.d_bar = d_bar_i;
    s.p = horizons;
    std::sort(s.p.begin(), s.p.end());
    auto res = parallel_map<LambdaResult>(s.p.size(), [&](std::size_t k) {
        RegressorTable t = build_regressors(ds, flavor, i, s.p[k], o, Portion::Identification);
        return chebyshev_residual(t, opts.omega, opts.tol);
    });
    for (auto& r : res) {
        s.residual.push_back(r.lambda);
        s.values.push_back(std::max(0.0, r.lambda - d_bar_i));
        s.omega_active.push_back(r.omega_active ? 1 : 0);
        if (opts.keep_theta) s.theta_p_opt.push_back(std::move(r.theta));
    }
    return s;
}

namespace {

struct Plateau {
    bool found = false;
    double e_d = 0.0;
    double range = 0.0, mean = 0.0;
};

Plateau detect_plateau(const std::vector<double>& v, const PlateauOptions& o) {
    Plateau pl;
    const std::size_t W = static_cast<std::size_t>(o.window);
    if (v.size() < W || W == 0) return pl;
    auto b = v.end() - static_cast<std::ptrdiff_t>(W);
    auto [mn, mx] = std::minmax_element(b, v.end());
    pl.mean = std::accumulate(b, v.end(), 0.0) / static_cast<double>(W);
    pl.range = *mx - *mn;
    pl.found = pl.range < std::max(o.abs_range, o.rel_range * pl.mean);
    // the window maximum, not its mean: the corrected bound must silence every
    // trailing horizon, which the verification step requires
    pl.e_d = *mx;
    return pl;
}

void extend_series(LambdaSeries& s, const Dataset& ds, int p_to, const LambdaOptions& opts) {
    int from = s.p.empty() ? 1 : s.p.back() + 1;
    if (p_to < from) return;
    LambdaSeries more = lambda_series(ds, s.flavor, s.i, s.o, horizon_range(from, p_to), s.d_bar, opts);
    s.p.insert(s.p.end(), more.p.begin(), more.p.end());
    s.residual.insert(s.residual.end(), more.residual.begin(), more.residual.end());
    s.values.insert(s.values.end(), more.values.begin(), more.values.end());
    s.omega_active.insert(s.omega_active.end(), more.omega_active.begin(), more.omega_active.end());
    s.theta_p_opt.insert(s.theta_p_opt.end(), more.theta_p_opt.begin(), more.theta_p_opt.end());
}

}  // namespace

NoiseBoundEstimate estimate_noise_bound(const Dataset& ds, Flavor flavor, int o_init, const Vector& d_init,
                                        const NoiseBoundOptions& opts) {
    const Index q = ds.q();
    if (d_init.size() != q) throw std::invalid_argument("estimate_noise_bound: d_init has wrong length");
    NoiseBoundEstimate est;
    est.d_init = d_init;
    est.d_bar = d_init;
    est.e_d = Vector::Zero(q);
    est.delta = opts.delta;
    est.converged.assign(static_cast<std::size_t>(q), 0);
    est.p_max = opts.p_max;
    for (Index i = 0; i < q; ++i) {
        const int o = flavor == Flavor::Arx ? o_init : static_cast<int>(q);
        LambdaSeries s = lambda_series(ds, flavor, static_cast<int>(i), o, horizon_range(1, opts.p_max),
                                       d_init(i), opts.lp);
        Plateau pl = detect_plateau(s.values, opts.plateau);
        int p_max = opts.p_max;
        while (!pl.found && 2 * p_max <= opts.p_max_cap) {
            p_max *= 2;
            extend_series(s, ds, p_max, opts.lp);
            pl = detect_plateau(s.values, opts.plateau);
        }
        est.p_max = std::max(est.p_max, p_max);
        est.e_d(i) = pl.e_d;
        est.d_bar(i) = d_init(i) + pl.e_d;
        std::string diag = "channel " + std::to_string(i + 1) + ": ";
        if (!pl.found) {
            diag += "no plateau up to p=" + std::to_string(p_max) + " (window range " + std::to_string(pl.range) +
                    ", mean " + std::to_string(pl.mean) + ")";
        } else {
            // step 4: the corrected bound must drive lambda below delta on the window
            LambdaSeries chk = s.with_d_bar(est.d_bar(i));
            bool ok = true;
            for (std::size_t k = chk.values.size() - static_cast<std::size_t>(opts.plateau.window); k < chk.values.size(); ++k)
                ok = ok && chk.values[k] < opts.delta;
            est.converged[i] = ok ? 1 : 0;
            diag += ok ? "plateau e_d=" + std::to_string(pl.e_d) : "verification failed";
        }
        est.diagnostics.push_back(diag);
        est.series.push_back(std::move(s));
    }
    return est;
}

int compute_p_bar(const LambdaSeries& lambda, double delta) {
    if (lambda.values.empty()) throw std::invalid_argument("compute_p_bar: empty series");
    if (lambda.values.back() >= delta)
        throw std::runtime_error("lambda does not fall below delta by p=" + std::to_string(lambda.p.back()) +
                                 "; increase p_max or revisit the noise bound");
    std::size_t k = lambda.values.size();
    while (k > 0 && lambda.values[k - 1] < delta) --k;
    return k == lambda.values.size() ? lambda.p.back() : lambda.p[k];
}

OrderEstimate estimate_order(const Dataset& ds, Flavor flavor, const Vector& d_bar, int o_start,
                             const std::vector<int>& p_bar, const OrderOptions& opts) {
    OrderEstimate est;
    const Index q = ds.q();
    if (flavor == Flavor::StateSpace) {
        est.o = static_cast<int>(q);
        est.per_channel.assign(static_cast<std::size_t>(q), est.o);
        est.notes.push_back("state-space flavor: order fixed by the state dimension");
        return est;
    }
    const int batch = std::max(1, thread_count());
    est.failing_series.resize(static_cast<std::size_t>(q));
    for (Index i = 0; i < q; ++i) {
        const double thr = opts.delta + opts.rel_tol * d_bar(i);
        int found = 1;
        bool failed_somewhere = false;
        for (int o = o_start - 1; o >= 1 && !failed_somewhere; --o) {
            // evaluate p > p_bar in batches and stop at the first violation
            LambdaSeries acc;
            acc.i = static_cast<int>(i);
            acc.o = o;
            acc.flavor = flavor;
            acc.d_bar = d_bar(i);
            for (int p0 = p_bar[i] + 1; p0 <= opts.p_max && !failed_somewhere; p0 += batch) {
                int p1 = std::min(opts.p_max, p0 + batch - 1);
                LambdaSeries s = lambda_series(ds, flavor, static_cast<int>(i), o, horizon_range(p0, p1), d_bar(i), opts.lp);
                for (std::size_t k = 0; k < s.p.size(); ++k) {
                    acc.p.push_back(s.p[k]);
                    acc.residual.push_back(s.residual[k]);
                    acc.values.push_back(s.values[k]);
                    if (s.values[k] > thr) failed_somewhere = true;
                }
            }
            if (failed_somewhere) {
                found = o + 1;
                est.failing_series[i] = acc;
                est.notes.push_back("channel " + std::to_string(i + 1) + ": order " + std::to_string(o) +
                                    " leaves lambda above threshold beyond p_bar=" + std::to_string(p_bar[i]));
            }
        }
        if (!failed_somewhere) {
            est.reached_one = true;
            est.notes.push_back("channel " + std::to_string(i + 1) + ": no failure down to order 1");
        }
        est.per_channel.push_back(found);
    }
    est.o = *std::max_element(est.per_channel.begin(), est.per_channel.end());
    return est;
}

double envelope_value(const DecayEnvelope& env, int p) { return env.L_prime * std::pow(env.rho_hat, p + 1); }

Vector decay_box(const DecayEnvelope& env, Flavor flavor, int o, int m, int p) {
    const Index dim = regressor_dim(flavor, o, m, p);
    Vector b(dim);
    const double r = env.rho_hat;
    if (flavor == Flavor::Arx) {
        for (int l = 1; l <= o; ++l) b(l - 1) = env.L_hat * std::pow(r, p + l);
        for (Index l = 1; l <= dim - o; ++l) b(o + l - 1) = env.L_u * std::pow(r, static_cast<double>((l + m - 1) / m));
    } else {
        for (int l = 0; l < o; ++l) b(l) = env.L_hat * std::pow(r, p + 1);
        for (int s = 0; s < p; ++s)
            for (int j = 0; j < m; ++j) b(o + s * m + j) = env.L_u * std::pow(r, p - s);
    }
    return b;
}

DecayEnvelope fit_decay(const LambdaSeries& lambda, int p_bar, double norm) {
    DecayEnvelope env;
    env.i = lambda.i;
    env.p_bar = p_bar;
    std::vector<double> ps, lam;
    for (std::size_t k = 0; k < lambda.p.size(); ++k) {
        if (lambda.p[k] < 1 || lambda.p[k] > p_bar) continue;
        ps.push_back(lambda.p[k]);
        lam.push_back(lambda.values[k]);
    }
    if (lam.empty() || *std::max_element(lam.begin(), lam.end()) <= 0.0) {
        env.degenerate = true;
        env.rho_hat = 0.5;
        env.L_hat = 0.0;
        env.L_prime = 0.0;
        return env;
    }
    // For fixed rho the smallest dominating L' is max_p lambda_p / rho^(p+1); the cost is
    // then a function of rho alone. Scan t = log(1 - rho), then golden-section the best bracket.
    auto logL = [&](double rho) {
        double lr = std::log(rho), best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < lam.size(); ++k)
            if (lam[k] > 0) best = std::max(best, std::log(lam[k]) - (ps[k] + 1) * lr);
        return best;
    };
    auto cost = [&](double t) {
        double rho = 1.0 - std::exp(t);
        double ll = logL(rho), lr = std::log(rho), c = 0.0;
        for (std::size_t k = 0; k < lam.size(); ++k) {
            double g = std::exp(ll + (ps[k] + 1) * lr);
            c += (lam[k] - g) * (lam[k] - g);
        }
        return c;
    };
    const double t_lo = std::log(1e-7), t_hi = std::log(0.999);
    const int grid = 800;
    int best_k = 0;
    double best_c = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= grid; ++k) {
        double t = t_lo + (t_hi - t_lo) * k / grid;
        double c = cost(t);
        if (c < best_c) {
            best_c = c;
            best_k = k;
        }
    }
    double a = t_lo + (t_hi - t_lo) * std::max(0, best_k - 1) / grid;
    double b = t_lo + (t_hi - t_lo) * std::min(grid, best_k + 1) / grid;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = cost(x1), f2 = cost(x2);
    for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
        if (f1 < f2) {
            b = x2; x2 = x1; f2 = f1; x1 = b - gr * (b - a); f1 = cost(x1);
        } else {
            a = x1; x1 = x2; f1 = f2; x2 = a + gr * (b - a); f2 = cost(x2);
        }
    }
    double t = 0.5 * (a + b);
    if (cost(t) > best_c) t = t_lo + (t_hi - t_lo) * best_k / grid;
    env.rho_hat = 1.0 - std::exp(t);
    env.L_prime = std::exp(logL(env.rho_hat)) * (1.0 + 1e-12);
    env.L_hat = norm > 0 ? env.L_prime / norm : 0.0;
    env.L_u = env.L_hat;
    return env;
}

}  // namespace smbound
