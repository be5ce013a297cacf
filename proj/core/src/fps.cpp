#include "smbound/fps.hpp"

#include "smbound/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace smbound {

bool Polytope::contains(const Vector& x, double tol) const {
    if (rows() == 0) return true;
    Vector s = h - G * x;
    for (Index j = 0; j < rows(); ++j)
        if (s(j) < -tol * (1.0 + std::abs(h(j)))) return false;
    return true;
}

Polytope build_theta_p(const RegressorTable& table, double eps_hat, double d_bar_i) {
    const Index N = table.N(), n = table.dim();
    Polytope P;
    P.G.resize(2 * N, n);
    P.h.resize(2 * N);
    P.labels.resize(static_cast<std::size_t>(2 * N));
    const double w = eps_hat + d_bar_i;
    for (Index k = 0; k < N; ++k) {
        P.G.row(2 * k) = table.phi.row(k);
        P.h(2 * k) = table.y(k) + w;
        P.G.row(2 * k + 1) = -table.phi.row(k);
        P.h(2 * k + 1) = -table.y(k) + w;
        P.labels[2 * k] = {RowLabel::Kind::Data, k, 1};
        P.labels[2 * k + 1] = {RowLabel::Kind::Data, k, -1};
    }
    return P;
}

Polytope box_polytope(const Vector& lower, const Vector& upper) {
    const Index n = lower.size();
    Polytope P;
    P.G = RowMatrix::Zero(2 * n, n);
    P.h.resize(2 * n);
    P.labels.resize(static_cast<std::size_t>(2 * n));
    for (Index l = 0; l < n; ++l) {
        P.G(2 * l, l) = 1.0;
        P.h(2 * l) = upper(l);
        P.G(2 * l + 1, l) = -1.0;
        P.h(2 * l + 1) = -lower(l);
        P.labels[2 * l] = {RowLabel::Kind::Decay, l, 1};
        P.labels[2 * l + 1] = {RowLabel::Kind::Decay, l, -1};
    }
    return P;
}

Polytope build_gamma_p(const DecayEnvelope& env, int o, int m, int p, Flavor flavor) {
    Vector b = decay_box(env, flavor, o, m, p);
    return box_polytope(-b, b);
}

Polytope intersect(const Polytope& a, const Polytope& b) {
    if (a.rows() > 0 && b.rows() > 0 && a.dim() != b.dim()) throw std::invalid_argument("intersect: dimension mismatch");
    const Index n = a.rows() > 0 ? a.dim() : b.dim();
    Polytope P;
    P.G.resize(a.rows() + b.rows(), n);
    P.h.resize(a.rows() + b.rows());
    if (a.rows() > 0) {
        P.G.topRows(a.rows()) = a.G;
        P.h.head(a.rows()) = a.h;
    }
    if (b.rows() > 0) {
        P.G.bottomRows(b.rows()) = b.G;
        P.h.tail(b.rows()) = b.h;
    }
    P.labels = a.labels;
    P.labels.insert(P.labels.end(), b.labels.begin(), b.labels.end());
    return P;
}

namespace {

// Splits axis-aligned rows off into variable bounds.
void split_box(const Polytope& p, RowMatrix& G, Vector& h, Vector& lo, Vector& hi, std::vector<Index>& kept) {
    const Index n = p.dim();
    lo = Vector::Constant(n, -std::numeric_limits<double>::infinity());
    hi = Vector::Constant(n, std::numeric_limits<double>::infinity());
    kept.clear();
    for (Index j = 0; j < p.rows(); ++j) {
        Index nz = 0, at = -1;
        for (Index l = 0; l < n; ++l)
            if (p.G(j, l) != 0.0) {
                ++nz;
                at = l;
            }
        if (nz == 1) {
            const double g = p.G(j, at);
            if (g > 0) hi(at) = std::min(hi(at), p.h(j) / g);
            else lo(at) = std::max(lo(at), p.h(j) / g);
        } else {
            kept.push_back(j);
        }
    }
    G.resize(static_cast<Index>(kept.size()), n);
    h.resize(static_cast<Index>(kept.size()));
    for (std::size_t r = 0; r < kept.size(); ++r) {
        G.row(static_cast<Index>(r)) = p.G.row(kept[r]);
        h(static_cast<Index>(r)) = p.h(kept[r]);
    }
}

}  // namespace

SupportOracle::SupportOracle(const Polytope& p, double tol) {
    RowMatrix G;
    Vector h, lo, hi;
    std::vector<Index> kept;
    split_box(p, G, h, lo, hi, kept);
    LpOptions opts;
    opts.tol = tol;
    lp_ = std::make_unique<PolytopeMaximizer>(G, h, lo, hi, opts);
}

SupportResult SupportOracle::query(const Vector& c) {
    SolveReport rep = lp_->maximize(c);
    SupportResult r;
    r.status = rep.status;
    r.value = rep.objective;
    r.argmax = rep.x;
    return r;
}

SupportResult support(const Polytope& p, const Vector& c, double tol) {
    SupportOracle o(p, tol);
    return o.query(c);
}

std::vector<SupportResult> support_batch(const Polytope& p, const RowMatrix& C, double tol) {
    std::vector<SupportResult> out(static_cast<std::size_t>(C.rows()));
    const std::size_t chunks = static_cast<std::size_t>(thread_count());
    parallel_chunks(out.size(), chunks, [&](std::size_t b, std::size_t e, std::size_t) {
        SupportOracle oracle(p, tol);
        for (std::size_t k = b; k < e; ++k) {
            SupportResult r = oracle.query(C.row(static_cast<Index>(k)).transpose());
            r.argmax.resize(0);
            out[k] = std::move(r);
        }
    });
    return out;
}

bool is_empty(const Polytope& p, double tol) {
    // Phase 1: maximize -t subject to G_j x - t ||G_j|| <= h_j, t >= 0.
    const Index n = p.dim(), r = p.rows();
    if (r == 0) return false;
    RowMatrix G(r, n + 1);
    G.leftCols(n) = p.G;
    for (Index j = 0; j < r; ++j) G(j, n) = -std::max(1e-300, p.G.row(j).norm());
    Vector lo = Vector::Constant(n + 1, -std::numeric_limits<double>::infinity());
    Vector hi = Vector::Constant(n + 1, std::numeric_limits<double>::infinity());
    lo(n) = 0.0;
    Vector c = Vector::Zero(n + 1);
    c(n) = -1.0;
    LpOptions opts;
    opts.tol = tol;
    PolytopeMaximizer lp(G, p.h, lo, hi, opts);
    SolveReport rep = lp.maximize(c);
    if (rep.status != SolveStatus::Optimal) return rep.status == SolveStatus::Infeasible;
    return rep.x(n) > tol * (1.0 + p.h.lpNorm<Eigen::Infinity>());
}

Polytope remove_redundant(const Polytope& p, RedundancyStats* stats, double tol) {
    RedundancyStats st;
    st.before = p.rows();
    const Index n = p.dim();
    RowMatrix Gr;
    Vector hr, lo, hi;
    std::vector<Index> kept_rows;
    split_box(p, Gr, hr, lo, hi, kept_rows);

    std::vector<char> keep(static_cast<std::size_t>(p.rows()), 1);
    auto margin = [&](Index j, double value) {
        return p.h(j) - value > tol * std::max({1.0, std::abs(p.h(j)), std::abs(value)});
    };

    // The box alone already dominates rows whose box support stays strictly below h_j.
    Index box_removed = 0;
    if (lo.allFinite() && hi.allFinite()) {
        for (Index j : kept_rows) {
            double v = 0.0;
            for (Index l = 0; l < n; ++l) {
                const double g = p.G(j, l);
                v += g > 0 ? g * hi(l) : g * lo(l);
            }
            if (margin(j, v)) {
                keep[j] = 0;
                ++box_removed;
            }
        }
    }
    st.box_filtered = box_removed;

    // A row is redundant exactly when max G_j x over the whole set stays strictly below h_j.
    // Removing every such row at once keeps the set: a point outside it would have to cross one
    // of the removed rows at the boundary, where that row would be active. The maxima come from
    // a working set W of general rows with the box as variable bounds: the maximizer over W is
    // checked against all rows and the most violated ones join W until it is feasible, which
    // makes the value exact while every LP stays small.
    const Index R = Gr.rows();
    const Vector rnorm = Gr.rowwise().norm().cwiseMax(1e-300);
    LpOptions lpo;
    lpo.tol = tol;
    PolytopeMaximizer lp(RowMatrix(0, n), Vector(0), lo, hi, lpo);
    std::vector<char> in_w(static_cast<std::size_t>(R), 0);
    const Index batch = std::max<Index>(n + 1, 16);
    // The maximum over W bounds the true one from above, so a value already clear of the row's
    // own bound settles redundancy without the full check.
    auto exact_max = [&](const Vector& c, Index j, double& value) {
        for (int round = 0; round < 10000; ++round) {
            SolveReport rep = lp.maximize(c);
            if (rep.status != SolveStatus::Optimal && rep.status != SolveStatus::Unbounded) return false;
            if (rep.status == SolveStatus::Optimal && margin(j, rep.objective)) {
                value = rep.objective;
                return true;
            }
            const Vector v = ((Gr * rep.x - hr).array() / rnorm.array()).matrix();
            std::vector<std::pair<double, Index>> viol;
            for (Index r = 0; r < R; ++r)
                if (!in_w[static_cast<std::size_t>(r)] && v(r) > tol * (1.0 + std::abs(hr(r)) / rnorm(r)))
                    viol.emplace_back(-v(r), r);
            if (viol.empty()) {
                value = rep.status == SolveStatus::Unbounded ? std::numeric_limits<double>::infinity() : rep.objective;
                return true;
            }
            const Index take = std::min<Index>(batch, static_cast<Index>(viol.size()));
            std::partial_sort(viol.begin(), viol.begin() + take, viol.end());
            std::sort(viol.begin(), viol.begin() + take, [](const auto& a, const auto& b) { return a.second < b.second; });
            RowMatrix Ga(take, n);
            Vector ha(take);
            for (Index t = 0; t < take; ++t) {
                const Index r = viol[static_cast<std::size_t>(t)].second;
                Ga.row(t) = Gr.row(r);
                ha(t) = hr(r);
                in_w[static_cast<std::size_t>(r)] = 1;
            }
            lp.add_rows(Ga, ha);
        }
        return false;
    };

    std::vector<Index> row_of(static_cast<std::size_t>(p.rows()), -1);
    for (std::size_t r = 0; r < kept_rows.size(); ++r) row_of[static_cast<std::size_t>(kept_rows[r])] = static_cast<Index>(r);
    Index removed = 0;
    for (Index j = 0; j < p.rows(); ++j) {
        const Index r = row_of[static_cast<std::size_t>(j)];
        if (r < 0 || !keep[j]) continue;
        double value = 0.0;
        if (!exact_max(Gr.row(r).transpose(), j, value)) {
            ++st.lp_failures;
            continue;
        }
        if (std::isfinite(value) && margin(j, value)) {
            keep[j] = 0;
            ++removed;
        }
    }
    // Axis-aligned rows: the same strict test on the bound they encode.
    for (Index j = 0; j < p.rows(); ++j) {
        if (row_of[static_cast<std::size_t>(j)] >= 0) continue;
        Vector c = p.G.row(j).transpose();
        double value = 0.0;
        if (!exact_max(c, j, value)) {
            ++st.lp_failures;
            continue;
        }
        if (std::isfinite(value) && margin(j, value)) {
            keep[j] = 0;
            ++removed;
        }
    }
    st.sweeps = 1;
    (void)removed;

    Polytope out;
    Index cnt = std::count(keep.begin(), keep.end(), 1);
    out.G.resize(cnt, n);
    out.h.resize(cnt);
    Index r = 0;
    for (Index j = 0; j < p.rows(); ++j) {
        if (!keep[j]) continue;
        out.G.row(r) = p.G.row(j);
        out.h(r) = p.h(j);
        out.labels.push_back(j < static_cast<Index>(p.labels.size()) ? p.labels[j] : RowLabel{});
        ++r;
    }
    st.after = cnt;
    if (stats) *stats = st;
    return out;
}

void dump_polytope(const std::string& path, const Polytope& p) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << std::setprecision(17);
    for (Index j = 0; j < p.rows(); ++j) {
        for (Index l = 0; l < p.dim(); ++l) out << p.G(j, l) << ' ';
        out << "| " << p.h(j) << '\n';
    }
}

FpsBundle build_fps_bundle(const Dataset& ds, Flavor flavor, int i, int o, const std::vector<int>& horizons,
                           const LambdaSeries& lambda, const DecayEnvelope& env, double d_bar_i,
                           const FpsOptions& opts) {
    FpsBundle b;
    b.i = i;
    b.flavor = flavor;
    b.o = o;
    b.m = static_cast<int>(ds.m());
    b.alpha = opts.alpha;
    b.d_bar = d_bar_i;
    b.envelope = env;
    for (int p : horizons) {
        const int stride = p > opts.stride_from ? opts.stride : 1;
        RegressorTable t = build_regressors(ds, flavor, i, p, o, Portion::Identification, stride);
        double lam = 0.0;
        auto it = std::lower_bound(lambda.p.begin(), lambda.p.end(), p);
        if (it != lambda.p.end() && *it == p) lam = lambda.values[static_cast<std::size_t>(it - lambda.p.begin())];
        else if (!lambda.p.empty() && p > lambda.p.back()) lam = lambda.values.back();
        else throw std::invalid_argument("build_fps_bundle: lambda missing at p=" + std::to_string(p));
        const double eps = opts.alpha * lam;
        Polytope P = intersect(build_theta_p(t, eps, d_bar_i), build_gamma_p(env, o, b.m, p, flavor));
        if (opts.check_empty && is_empty(P))
            throw EmptyFpsError("feasible parameter set for channel " + std::to_string(i + 1) + " at p=" +
                                std::to_string(p) +
                                " is empty: the data contradict the estimated noise bound, order or decay "
                                "envelope; revisit these estimates or collect new data");
        b.sets.emplace(p, std::move(P));
        b.eps_hat.emplace(p, eps);
        b.tables.emplace(p, std::move(t));
    }
    return b;
}

}  // namespace smbound
