#include "smbound/errorbounds.hpp"

#include "smbound/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace smbound {

RowSupports row_supports(const Polytope& set, const RegressorTable& table, double tol) {
    const Index N = table.N();
    RowMatrix C(2 * N, table.dim());
    for (Index k = 0; k < N; ++k) {
        C.row(2 * k) = table.phi.row(k);
        C.row(2 * k + 1) = -table.phi.row(k);
    }
    const auto res = support_batch(set, C, tol);
    RowSupports s;
    s.upper.resize(N);
    s.lower.resize(N);
    const double inf = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < N; ++k) {
        const auto& up = res[static_cast<std::size_t>(2 * k)];
        const auto& lo = res[static_cast<std::size_t>(2 * k + 1)];
        if (up.status == SolveStatus::Infeasible || lo.status == SolveStatus::Infeasible)
            throw EmptyFpsError("support query on an empty feasible parameter set: the data contradict the "
                                "estimated bounds");
        s.upper(k) = up.status == SolveStatus::Optimal ? up.value : inf;
        s.lower(k) = lo.status == SolveStatus::Optimal ? -lo.value : -inf;
        if (up.status != SolveStatus::Optimal) ++s.failures;
        if (lo.status != SolveStatus::Optimal) ++s.failures;
    }
    return s;
}

double parametric_error(const RowSupports& s, const RegressorTable& table, const Vector& theta_p) {
    const Vector v = table.phi * theta_p;
    double worst = 0.0;
    for (Index k = 0; k < v.size(); ++k) worst = std::max({worst, s.upper(k) - v(k), v(k) - s.lower(k)});
    return worst;
}

double tau_from_supports(const RowSupports& s, const RegressorTable& table, const Vector& theta_p, double gamma,
                         double eps_hat) {
    return gamma * parametric_error(s, table, theta_p) + eps_hat;
}

double compute_tau_p(const IdentifiedModel& model, const FpsBundle& fps, int p, double gamma) {
    const auto set = fps.sets.find(p);
    if (set == fps.sets.end()) throw std::invalid_argument("compute_tau_p: no feasible set at p=" + std::to_string(p));
    const RegressorTable& t = fps.tables.at(p);
    if (is_empty(set->second))
        throw EmptyFpsError("feasible parameter set at p=" + std::to_string(p) +
                            " is empty: the data contradict the estimated bounds");
    const RowSupports s = row_supports(set->second, t);
    return tau_from_supports(s, t, model_theta_p(model, fps.i, p), gamma, fps.eps_hat.at(p));
}

double chi_value(const DecayEnvelope& env, Flavor flavor, int o, int p_bar) {
    const double base = env.L_hat * std::pow(env.rho_hat, p_bar + 1);
    return flavor == Flavor::Arx ? o * base : base;
}

namespace {

void require_contraction(double chi) {
    if (!(chi < 1.0))
        throw ContractionError("chi = " + std::to_string(chi) +
                               " >= 1: the long-horizon bound does not converge; choose a larger p_bar");
}

// max of computed entries with index in [lo, hi]; bridges to the nearest computed neighbours
// when the window holds none.
double window_max(const std::map<int, double>& series, int lo, int hi, bool* bridged) {
    double best = -std::numeric_limits<double>::infinity();
    for (auto it = series.lower_bound(lo); it != series.end() && it->first <= hi; ++it) best = std::max(best, it->second);
    if (std::isfinite(best)) return best;
    if (bridged) *bridged = true;
    auto above = series.lower_bound(lo);
    if (above != series.end()) best = std::max(best, above->second);
    if (above != series.begin()) best = std::max(best, std::prev(above)->second);
    if (!std::isfinite(best)) throw std::invalid_argument("iterate_tau: empty bound series");
    return best;
}

double iterate_impl(double tau_pbar, const std::map<int, double>& trailing, double chi, double d_bar, int window,
                    int p_bar, int p_target, bool* bridged) {
    require_contraction(chi);
    if (p_bar < 1 || p_target < 1) throw std::invalid_argument("iterate_tau: horizons must be positive");
    const int ell = (p_target - 1) / p_bar;
    const int j = p_target - ell * p_bar;
    double geo = 0.0, pw = 1.0;  // sum_{m=0}^{ell-1} chi^m and chi^ell
    for (int m = 0; m < ell; ++m) {
        geo += pw;
        pw *= chi;
        if (pw < 1e-300) {
            pw = 0.0;
            geo = 1.0 / (1.0 - chi);
            break;
        }
    }
    const double tail = chi * geo;  // sum_{m=1}^{ell} chi^m
    const int lo = std::max(1, j - ell * window), hi = std::min(j, p_bar);
    const double tmax = window_max(trailing, lo, hi, bridged);
    return tau_pbar * geo + d_bar * tail + tmax * pw;
}

}  // namespace

double iterate_tau(const std::map<int, double>& finite, double chi, double d_bar, int o, int p_bar, int p_target,
                   bool* bridged) {
    const auto it = finite.find(p_bar);
    if (it == finite.end()) throw std::invalid_argument("iterate_tau: tau_hat at p_bar is missing");
    return iterate_impl(it->second, finite, chi, d_bar, o, p_bar, p_target, bridged);
}

double iterate_tau_ss(double tau_pbar, const std::map<int, double>& l1_series, double chi, double d_bar_l1, int p_bar,
                      int p_target, bool* bridged) {
    return iterate_impl(tau_pbar, l1_series, chi, d_bar_l1, 0, p_bar, p_target, bridged);
}

double tau_infinity(double tau_pbar, double chi, double d_bar) {
    require_contraction(chi);
    return tau_pbar / (1.0 - chi) + d_bar * chi / (1.0 - chi);
}

OvershootResult overshoot_check(double tau_max, double tau_pbar, double chi, double d_bar, double delta_fraction) {
    require_contraction(chi);
    OvershootResult r;
    const double limit = (tau_pbar + d_bar * chi) / (1.0 - chi);
    r.delta = delta_fraction * tau_infinity(tau_pbar, chi, d_bar);
    r.possible = !(tau_max < limit);
    if (r.possible) {
        const double gap = std::abs(limit - tau_max);
        double v = gap;
        int ell = 0;
        while (!(v < r.delta) && ell < 100000) {
            v *= chi;
            ++ell;
        }
        r.ell_bar = ell;
    }
    return r;
}

void complete_series(TauSeries& s, const DecayEnvelope& env, const std::vector<int>& p_targets,
                     const std::map<int, double>& l1_series) {
    const bool ss = s.flavor == Flavor::StateSpace;
    s.chi = chi_value(env, s.flavor, s.o, s.p_bar);
    s.has_inf = false;
    s.iterative.clear();
    const auto it = s.finite.find(s.p_bar);
    if (it == s.finite.end()) throw std::invalid_argument("complete_series: tau_hat at p_bar is missing");
    const double tp = it->second;
    s.tau_max = 0.0;
    const auto& trailing = ss ? l1_series : s.finite;
    for (const auto& [p, v] : trailing)
        if (p <= s.p_bar) s.tau_max = std::max(s.tau_max, v);
    if (!(s.chi < 1.0)) return;
    s.tau_inf = tau_infinity(tp, s.chi, s.d_bar);
    s.has_inf = true;
    const OvershootResult ov = overshoot_check(s.tau_max, tp, s.chi, s.d_bar);
    s.overshoot_possible = ov.possible;
    s.ell_bar = ov.ell_bar;
    for (int p : p_targets) {
        if (p <= s.p_bar) continue;
        bool bridged = false;
        s.iterative[p] = ss ? iterate_tau_ss(tp, l1_series, s.chi, s.d_bar, s.p_bar, p, &bridged)
                            : iterate_tau(s.finite, s.chi, s.d_bar, s.o, s.p_bar, p, &bridged);
        s.bridged = s.bridged || bridged;
    }
}

std::vector<BoundValidation> validate_bounds(const IdentifiedModel& model, const Dataset& ds,
                                             const std::vector<TauSeries>& tau, const std::vector<int>& p_list,
                                             Portion portion) {
    const int P = p_list.empty() ? 0 : *std::max_element(p_list.begin(), p_list.end());
    const Index b = ds.begin(portion), e = ds.end(portion);
    const Index k0 = b + (model.flavor == Flavor::Arx ? model.o - 1 : 0);
    const Index k1 = e - 1 - P;  // last start sample with every horizon inside the portion
    std::vector<BoundValidation> out;
    for (const TauSeries& ts : tau) {
        const int i = ts.i;
        BoundValidation bv;
        bv.i = i;
        const double d = model.d_bar.size() > i ? model.d_bar(i) : 0.0;
        for (int p : p_list) {
            HorizonCheck h;
            h.p = p;
            if (auto f = ts.finite.find(p); f != ts.finite.end()) h.bound = f->second;
            else if (auto g = ts.iterative.find(p); g != ts.iterative.end()) h.bound = g->second;
            else if (ts.has_inf) h.bound = ts.tau_inf;
            else continue;
            h.bound += d;
            h.worst_margin = -std::numeric_limits<double>::infinity();
            bv.horizons.push_back(h);
        }
        if (k1 >= k0 && !bv.horizons.empty()) {
            const std::size_t chunks = static_cast<std::size_t>(thread_count());
            const Index n = k1 - k0 + 1;
            std::vector<std::vector<HorizonCheck>> parts(std::max<std::size_t>(chunks, 1), bv.horizons);
            parallel_chunks(static_cast<std::size_t>(n), chunks, [&](std::size_t cb, std::size_t ce, std::size_t w) {
                auto& local = parts[w];
                for (std::size_t off = cb; off < ce; ++off) {
                    const Index k = k0 + static_cast<Index>(off);
                    const Vector zh = simulate_model(model, ds, i, k, P);
                    for (auto& h : local) {
                        const double err = std::abs(ds.y(k + h.p, i) - zh(h.p - 1));
                        ++h.checked;
                        h.max_error = std::max(h.max_error, err);
                        h.worst_margin = std::max(h.worst_margin, err - h.bound);
                        if (err > h.bound) ++h.violations;
                    }
                }
            });
            for (std::size_t q = 0; q < bv.horizons.size(); ++q) {
                auto& h = bv.horizons[q];
                for (const auto& part : parts) {
                    const auto& o = part[q];
                    if (o.checked == 0) continue;
                    h.checked += o.checked;
                    h.violations += o.violations;
                    h.max_error = std::max(h.max_error, o.max_error);
                    h.worst_margin = std::max(h.worst_margin, o.worst_margin);
                }
            }
        }
        for (const auto& h : bv.horizons) {
            bv.total_checked += h.checked;
            bv.total_violations += h.violations;
        }
        out.push_back(std::move(bv));
    }
    return out;
}

}  // namespace smbound
