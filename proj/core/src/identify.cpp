#include "smbound/identify.hpp"

#include "smbound/parallel.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace smbound {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

IdentifiedModel blank_model(Flavor flavor, Method method, int o, int m, int q) {
    IdentifiedModel model;
    model.flavor = flavor;
    model.method = method;
    model.o = o;
    model.m = m;
    model.q = q;
    model.theta1.resize(static_cast<std::size_t>(q));
    return model;
}

Index theta_size(Flavor flavor, int o, int m) { return flavor == Flavor::Arx ? o + static_cast<Index>(o) * m : o + m; }

// Stacked parameters of the problem: theta_1 of one ARX channel, or [A_1 B_1, ..., A_n B_n].
Vector stack_params(const IdentifiedModel& model, int channel) {
    if (model.flavor == Flavor::Arx) return model.theta1[static_cast<std::size_t>(channel)];
    const Index per = model.theta1.front().size();
    Vector x(per * model.q);
    for (int i = 0; i < model.q; ++i) x.segment(i * per, per) = model.theta1[static_cast<std::size_t>(i)];
    return x;
}

void unstack_params(IdentifiedModel& model, int channel, const Vector& x) {
    if (model.flavor == Flavor::Arx) {
        model.theta1[static_cast<std::size_t>(channel)] = x;
        return;
    }
    const Index per = model.o + model.m;
    for (int i = 0; i < model.q; ++i) model.theta1[static_cast<std::size_t>(i)] = x.segment(i * per, per);
}

// ---------------------------------------------------------------- constraint assembly

struct LinearBlock {
    int ch = 0, p = 1;
    RowMatrix G;
    Vector h;
};

struct BoxBlock {
    int ch = 0, p = 1;
    Vector inv_box;  // rows  +-theta_p / box - 1 <= 0
};

struct EpiBlock {
    int ch = 0, p = 1;
    const RowMatrix* phi = nullptr;
    Vector cplus, cminus;
    Index zeta = 0;  // column of the epigraph variable
};

class Assembly {
public:
    Flavor flavor = Flavor::Arx;
    int o = 1, m = 1, q = 1, channel = 0;
    Index n_theta = 0, n_vars = 0;
    int P = 1;
    double lin_relax = 0.0;  // added to every FPS right-hand side
    std::vector<LinearBlock> lin;
    std::vector<BoxBlock> box;
    std::vector<EpiBlock> epi;

    Index lin_rows() const {
        Index r = 0;
        for (const auto& b : lin) r += b.G.rows();
        return r;
    }

    Index rows() const {
        Index r = 0;
        for (const auto& b : lin) r += b.G.rows();
        for (const auto& b : box) r += 2 * b.inv_box.size();
        for (const auto& b : epi) r += 2 * b.phi->rows();
        return r;
    }

    std::vector<HorizonMaps> maps(const Vector& x, bool jac) const {
        std::vector<HorizonMaps> out(static_cast<std::size_t>(q));
        if (flavor == Flavor::Arx) {
            out[static_cast<std::size_t>(channel)] = arx_horizon_maps(x.head(n_theta), o, m, P, jac);
            return out;
        }
        std::vector<Vector> th;
        const Index per = o + m;
        for (int i = 0; i < q; ++i) th.push_back(x.segment(i * per, per));
        Matrix A, B;
        assemble_state_space(th, o, A, B);
        std::vector<char> need(static_cast<std::size_t>(q), 0);
        for (const auto& b : lin) need[static_cast<std::size_t>(b.ch)] = 1;
        for (const auto& b : box) need[static_cast<std::size_t>(b.ch)] = 1;
        for (const auto& b : epi) need[static_cast<std::size_t>(b.ch)] = 1;
        for (int i = 0; i < q; ++i)
            if (need[static_cast<std::size_t>(i)]) out[static_cast<std::size_t>(i)] = ss_horizon_maps(A, B, i, P, jac);
        return out;
    }

    void eval(const Vector& x, Vector& g, RowMatrix* J) const {
        const auto mp = maps(x, J != nullptr);
        const Index R = rows();
        g.resize(R);
        if (J) J->setZero(R, n_vars);
        Index r = 0;
        auto th = [&](int ch, int p) -> const Vector& { return mp[static_cast<std::size_t>(ch)].theta[static_cast<std::size_t>(p - 1)]; };
        auto jac = [&](int ch, int p) -> const Matrix& { return mp[static_cast<std::size_t>(ch)].jac[static_cast<std::size_t>(p - 1)]; };
        for (const auto& b : lin) {
            const Index n = b.G.rows();
            g.segment(r, n) = b.G * th(b.ch, b.p) - b.h;
            if (lin_relax != 0.0) g.segment(r, n).array() -= lin_relax;
            if (J) J->block(r, 0, n, n_theta) = b.G * jac(b.ch, b.p);
            r += n;
        }
        for (const auto& b : box) {
            const Index n = b.inv_box.size();
            const Vector s = th(b.ch, b.p).cwiseProduct(b.inv_box);
            g.segment(r, n) = s.array() - 1.0;
            g.segment(r + n, n) = -s.array() - 1.0;
            if (J) {
                const Matrix Js = b.inv_box.asDiagonal() * jac(b.ch, b.p);
                J->block(r, 0, n, n_theta) = Js;
                J->block(r + n, 0, n, n_theta) = -Js;
            }
            r += 2 * n;
        }
        for (const auto& b : epi) {
            const Index n = b.phi->rows();
            const Vector v = (*b.phi) * th(b.ch, b.p);
            const double z = x(b.zeta);
            g.segment(r, n) = b.cplus - v;
            g.segment(r, n).array() -= z;
            g.segment(r + n, n) = v - b.cminus;
            g.segment(r + n, n).array() -= z;
            if (J) {
                const Matrix PJ = (*b.phi) * jac(b.ch, b.p);
                J->block(r, 0, n, n_theta) = -PJ;
                J->block(r + n, 0, n, n_theta) = PJ;
                J->block(r, b.zeta, 2 * n, 1).setConstant(-1.0);
            }
            r += 2 * n;
        }
    }
};

Assembly make_assembly(const SetMembershipData& sm, int channel, Index extra_vars, int P) {
    Assembly a;
    a.flavor = sm.flavor;
    a.o = sm.o;
    a.m = sm.m;
    a.q = sm.q;
    a.channel = channel;
    a.n_theta = sm.flavor == Flavor::Arx ? theta_size(sm.flavor, sm.o, sm.m) : sm.q * theta_size(sm.flavor, sm.o, sm.m);
    a.n_vars = a.n_theta + extra_vars;
    a.P = std::max(1, P);
    return a;
}

std::vector<int> problem_channels(const SetMembershipData& sm, int channel) {
    if (sm.flavor == Flavor::Arx) return {channel};
    std::vector<int> c;
    for (int i = 0; i < sm.q; ++i) c.push_back(i);
    return c;
}

void add_set(Assembly& a, const SetMembershipData& sm, int ch, int p) {
    const auto& sets = sm.fps[static_cast<std::size_t>(ch)].sets;
    const auto it = sets.find(p);
    if (it == sets.end()) throw std::invalid_argument("feasible set missing for channel " + std::to_string(ch + 1) +
                                                      " at p=" + std::to_string(p));
    LinearBlock b;
    b.ch = ch;
    b.p = p;
    b.G = it->second.G;
    b.h = it->second.h;
    a.lin.push_back(std::move(b));
}

void add_boxes(Assembly& a, const SetMembershipData& sm, int ch, int p_from, int p_to) {
    const DecayEnvelope& env = sm.envelopes[static_cast<std::size_t>(ch)];
    for (int p = p_from; p <= p_to; ++p) {
        BoxBlock b;
        b.ch = ch;
        b.p = p;
        const Vector bx = decay_box(env, sm.flavor, sm.o, sm.m, p);
        b.inv_box = bx.cwiseMax(1e-300).cwiseInverse();
        a.box.push_back(std::move(b));
    }
}

std::shared_ptr<Assembly> method_two_assembly(const SetMembershipData& sm, int channel, const IdentifyConfig& cfg) {
    auto a = std::make_shared<Assembly>(make_assembly(sm, channel, 0, cfg.p_bar_inf));
    for (int ch : problem_channels(sm, channel)) {
        add_set(*a, sm, ch, 1);
        add_boxes(*a, sm, ch, 2, cfg.p_bar_inf);
    }
    return a;
}

// Method I: one epigraph variable per channel (worst case) or per channel and horizon
// (quadratic variant).
std::shared_ptr<Assembly> method_one_assembly(const SetMembershipData& sm, int channel, const IdentifyConfig& cfg,
                                              std::vector<Index>& zeta_of_channel) {
    const auto chans = problem_channels(sm, channel);
    const int pf = cfg.p_bar_fps;
    const Index n_zeta = cfg.quadratic_cost ? static_cast<Index>(chans.size()) * pf : static_cast<Index>(chans.size());
    auto a = std::make_shared<Assembly>(make_assembly(sm, channel, n_zeta, std::max(cfg.p_bar_inf, pf)));
    zeta_of_channel.clear();
    Index z = a->n_theta;
    for (std::size_t c = 0; c < chans.size(); ++c) {
        const int ch = chans[c];
        const auto& fps = sm.fps[static_cast<std::size_t>(ch)];
        const auto& sup = sm.supports[static_cast<std::size_t>(ch)];
        zeta_of_channel.push_back(z);
        for (int p = 1; p <= pf; ++p) {
            add_set(*a, sm, ch, p);
            const auto st = sup.find(p);
            if (st == sup.end()) throw std::invalid_argument("row supports missing at p=" + std::to_string(p));
            EpiBlock e;
            e.ch = ch;
            e.p = p;
            e.phi = &fps.tables.at(p).phi;
            e.cplus = st->second.upper;
            e.cminus = st->second.lower;
            e.zeta = cfg.quadratic_cost ? z + (p - 1) : z;
            a->epi.push_back(std::move(e));
        }
        z += cfg.quadratic_cost ? pf : 1;
        if (cfg.p_bar_inf > pf) add_boxes(*a, sm, ch, pf + 1, cfg.p_bar_inf);
    }
    return a;
}

NlpProblem with_constraints(NlpProblem p, std::shared_ptr<Assembly> a) {
    p.n_constraints = a->rows();
    p.constraints = [a](const Vector& x, Vector& g, RowMatrix* J) { a->eval(x, g, J); };
    return p;
}

// ---------------------------------------------------------------- multistart driver

struct Candidate {
    std::string origin;
    Vector x0;
};

double max_violation_of(const NlpProblem& p, const Vector& x) {
    if (p.n_constraints == 0) return 0.0;
    Vector g(p.n_constraints);
    p.constraints(x, g, nullptr);
    return std::max(0.0, g.maxCoeff());
}

// Moves a start towards the constraint set by minimizing the squared hinge sum.
Vector project_start(const NlpProblem& p, const Vector& x0, double margin) {
    if (p.n_constraints == 0 || max_violation_of(p, x0) <= -margin) return x0;
    NlpProblem h;
    h.dim = p.dim;
    h.x0 = x0;
    h.cost = [&p, margin](const Vector& x, Vector* grad) {
        Vector g(p.n_constraints);
        RowMatrix J;
        p.constraints(x, g, grad ? &J : nullptr);
        const Vector v = (g.array() + margin).cwiseMax(0.0).matrix();
        if (grad) *grad = 2.0 * J.transpose() * v;
        return v.squaredNorm();
    };
    NlpOptions o;
    o.tol = 1e-14;
    o.max_iter = 100;
    SolveReport r = solve_nlp(h, o);
    return r.x.size() == x0.size() && r.x.allFinite() ? r.x : x0;
}

struct MultistartResult {
    Vector x;
    bool found = false;
    ChannelReport report;
};

MultistartResult run_multistart(const NlpProblem& prob, const std::vector<Candidate>& cands, const IdentifyConfig& cfg,
                                const std::function<double(const Vector&)>& authoritative) {
    MultistartResult res;
    res.report.variables = prob.dim;
    res.report.constraints = prob.n_constraints;
    struct Out {
        StartReport rep;
        Vector x;
    };
    auto outs = parallel_map<Out>(cands.size(), [&](std::size_t k) {
        const auto t0 = std::chrono::steady_clock::now();
        Out o;
        o.rep.origin = cands[k].origin;
        NlpProblem p = prob;
        p.x0 = project_start(prob, cands[k].x0, 1e-7);
        SolveReport r = solve_nlp(p, cfg.nlp);
        o.x = r.x;
        o.rep.status = r.status;
        o.rep.iterations = r.iterations;
        o.rep.max_violation = o.x.allFinite() ? max_violation_of(prob, o.x) : std::numeric_limits<double>::infinity();
        o.rep.feasible = o.rep.max_violation <= 1e-6;
        o.rep.objective = o.x.allFinite() ? authoritative(o.x) : std::numeric_limits<double>::infinity();
        o.rep.seconds = seconds_since(t0);
        return o;
    });
    int best = -1;
    for (std::size_t k = 0; k < outs.size(); ++k) {
        res.report.starts.push_back(outs[k].rep);
        const auto& r = outs[k].rep;
        if (!r.feasible || !std::isfinite(r.objective)) continue;
        if (best < 0) {
            best = static_cast<int>(k);
            continue;
        }
        const auto& b = outs[static_cast<std::size_t>(best)];
        const double tie = 1e-9 * (1.0 + std::abs(b.rep.objective));
        if (r.objective < b.rep.objective - tie ||
            (std::abs(r.objective - b.rep.objective) <= tie && outs[k].x.norm() < b.x.norm()))
            best = static_cast<int>(k);
    }
    res.report.chosen = best;
    if (best >= 0) {
        res.found = true;
        res.x = outs[static_cast<std::size_t>(best)].x;
    }
    return res;
}

std::vector<Candidate> standard_starts(const std::vector<IdentifiedModel>& refs, int channel, const IdentifyConfig& cfg,
                                       Index extra) {
    std::vector<Candidate> c;
    auto pad = [extra](const Vector& x) {
        Vector y = Vector::Zero(x.size() + extra);
        y.head(x.size()) = x;
        return y;
    };
    for (const auto& r : refs) c.push_back({std::string(to_string(r.method)), pad(stack_params(r, channel))});
    if (refs.empty()) return c;
    const Vector base = stack_params(refs.front(), channel);
    c.push_back({std::string("half_") + to_string(refs.front().method), pad(0.5 * base)});
    std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(channel) + 1);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int k = 0; static_cast<int>(c.size()) < std::max(cfg.multistart, 1); ++k) {
        Vector x = base;
        for (Index j = 0; j < x.size(); ++j) x(j) *= 1.0 + 0.1 * nd(rng);
        c.push_back({"perturbed_" + std::to_string(k + 1), pad(x)});
    }
    if (static_cast<int>(c.size()) > std::max(cfg.multistart, 1)) c.resize(static_cast<std::size_t>(std::max(cfg.multistart, 1)));
    return c;
}

NlpProblem simulation_problem(const Dataset& ds, Flavor flavor, int o, int channel, const Vector& weights) {
    NlpProblem p;
    if (flavor == Flavor::Arx) {
        p.dim = theta_size(flavor, o, static_cast<int>(ds.m()));
        p.cost = [&ds, channel, o](const Vector& x, Vector* g) { return arx_simulation_cost(ds, channel, o, x, g, nullptr); };
        p.cost_hessian = [&ds, channel, o](const Vector& x) {
            Matrix H;
            arx_simulation_cost(ds, channel, o, x, nullptr, &H);
            return H;
        };
    } else {
        p.dim = ds.q() * (ds.q() + ds.m());
        p.cost = [&ds, weights](const Vector& x, Vector* g) { return ss_simulation_cost(ds, x, weights, g, nullptr); };
        p.cost_hessian = [&ds, weights](const Vector& x) {
            Matrix H;
            ss_simulation_cost(ds, x, weights, nullptr, &H);
            return H;
        };
    }
    return p;
}

Vector channel_weights(const Vector& d_bar, Index q) {
    Vector w = Vector::Ones(q);
    if (d_bar.size() == q)
        for (Index i = 0; i < q; ++i) w(i) = d_bar(i) > 0 ? 1.0 / (d_bar(i) * d_bar(i)) : 1.0;
    return w;
}

void fill_sm_fields(IdentifiedModel& model, const SetMembershipData& sm, const IdentifyConfig& cfg) {
    model.envelopes = sm.envelopes;
    model.d_bar = sm.d_bar;
    model.lambda = sm.lambda;
    model.alpha = cfg.alpha;
    model.gamma = cfg.gamma;
}

std::vector<int> solve_units(Flavor flavor, int q) {
    std::vector<int> u;
    if (flavor == Flavor::Arx)
        for (int i = 0; i < q; ++i) u.push_back(i);
    else
        u.push_back(0);
    return u;
}

}  // namespace

// ---------------------------------------------------------------- simulation costs

double arx_simulation_cost(const Dataset& ds, int i, int o, const Vector& theta1, Vector* grad, Matrix* gn) {
    const int m = static_cast<int>(ds.m());
    const Index n1 = theta_size(Flavor::Arx, o, m);
    if (theta1.size() != n1) throw std::invalid_argument("arx_simulation_cost: wrong parameter length");
    const Index b = ds.begin(Portion::Identification), e = ds.end(Portion::Identification);
    const bool sens = grad || gn;
    std::vector<double> z(static_cast<std::size_t>(e - b));
    std::vector<Vector> S;
    if (sens) S.assign(static_cast<std::size_t>(e - b), Vector::Zero(n1));
    if (grad) grad->setZero(n1);
    if (gn) gn->setZero(n1, n1);
    for (Index t = 0; t < std::min<Index>(o, e - b); ++t) z[static_cast<std::size_t>(t)] = ds.y(b + t, i);
    double cost = 0.0;
    Vector reg(n1);
    for (Index t = o; t < e - b; ++t) {
        double v = 0.0;
        for (int l = 1; l <= o; ++l) {
            reg(l - 1) = z[static_cast<std::size_t>(t - l)];
            for (int j = 0; j < m; ++j) reg(o + (l - 1) * m + j) = ds.u(b + t - l, j);
        }
        v = reg.dot(theta1);
        z[static_cast<std::size_t>(t)] = v;
        const double r = ds.y(b + t, i) - v;
        cost += r * r;
        if (sens) {
            Vector& s = S[static_cast<std::size_t>(t)];
            s = reg;
            for (int l = 1; l <= o; ++l) s += theta1(l - 1) * S[static_cast<std::size_t>(t - l)];
            if (grad) *grad -= 2.0 * r * s;
            if (gn) gn->noalias() += 2.0 * s * s.transpose();
        }
    }
    return cost;
}

double ss_simulation_cost(const Dataset& ds, const Vector& params, const Vector& weights, Vector* grad, Matrix* gn) {
    const Index n = ds.q(), m = ds.m(), stride = n + m, np = n * stride;
    if (params.size() != np) throw std::invalid_argument("ss_simulation_cost: wrong parameter length");
    Matrix A(n, n), B(n, m);
    for (Index j = 0; j < n; ++j) {
        A.row(j) = params.segment(j * stride, n).transpose();
        B.row(j) = params.segment(j * stride + n, m).transpose();
    }
    const Index b = ds.begin(Portion::Identification), e = ds.end(Portion::Identification);
    const bool sens = grad || gn;
    Vector x = ds.y.row(b).transpose();
    Matrix S = Matrix::Zero(n, np), Snext(n, np);
    if (grad) grad->setZero(np);
    if (gn) gn->setZero(np, np);
    double cost = 0.0;
    for (Index t = b; t + 1 < e; ++t) {
        const Vector u = ds.u.row(t).transpose();
        if (sens) {
            Snext.noalias() = A * S;
            for (Index j = 0; j < n; ++j) {
                Snext.row(j).segment(j * stride, n) += x.transpose();
                Snext.row(j).segment(j * stride + n, m) += u.transpose();
            }
            S.swap(Snext);
        }
        x = A * x + B * u;
        for (Index j = 0; j < n; ++j) {
            const double r = ds.y(t + 1, j) - x(j);
            cost += weights(j) * r * r;
            if (grad) *grad -= 2.0 * weights(j) * r * S.row(j).transpose();
            if (gn) gn->noalias() += (2.0 * weights(j)) * S.row(j).transpose() * S.row(j);
        }
    }
    return cost;
}

// ---------------------------------------------------------------- methods

IdentifiedModel pem(const Dataset& ds, Flavor flavor, int o, std::vector<std::string>* warnings) {
    const int q = static_cast<int>(ds.q()), m = static_cast<int>(ds.m());
    const int order = flavor == Flavor::Arx ? o : q;
    IdentifiedModel model = blank_model(flavor, Method::PEM, order, m, q);
    for (int i = 0; i < q; ++i) {
        RegressorTable t = build_regressors(ds, flavor, i, 1, order, Portion::Identification);
        Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Matrix(t.phi));
        if (cod.rank() < t.dim() && warnings)
            warnings->push_back("channel " + std::to_string(i + 1) + ": rank-deficient regressors (rank " +
                                std::to_string(cod.rank()) + " of " + std::to_string(t.dim()) +
                                "), minimum-norm solution");
        model.theta1[static_cast<std::size_t>(i)] = cod.solve(t.y);
    }
    return model;
}

IdentifiedModel sem(const Dataset& ds, Flavor flavor, int o, const std::vector<IdentifiedModel>& starts,
                    const IdentifyConfig& cfg, IdentifyReport* report) {
    const auto t0 = std::chrono::steady_clock::now();
    const int q = static_cast<int>(ds.q()), m = static_cast<int>(ds.m());
    const int order = flavor == Flavor::Arx ? o : q;
    if (starts.empty()) throw std::invalid_argument("sem: at least one start model is needed");
    IdentifiedModel model = blank_model(flavor, Method::SEM, order, m, q);
    model.d_bar = starts.front().d_bar;
    const Vector w = channel_weights(model.d_bar, q);
    if (report) report->method = Method::SEM;
    for (int unit : solve_units(flavor, q)) {
        NlpProblem prob = simulation_problem(ds, flavor, order, unit, w);
        std::vector<Candidate> cands;
        for (const auto& s : starts) cands.push_back({std::string(to_string(s.method)), stack_params(s, unit)});
        auto auth = [&prob](const Vector& x) { return prob.cost(x, nullptr); };
        MultistartResult r = run_multistart(prob, cands, cfg, auth);
        r.report.i = flavor == Flavor::Arx ? unit : -1;
        if (!r.found) throw std::runtime_error("sem: no start converged to a finite cost");
        unstack_params(model, unit, r.x);
        if (report) report->problems.push_back(std::move(r.report));
    }
    if (report) report->seconds = seconds_since(t0);
    return model;
}

NlpProblem method_two_problem(const Dataset& ds, const SetMembershipData& sm, int channel, const IdentifyConfig& cfg) {
    auto a = method_two_assembly(sm, channel, cfg);
    NlpProblem p = simulation_problem(ds, sm.flavor, sm.o, channel, channel_weights(sm.d_bar, sm.q));
    return with_constraints(std::move(p), a);
}

namespace {

NlpProblem method_one_nlp(const SetMembershipData& sm, int channel, const IdentifyConfig& cfg,
                          std::shared_ptr<Assembly> a, const std::vector<Index>& zeta) {
    NlpProblem p;
    p.dim = a->n_vars;
    const Index nv = a->n_vars;
    Vector wz = Vector::Zero(nv);
    const auto chans = problem_channels(sm, channel);
    for (std::size_t c = 0; c < chans.size(); ++c) {
        const double d = sm.d_bar.size() > chans[c] && sm.flavor == Flavor::StateSpace ? sm.d_bar(chans[c]) : 1.0;
        const Index span = cfg.quadratic_cost ? cfg.p_bar_fps : 1;
        for (Index k = 0; k < span; ++k) wz(zeta[c] + k) = d > 0 ? 1.0 / d : 1.0;
    }
    if (cfg.quadratic_cost) {
        p.cost = [wz](const Vector& x, Vector* g) {
            const Vector z = x.cwiseProduct(wz);
            if (g) *g = 2.0 * z.cwiseProduct(wz);
            return z.squaredNorm();
        };
        p.cost_hessian = [wz](const Vector&) { return Matrix((2.0 * wz.cwiseProduct(wz)).asDiagonal()); };
    } else {
        p.cost = [wz](const Vector& x, Vector* g) {
            if (g) *g = wz;
            return wz.dot(x);
        };
    }
    return with_constraints(std::move(p), a);
}

// Smallest uniform shift t of the FPS rows for which the Method I constraints admit a point:
// min t  s.t.  FPS rows <= t, decay and epigraph rows as given.
double fps_infeasibility(const NlpProblem& base, Index n_lin, const std::vector<Vector>& starts, const NlpOptions& nlp) {
    const Index n = base.dim;
    NlpProblem f;
    f.dim = n + 1;
    f.n_constraints = base.n_constraints;
    f.cost = [n](const Vector& x, Vector* g) {
        if (g) {
            *g = Vector::Zero(n + 1);
            (*g)(n) = 1.0;
        }
        return x(n);
    };
    f.constraints = [&base, n, n_lin](const Vector& x, Vector& g, RowMatrix* J) {
        RowMatrix Jb;
        base.constraints(x.head(n), g, J ? &Jb : nullptr);
        g.head(n_lin).array() -= x(n);
        if (J) {
            *J = RowMatrix::Zero(g.size(), n + 1);
            J->leftCols(n) = Jb;
            J->col(n).head(n_lin).setConstant(-1.0);
        }
    };
    auto runs = parallel_map<double>(starts.size(), [&](std::size_t k) {
        Vector x(n + 1);
        x.head(n) = starts[k];
        Vector g(base.n_constraints);
        base.constraints(starts[k], g, nullptr);
        x(n) = std::max(0.0, g.head(n_lin).maxCoeff()) + 1e-3;
        NlpProblem fk = f;
        fk.x0 = x;
        const SolveReport r = solve_nlp(fk, nlp);
        if (!r.x.allFinite()) return std::numeric_limits<double>::infinity();
        // the shift that this point actually needs, checked outside the solver
        Vector gg(base.n_constraints);
        base.constraints(r.x.head(n), gg, nullptr);
        if (n_lin < gg.size() && gg.tail(gg.size() - n_lin).maxCoeff() > 1e-6) return std::numeric_limits<double>::infinity();
        return std::max(0.0, gg.head(n_lin).maxCoeff());
    });
    return *std::min_element(runs.begin(), runs.end());
}

}  // namespace

NlpProblem method_one_problem(const Dataset& ds, const SetMembershipData& sm, int channel, const IdentifyConfig& cfg) {
    (void)ds;
    std::vector<Index> zeta;
    auto a = method_one_assembly(sm, channel, cfg, zeta);
    return method_one_nlp(sm, channel, cfg, a, zeta);
}

IdentifiedModel method_two(const Dataset& ds, const SetMembershipData& sm, const std::vector<IdentifiedModel>& refs,
                           const IdentifyConfig& cfg, IdentifyReport* report) {
    const auto t0 = std::chrono::steady_clock::now();
    IdentifiedModel model = blank_model(sm.flavor, Method::MethodII, sm.o, sm.m, sm.q);
    fill_sm_fields(model, sm, cfg);
    if (report) report->method = Method::MethodII;
    for (int unit : solve_units(sm.flavor, sm.q)) {
        NlpProblem prob = method_two_problem(ds, sm, unit, cfg);
        auto auth = [&prob](const Vector& x) { return prob.cost(x, nullptr); };
        MultistartResult r = run_multistart(prob, standard_starts(refs, unit, cfg, 0), cfg, auth);
        r.report.i = sm.flavor == Flavor::Arx ? unit : -1;
        if (!r.found)
            throw std::runtime_error("method II: no feasible local minimizer found (the feasible set should be "
                                     "nonempty by construction; check the FPS row subsampling)");
        unstack_params(model, unit, r.x);
        if (report) report->problems.push_back(std::move(r.report));
    }
    certify_model(model, cfg.p_bar_inf);
    if (report) report->seconds = seconds_since(t0);
    return model;
}

IdentifiedModel method_one(const Dataset& ds, const SetMembershipData& sm, const std::vector<IdentifiedModel>& refs,
                           const IdentifyConfig& cfg, IdentifyReport* report) {
    (void)ds;
    const auto t0 = std::chrono::steady_clock::now();
    IdentifiedModel model = blank_model(sm.flavor, Method::MethodI, sm.o, sm.m, sm.q);
    fill_sm_fields(model, sm, cfg);
    if (report) report->method = Method::MethodI;
    for (int unit : solve_units(sm.flavor, sm.q)) {
        std::vector<Index> zeta;
        auto a = method_one_assembly(sm, unit, cfg, zeta);
        const Index nt = a->n_theta;
        const Index n_lin = a->lin_rows();
        Index n_fixed = n_lin;
        for (const auto& b : a->box) n_fixed += 2 * b.inv_box.size();
        NlpProblem prob = method_one_nlp(sm, unit, cfg, a, zeta);
        // epigraph variables start just above the largest row value of the start point
        auto cands = standard_starts(refs, unit, cfg, prob.dim - nt);
        auto lift = [&](std::vector<Candidate>& cs) {
            for (auto& c : cs) {
                Vector g;
                Vector x = c.x0;
                x.tail(prob.dim - nt).setZero();
                a->eval(x, g, nullptr);
                Index r = n_fixed;
                for (const auto& b : a->epi) {
                    const Index n = 2 * b.phi->rows();
                    c.x0(b.zeta) = std::max(c.x0(b.zeta), g.segment(r, n).maxCoeff() + 1e-3);
                    r += n;
                }
            }
        };
        lift(cands);
        // authoritative value: worst (or summed squared) gamma-free row bound over horizons
        auto auth = [a, nt, n_fixed, &cfg](const Vector& x) {
            Vector xz = x;
            xz.tail(x.size() - nt).setZero();
            Vector g;
            a->eval(xz, g, nullptr);
            Index r = n_fixed;
            double worst = 0.0, sq = 0.0;
            for (const auto& b : a->epi) {
                const Index n = 2 * b.phi->rows();
                const double top = std::max(0.0, g.segment(r, n).maxCoeff());
                worst = std::max(worst, top);
                sq += top * top;
                r += n;
            }
            return cfg.quadratic_cost ? sq : worst;
        };
        MultistartResult r = run_multistart(prob, cands, cfg, auth);
        if (!r.found && cfg.relax_method_one) {
            std::vector<Vector> xs;
            for (const auto& c : cands) xs.push_back(c.x0);
            const double t = fps_infeasibility(prob, n_lin, xs, cfg.nlp);
            if (std::isfinite(t)) {
                a->lin_relax = t * (1.0 + 1e-3) + 1e-8;
                lift(cands);
                r = run_multistart(prob, cands, cfg, auth);
                r.report.fps_relaxation = a->lin_relax;
                if (report)
                    report->notes.push_back("channel " + std::to_string(unit + 1) +
                                            ": no model meets every horizon's FPS; FPS rows shifted by " +
                                            std::to_string(a->lin_relax));
            }
        }
        r.report.i = sm.flavor == Flavor::Arx ? unit : -1;
        if (!r.found)
            throw std::runtime_error("method I: no feasible local minimizer found (the feasible set should be "
                                     "nonempty by construction; check the FPS row subsampling)");
        unstack_params(model, unit, r.x.head(nt));
        if (report) report->problems.push_back(std::move(r.report));
    }
    certify_model(model, cfg.p_bar_inf);
    if (report) report->seconds = seconds_since(t0);
    return model;
}

DecayEnvelope calibrate_envelope(const DecayEnvelope& env, const IdentifiedModel& ref, int i, int p_to,
                                 double kappa) {
    DecayEnvelope out = env;
    const HorizonMaps mp = model_horizon_maps(ref, i, std::max(1, p_to), false);
    double need_z = 0.0, need_u = 0.0;
    for (int p = 1; p <= p_to; ++p) {
        // the unit box tells which slots carry the output scale
        DecayEnvelope unit = env;
        unit.L_hat = 1.0;
        unit.L_u = 0.0;
        const Vector zs = decay_box(unit, ref.flavor, ref.o, ref.m, p);
        unit.L_hat = 0.0;
        unit.L_u = 1.0;
        const Vector us = decay_box(unit, ref.flavor, ref.o, ref.m, p);
        const Vector& th = mp.theta[static_cast<std::size_t>(p - 1)];
        for (Index k = 0; k < th.size(); ++k) {
            if (zs(k) > 0) need_z = std::max(need_z, std::abs(th(k)) / zs(k));
            if (us(k) > 0) need_u = std::max(need_u, std::abs(th(k)) / us(k));
        }
    }
    out.L_hat = std::max(env.L_hat, kappa * need_z);
    out.L_u = std::max(env.L_u, kappa * need_u);
    return out;
}

void certify_model(IdentifiedModel& model, int p_bar_inf, double tol) {
    model.stability.clear();
    model.chi.assign(static_cast<std::size_t>(model.q), 0.0);
    Matrix A, B;
    if (model.flavor == Flavor::StateSpace) assemble_state_space(model.theta1, model.o, A, B);
    for (int i = 0; i < model.q; ++i) {
        StabilityCertificate c;
        if (static_cast<int>(model.envelopes.size()) <= i) {
            c.reason = "no decay envelope attached to the model";
            c.spectral_radius = model.flavor == Flavor::Arx
                                    ? spectral_radius(companion(model.theta1[static_cast<std::size_t>(i)].head(model.o)))
                                    : spectral_radius(A);
        } else if (model.flavor == Flavor::Arx) {
            c = certify_stability(model.theta1[static_cast<std::size_t>(i)], model.envelopes[static_cast<std::size_t>(i)],
                                  model.o, model.m, p_bar_inf, tol);
        } else {
            c = certify_stability_ss(A, B, i, model.envelopes[static_cast<std::size_t>(i)], p_bar_inf, tol);
        }
        model.chi[static_cast<std::size_t>(i)] = c.chi;
        model.stability.push_back(c);
    }
}

}  // namespace smbound
