#include "smbound/identify.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace smbound;

namespace {

Dataset first_order_data(double noise, Index T = 400, std::uint64_t seed = 4) {
    LtiSystem sys;
    sys.A = Matrix::Constant(1, 1, 0.5);
    sys.B = Matrix::Ones(1, 1);
    sys.C = Matrix::Ones(1, 1);
    return simulate_lti(sys, random_step_input(T, {-1, 0, 1}, 3, seed), Vector::Constant(1, noise), seed + 1);
}

// Sets for the first order system with noise bound d: the true predictor error is at most
// d (1 + 0.5^p), so lambda_p = 0.5^p d leaves the truth inside every set.
SetMembershipData toy_sets(const Dataset& ds, double d, int P) {
    LambdaSeries lam;
    lam.d_bar = d;
    for (int p = 1; p <= P; ++p) {
        lam.p.push_back(p);
        lam.values.push_back(std::pow(0.5, p) * d);
        lam.residual.push_back(lam.values.back() + d);
    }
    DecayEnvelope env;
    env.L_hat = 4.0;
    env.L_u = 4.0;
    env.rho_hat = 0.8;
    std::vector<int> hs;
    for (int p = 1; p <= P; ++p) hs.push_back(p);
    FpsBundle b = build_fps_bundle(ds, Flavor::Arx, 0, 1, hs, lam, env, d);
    std::map<int, RowSupports> sup;
    for (auto& [p, set] : b.sets) {
        set = remove_redundant(set);
        sup.emplace(p, row_supports(set, b.tables.at(p)));
    }
    b.reduced = true;
    SetMembershipData sm;
    sm.d_bar = Vector::Constant(1, d);
    sm.envelopes = {env};
    sm.lambda = {lam};
    sm.fps = {b};
    sm.supports = {sup};
    return sm;
}

// Method I objective: the worst parametric error over the horizons (gamma and eps_hat left out).
double worst_row_bound(const SetMembershipData& sm, const Vector& theta1, int P) {
    IdentifiedModel m;
    m.theta1 = {theta1};
    double w = 0.0;
    for (int p = 1; p <= P; ++p)
        w = std::max(w, parametric_error(sm.supports[0].at(p), sm.fps[0].tables.at(p), model_theta_p(m, 0, p)));
    return w;
}

bool in_all_sets(const SetMembershipData& sm, const Vector& theta1, int P) {
    IdentifiedModel m;
    m.theta1 = {theta1};
    for (int p = 1; p <= P; ++p)
        if (!sm.fps[0].sets.at(p).contains(model_theta_p(m, 0, p), 1e-9)) return false;
    return true;
}

}  // namespace

TEST_CASE("one-step least squares recovers a noise-free system") {
    const Dataset ds = first_order_data(0.0);
    const IdentifiedModel m = pem(ds, Flavor::Arx, 1);
    CHECK(m.theta1[0](0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(m.theta1[0](1) == doctest::Approx(1.0).epsilon(1e-9));
    const IdentifiedModel s = pem(ds, Flavor::StateSpace, 1);
    CHECK(s.A_hat()(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("rank deficient regression is flagged") {
    Dataset ds = first_order_data(0.0);
    ds.u.setZero();
    std::vector<std::string> warnings;
    pem(ds, Flavor::Arx, 1, &warnings);
    CHECK_FALSE(warnings.empty());
}

TEST_CASE("simulation error fit agrees with least squares without noise") {
    const Dataset ds = first_order_data(0.0);
    const IdentifiedModel p = pem(ds, Flavor::Arx, 1);
    IdentifyConfig cfg;
    IdentifiedModel start = p;
    start.theta1[0] = (Vector(2) << 0.3, 0.7).finished();
    const IdentifiedModel s = sem(ds, Flavor::Arx, 1, {start}, cfg);
    CHECK((s.theta1[0] - p.theta1[0]).norm() < 1e-6);
}

TEST_CASE("method II equals the unconstrained fit when no constraint binds") {
    const Dataset ds = first_order_data(0.1);
    // a loose noise bound keeps the sets wide
    const SetMembershipData sm = toy_sets(ds, 0.5, 3);
    IdentifyConfig cfg;
    cfg.p_bar_inf = 20;
    const IdentifiedModel p = pem(ds, Flavor::Arx, 1);
    const IdentifiedModel s = sem(ds, Flavor::Arx, 1, {p}, cfg);
    REQUIRE(sm.fps[0].sets.at(1).contains(s.theta1[0], -1e-6));
    const IdentifiedModel m2 = method_two(ds, sm, {p, s}, cfg);
    CHECK((m2.theta1[0] - s.theta1[0]).norm() < 1e-5);
    CHECK(m2.stability.at(0).certified);
}

TEST_CASE("method I against a grid search") {
    const Dataset ds = first_order_data(0.1, 300);
    const int P = 3;
    const SetMembershipData sm = toy_sets(ds, 0.1, P);
    IdentifyConfig cfg;
    cfg.p_bar_fps = P;
    cfg.p_bar_inf = 20;
    const IdentifiedModel p = pem(ds, Flavor::Arx, 1);
    IdentifyReport rep;
    const IdentifiedModel m1 = method_one(ds, sm, {p}, cfg, &rep);
    REQUIRE(rep.problems.size() == 1);
    CHECK(rep.problems[0].fps_relaxation == 0.0);
    CHECK(in_all_sets(sm, m1.theta1[0], P));
    const double got = worst_row_bound(sm, m1.theta1[0], P);

    // brute force over the bounding box of the one-step set
    const Polytope& s1 = sm.fps[0].sets.at(1);
    const double a0 = -support(s1, -Vector::Unit(2, 0)).value, a1 = support(s1, Vector::Unit(2, 0)).value;
    const double b0 = -support(s1, -Vector::Unit(2, 1)).value, b1 = support(s1, Vector::Unit(2, 1)).value;
    double best = std::numeric_limits<double>::infinity();
    const int n = 120;
    for (int u = 0; u <= n; ++u)
        for (int v = 0; v <= n; ++v) {
            const Vector th = (Vector(2) << a0 + (a1 - a0) * u / n, b0 + (b1 - b0) * v / n).finished();
            if (in_all_sets(sm, th, P)) best = std::min(best, worst_row_bound(sm, th, P));
        }
    REQUIRE(std::isfinite(best));
    CHECK(got <= best + 1e-6);
    // the grid point nearest the optimum is not far above it
    CHECK(best - got < 0.05 * best);
}

TEST_CASE("method I relaxes jointly infeasible sets") {
    const Dataset ds = first_order_data(0.1, 300);
    SetMembershipData sm = toy_sets(ds, 0.1, 2);
    // a small two-step box that no one-step member reaches: a^2 = 0.54 and a b = 0.5 with b = 1
    const Vector c = (Vector(3) << 0.54, 1.0, 0.5).finished();
    Polytope& s2 = sm.fps[0].sets.at(2);
    s2 = box_polytope(c.array() - 0.01, c.array() + 0.01);
    REQUIRE_FALSE(is_empty(s2));
    IdentifyConfig cfg;
    cfg.p_bar_fps = 2;
    cfg.p_bar_inf = 20;
    const IdentifiedModel p = pem(ds, Flavor::Arx, 1);
    IdentifyReport rep;
    method_one(ds, sm, {p}, cfg, &rep);
    CHECK(rep.problems.at(0).fps_relaxation > 0.0);
    cfg.relax_method_one = false;
    CHECK_THROWS(method_one(ds, sm, {p}, cfg));
}

TEST_CASE("envelope calibration covers the reference model") {
    IdentifiedModel ref;
    ref.theta1 = {(Vector(2) << 0.9, 2.0).finished()};
    DecayEnvelope env;
    env.L_hat = 0.1;
    env.L_u = 0.1;
    env.rho_hat = 0.95;
    const DecayEnvelope c = calibrate_envelope(env, ref, 0, 30, 1.5);
    CHECK(c.L_hat >= env.L_hat);
    for (int p = 1; p <= 30; ++p) {
        const Vector t = model_theta_p(ref, 0, p);
        const Vector b = decay_box(c, Flavor::Arx, 1, 1, p);
        CHECK((t.cwiseAbs().array() <= b.array() + 1e-12).all());
    }
}
