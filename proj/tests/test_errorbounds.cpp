#include "smbound/errorbounds.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace smbound;

namespace {

RegressorTable one_row(double phi, double y) {
    RegressorTable t;
    t.phi = RowMatrix::Constant(1, 1, phi);
    t.y = Vector::Constant(1, y);
    t.k = {0};
    return t;
}

Polytope interval(double l, double u) {
    return box_polytope(Vector::Constant(1, l), Vector::Constant(1, u));
}

}  // namespace

TEST_CASE("singleton set leaves only the noise term") {
    const RegressorTable t = one_row(2.0, 0.0);
    const RowSupports s = row_supports(interval(0.5, 0.5), t);
    CHECK(tau_from_supports(s, t, Vector::Constant(1, 0.5), 1.1, 0.3) == doctest::Approx(0.3));
}

TEST_CASE("interval set with the midpoint estimate") {
    const double l = -0.4, u = 1.0, gamma = 1.1, eps = 0.2;
    const RegressorTable t = one_row(1.0, 0.0);
    const RowSupports s = row_supports(interval(l, u), t);
    CHECK(s.upper(0) == doctest::Approx(u));
    CHECK(s.lower(0) == doctest::Approx(l));
    const double mid = 0.5 * (l + u);
    CHECK(tau_from_supports(s, t, Vector::Constant(1, mid), gamma, eps) == doctest::Approx(gamma * (u - l) / 2 + eps));
    // the bound grows for an off-centre estimate
    CHECK(tau_from_supports(s, t, Vector::Constant(1, u), gamma, eps) == doctest::Approx(gamma * (u - l) + eps));
}

TEST_CASE("empty set is reported") {
    Polytope p;
    p.G = RowMatrix(2, 1);
    p.G << 1, -1;
    p.h = Vector(2);
    p.h << 0, -1;
    p.labels.resize(2);
    CHECK_THROWS_AS(row_supports(p, one_row(1.0, 0.0)), EmptyFpsError);
}

TEST_CASE("iteration with chi = 0 reduces to the p_bar bound") {
    std::map<int, double> s{{1, 0.4}, {2, 0.7}, {3, 0.5}};
    CHECK(iterate_tau(s, 0.0, 0.3, 1, 3, 7) == doctest::Approx(0.5));
    CHECK(iterate_tau(s, 0.0, 0.3, 1, 3, 50) == doctest::Approx(0.5));
}

TEST_CASE("hand computed iteration") {
    std::map<int, double> s;
    for (int p = 1; p <= 5; ++p) s[p] = 1.0;
    // l = 2, j = 1: 1 (1 + 0.5) + 1 (0.5 + 0.25) + 1 (0.25)
    CHECK(iterate_tau(s, 0.5, 1.0, 1, 5, 11) == doctest::Approx(2.5));
}

TEST_CASE("limit of the iteration") {
    CHECK(tau_infinity(1.0, 0.5, 1.0) == doctest::Approx(3.0));
    CHECK_THROWS_AS(tau_infinity(1.0, 1.0, 1.0), ContractionError);
    std::map<int, double> s;
    for (int p = 1; p <= 4; ++p) s[p] = 0.2 * p;
    const double lim = tau_infinity(s[4], 0.3, 0.5);
    CHECK(std::abs(iterate_tau(s, 0.3, 0.5, 2, 4, 4000) - lim) < 1e-9);
}

TEST_CASE("window bridging between computed horizons") {
    std::map<int, double> s{{1, 1.0}, {10, 2.0}};
    bool bridged = false;
    // l = 1, j = 5: window [4, 5] holds no computed entry
    const double v = iterate_tau(s, 0.5, 0.0, 1, 10, 15, &bridged);
    CHECK(bridged);
    CHECK(v == doctest::Approx(2.0 * 1.0 + 2.0 * 0.5));
}

TEST_CASE("overshoot check") {
    const OvershootResult none = overshoot_check(1.0, 1.0, 0.5, 1.0);
    CHECK_FALSE(none.possible);
    const OvershootResult some = overshoot_check(5.0, 1.0, 0.5, 1.0);
    CHECK(some.possible);
    // |3 - 5| 0.5^l < 0.03
    CHECK(some.ell_bar == 7);
    CHECK(some.delta == doctest::Approx(0.03));
}

TEST_CASE("series completion") {
    TauSeries s;
    s.o = 1;
    s.p_bar = 4;
    s.d_bar = 0.5;
    for (int p = 1; p <= 4; ++p) s.finite[p] = 0.1 * p;
    DecayEnvelope env;
    env.L_hat = 1.0;
    env.rho_hat = 0.5;
    complete_series(s, env, {8, 20});
    CHECK(s.chi == doctest::Approx(std::pow(0.5, 5)));
    CHECK(s.has_inf);
    CHECK(s.tau_inf == doctest::Approx(tau_infinity(0.4, s.chi, 0.5)));
    CHECK(s.iterative.count(8) == 1);
    CHECK(s.iterative.at(20) <= s.tau_inf + 1e-12);
    CHECK(chi_value(env, Flavor::Arx, 3, 4) == doctest::Approx(3 * std::pow(0.5, 5)));
    CHECK(chi_value(env, Flavor::StateSpace, 3, 4) == doctest::Approx(std::pow(0.5, 5)));
}

TEST_CASE("iterated bounds stay under the limit") {
    const testing::SuiteResult r = testing::no_overshoot_suite(30, 12);
    INFO(r.first_failure);
    CHECK(r.pass());
}

TEST_CASE("bound validation counts violations") {
    LtiSystem sys;
    sys.A = Matrix::Constant(1, 1, 0.5);
    sys.B = Matrix::Ones(1, 1);
    sys.C = Matrix::Ones(1, 1);
    const Dataset ds = simulate_lti(sys, random_step_input(200, {-1, 1}, 4, 2), Vector::Zero(1), 1);
    IdentifiedModel exact;
    exact.o = 1;
    exact.theta1 = {(Vector(2) << 0.5, 1.0).finished()};
    exact.d_bar = Vector::Zero(1);
    TauSeries tau;
    tau.o = 1;
    for (int p : {1, 2, 5}) tau.finite[p] = 1e-9;
    const auto ok = validate_bounds(exact, ds, {tau}, {1, 2, 5});
    CHECK(ok.at(0).total_violations == 0);
    CHECK(ok.at(0).total_checked > 0);
    IdentifiedModel off = exact;
    off.theta1 = {(Vector(2) << 0.4, 1.0).finished()};
    const auto bad = validate_bounds(off, ds, {tau}, {1, 2, 5});
    CHECK(bad.at(0).total_violations > 0);
}
