#include "smbound/bounds.hpp"
#include "smbound/dataset.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace smbound;

namespace {

// y(k+1) = 0.5 y(k) + u(k), optionally with bounded output noise
Dataset first_order(Index T, double noise, std::uint64_t seed) {
    LtiSystem s;
    s.A = Matrix::Constant(1, 1, 0.5);
    s.B = Matrix::Ones(1, 1);
    s.C = Matrix::Ones(1, 1);
    return simulate_lti(s, random_step_input(T, {-1, 0, 1}, 3, seed), Vector::Constant(1, noise), seed);
}

LambdaSeries series_of(const std::vector<double>& v) {
    LambdaSeries s;
    for (std::size_t k = 0; k < v.size(); ++k) {
        s.p.push_back(static_cast<int>(k) + 1);
        s.values.push_back(v[k]);
        s.residual.push_back(v[k]);
    }
    return s;
}

}  // namespace

TEST_CASE("lambda vanishes on noise-free data at the true order") {
    const Dataset ds = first_order(400, 0.0, 1);
    for (int p : {1, 3, 8}) {
        const RegressorTable t = build_regressors(ds, Flavor::Arx, 0, p, 1, Portion::Identification);
        CHECK(compute_lambda(t, 0.0).lambda < 1e-8);
    }
}

TEST_CASE("a single row is always interpolated") {
    RegressorTable t;
    t.phi = RowMatrix(1, 2);
    t.phi << 0.3, -2.0;
    t.y = Vector::Constant(1, 7.0);
    t.k = {0};
    CHECK(compute_lambda(t, 0.0).lambda < 1e-9);
}

TEST_CASE("lambda for any noise guess is the shifted Chebyshev residual") {
    const Dataset ds = first_order(600, 0.4, 2);
    const RegressorTable t = build_regressors(ds, Flavor::Arx, 0, 2, 1, Portion::Identification);
    const double M = chebyshev_residual(t).lambda;
    for (double d : {0.0, 0.1, 0.3, 0.5, 2.0}) CHECK(compute_lambda(t, d).lambda == doctest::Approx(std::max(0.0, M - d)).epsilon(1e-7));
}

TEST_CASE("p_bar") {
    CHECK(compute_p_bar(series_of({5, 1, 1e-9, 1e-10, 1e-11}), 1e-8) == 3);
    CHECK(compute_p_bar(series_of({1e-9, 1e-10}), 1e-8) == 1);
    CHECK_THROWS(compute_p_bar(series_of({1, 1}), 1e-8));
}

TEST_CASE("decay fit of an exact exponential") {
    std::vector<double> v;
    for (int p = 1; p <= 60; ++p) v.push_back(2.0 * std::pow(0.9, p + 1));
    const DecayEnvelope e = fit_decay(series_of(v), 60, 1.0);
    CHECK(e.L_prime == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(e.rho_hat == doctest::Approx(0.9).epsilon(1e-5));
    CHECK(e.L_hat == doctest::Approx(e.L_prime));
}

TEST_CASE("decay fit dominates a spike") {
    std::vector<double> v;
    for (int p = 1; p <= 40; ++p) v.push_back(std::pow(0.8, p + 1));
    v[9] *= 4.0;
    const DecayEnvelope e = fit_decay(series_of(v), 40, 2.0);
    for (int p = 1; p <= 40; ++p) CHECK(envelope_value(e, p) >= v[static_cast<std::size_t>(p - 1)] * (1 - 1e-9));
    CHECK(e.L_hat == doctest::Approx(e.L_prime / 2.0));
}

TEST_CASE("noise bound on noise-free data is zero") {
    const Dataset ds = first_order(600, 0.0, 3);
    NoiseBoundOptions o;
    o.p_max = 40;
    o.plateau.window = 10;
    const NoiseBoundEstimate nb = estimate_noise_bound(ds, Flavor::Arx, 2, Vector::Zero(1), o);
    CHECK(nb.d_bar(0) < 1e-6);
    CHECK(nb.converged[0]);
}

TEST_CASE("noise bound of a noisy first-order system and a correct initial guess") {
    const Dataset ds = first_order(2000, 0.5, 4);
    NoiseBoundOptions o;
    o.p_max = 60;
    o.plateau.window = 15;
    const NoiseBoundEstimate nb = estimate_noise_bound(ds, Flavor::Arx, 3, Vector::Zero(1), o);
    REQUIRE(nb.converged[0]);
    CHECK(nb.d_bar(0) == doctest::Approx(0.5).epsilon(0.1));
    // starting from the estimate itself leaves nothing to correct
    const NoiseBoundEstimate again = estimate_noise_bound(ds, Flavor::Arx, 3, nb.d_bar, o);
    CHECK(again.e_d(0) < 1e-6);
}

TEST_CASE("order of a first-order system") {
    const Dataset ds = first_order(1500, 0.0, 5);
    NoiseBoundOptions o;
    o.p_max = 40;
    o.plateau.window = 10;
    const NoiseBoundEstimate nb = estimate_noise_bound(ds, Flavor::Arx, 3, Vector::Zero(1), o);
    OrderOptions oo;
    oo.p_max = 40;
    const OrderEstimate oe = estimate_order(ds, Flavor::Arx, nb.d_bar, 3, {1}, oo);
    CHECK(oe.o <= 3);
    CHECK(oe.o == 1);
}

TEST_CASE("decay box layout") {
    DecayEnvelope e;
    e.L_hat = 1.0;
    e.L_u = 1.0;
    e.rho_hat = 0.5;
    const Vector b = decay_box(e, Flavor::Arx, 1, 1, 1);
    REQUIRE(b.size() == 2);
    CHECK(b(0) == doctest::Approx(0.25));
    CHECK(b(1) == doctest::Approx(0.5));
    for (int p = 1; p < 10; ++p)
        CHECK((decay_box(e, Flavor::Arx, 2, 1, p + 1).head(2).array() < decay_box(e, Flavor::Arx, 2, 1, p).head(2).array()).all());
}
