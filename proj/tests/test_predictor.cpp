#include "smbound/predictor.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace smbound;

namespace {

IdentifiedModel first_order(double a, double b) {
    IdentifiedModel m;
    m.flavor = Flavor::Arx;
    m.o = 1;
    m.m = 1;
    m.q = 1;
    m.theta1 = {(Vector(2) << a, b).finished()};
    return m;
}

DecayEnvelope envelope(double L, double rho) {
    DecayEnvelope e;
    e.L_hat = L;
    e.L_u = L;
    e.rho_hat = rho;
    return e;
}

}  // namespace

TEST_CASE("one step horizon map is the identity") {
    const Vector th = (Vector(4) << 0.3, -0.1, 2.0, 0.5).finished();
    const HorizonMaps h = arx_horizon_maps(th, 2, 1, 1, true);
    CHECK((h.theta[0] - th).norm() == doctest::Approx(0.0));
    CHECK((h.jac[0] - Matrix::Identity(4, 4)).norm() == doctest::Approx(0.0));
}

TEST_CASE("first order two step predictor") {
    const double a = 0.7, b = -1.3;
    const HorizonMaps h = arx_horizon_maps((Vector(2) << a, b).finished(), 1, 1, 3, false);
    REQUIRE(h.theta[1].size() == 3);
    CHECK(h.theta[1](0) == doctest::Approx(a * a));
    CHECK(h.theta[1](1) == doctest::Approx(b));
    CHECK(h.theta[1](2) == doctest::Approx(a * b));
    CHECK(h.theta[2](0) == doctest::Approx(a * a * a));
    CHECK(h.theta[2](3) == doctest::Approx(a * a * b));
}

TEST_CASE("parameter vector wrapper") {
    ParameterVector p;
    p.theta = (Vector(2) << 0.5, 2.0).finished();
    const ParameterVector q = iterate_predictor(p, 4);
    CHECK(q.p == 4);
    CHECK(q.dim() == 5);
    CHECK(q.z_block()(0) == doctest::Approx(0.0625));
    CHECK(jacobian_h(p, 4).rows() == 5);
}

TEST_CASE("scalar state space powers") {
    const double a = 0.9, b = 0.4;
    const Matrix A = Matrix::Constant(1, 1, a), B = Matrix::Constant(1, 1, b);
    const HorizonMaps h = ss_horizon_maps(A, B, 0, 4, false);
    const Vector& t = h.theta[3];
    REQUIRE(t.size() == 5);
    CHECK(t(0) == doctest::Approx(std::pow(a, 4)));
    for (int s = 0; s < 4; ++s) CHECK(t(1 + s) == doctest::Approx(std::pow(a, 3 - s) * b));
}

TEST_CASE("Jacobians against finite differences") {
    const testing::SuiteResult r = testing::jacobian_suite(20, 5);
    INFO(r.first_failure);
    CHECK(r.pass());
}

TEST_CASE("feedback simulation matches the explicit predictor") {
    const testing::SuiteResult r = testing::dual_path_suite(20, 6);
    INFO(r.first_failure);
    CHECK(r.pass());
}

TEST_CASE("zero input and zero initial output give zero") {
    Dataset ds;
    ds.u = Matrix::Zero(50, 1);
    ds.y = Matrix::Zero(50, 1);
    ds.split_index = 25;
    const Vector z = simulate_model(first_order(0.8, 1.0), ds, 0, 3, 10);
    CHECK(z.norm() == 0.0);
}

TEST_CASE("free-run simulation of a known system") {
    Dataset ds;
    ds.u = Matrix::Ones(20, 1);
    ds.y = Matrix::Zero(20, 1);
    ds.split_index = 10;
    const Matrix sim = simulate_portion(first_order(0.5, 1.0), ds, Portion::Identification);
    // y(t+1) = 0.5 y(t) + 1 from y(0) = 0
    double y = 0.0;
    for (Index t = 1; t < sim.rows(); ++t) {
        y = 0.5 * y + 1.0;
        CHECK(sim(t, 0) == doctest::Approx(y));
    }
}

TEST_CASE("stability certificate") {
    const DecayEnvelope e = envelope(4.0, 0.8);
    const StabilityCertificate ok = certify_stability((Vector(2) << 0.5, 1.0).finished(), e, 1, 1, 20);
    CHECK(ok.certified);
    CHECK(ok.chi < 1.0);
    CHECK(ok.spectral_radius == doctest::Approx(0.5));
    const StabilityCertificate bad = certify_stability((Vector(2) << 1.1, 1.0).finished(), e, 1, 1, 20);
    CHECK_FALSE(bad.certified);
    CHECK(bad.fail_p > 0);
}

TEST_CASE("companion matrix and spectral radius") {
    const Matrix C = companion((Vector(2) << 1.0, -0.21).finished());  // roots 0.7 and 0.3
    CHECK(spectral_radius(C) == doctest::Approx(0.7));
}

TEST_CASE("state space assembly round trip") {
    Matrix A(2, 2), B(2, 1);
    A << 0.5, 0.1, -0.2, 0.7;
    B << 1.0, 2.0;
    const std::vector<Vector> rows = split_state_space(A, B);
    REQUIRE(rows.size() == 2);
    CHECK(rows[1](1) == doctest::Approx(0.7));
    CHECK(rows[1](2) == doctest::Approx(2.0));
    Matrix A2, B2;
    assemble_state_space(rows, 2, A2, B2);
    CHECK((A2 - A).norm() == 0.0);
    CHECK((B2 - B).norm() == 0.0);
    CHECK_THROWS(assemble_state_space({rows[0]}, 2, A2, B2));
}

TEST_CASE("method names") {
    for (Method m : {Method::MethodI, Method::MethodII, Method::PEM, Method::SEM})
        CHECK(method_from_string(to_string(m)) == m);
}
