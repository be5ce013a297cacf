#include "smbound/lp.hpp"
#include "smbound/nlp.hpp"
#include "smbound/qp.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace smbound;

TEST_CASE("lp: single lower bound") {
    LinearProgram lp;
    lp.c = Vector::Ones(1);
    lp.G = RowMatrix::Constant(1, 1, -1.0);
    lp.h = Vector::Constant(1, -3.0);
    const SolveReport r = solve_lp(lp);
    REQUIRE(r.ok());
    CHECK(r.x(0) == doctest::Approx(3.0));
}

TEST_CASE("lp: textbook simplex") {
    LinearProgram lp;
    lp.c = -Vector::Ones(2);
    lp.G = RowMatrix::Ones(1, 2);
    lp.h = Vector::Ones(1);
    lp.lower = Vector::Zero(2);
    const SolveReport r = solve_lp(lp);
    REQUIRE(r.ok());
    CHECK(r.objective == doctest::Approx(-1.0));
}

TEST_CASE("lp: infeasible and unbounded") {
    LinearProgram lp;
    lp.c = Vector::Ones(1);
    lp.G = RowMatrix(2, 1);
    lp.G << 1, -1;
    lp.h = Vector(2);
    lp.h << 0, -1;
    CHECK(solve_lp(lp).status == SolveStatus::Infeasible);
    LinearProgram u;
    u.c = -Vector::Ones(1);
    u.G = RowMatrix::Constant(1, 1, -1.0);
    u.h = Vector::Zero(1);
    CHECK(solve_lp(u).status == SolveStatus::Unbounded);
}

TEST_CASE("lp: warm started maximizer agrees with cold solves") {
    testing::Rng rng(5);
    const LinearProgram lp = testing::random_lp(rng, 4, 30);
    PolytopeMaximizer pm(lp.G, lp.h, lp.lower, lp.upper);
    for (int k = 0; k < 20; ++k) {
        const Vector c = rng.gaussian(4);
        LinearProgram cold = lp;
        cold.c = -c;
        const SolveReport a = pm.maximize(c), b = solve_lp(cold);
        REQUIRE(a.ok());
        CHECK(a.objective == doctest::Approx(-b.objective).epsilon(1e-9));
    }
}

TEST_CASE("lp: random problems against vertex enumeration") {
    const auto r = testing::lp_vertex_suite(25, 17);
    INFO(r.first_failure);
    CHECK(r.pass());
}

TEST_CASE("qp: active constraint") {
    QuadraticProgram qp;
    qp.H = Matrix::Identity(2, 2);
    qp.g = Vector::Zero(2);
    qp.A = RowMatrix(1, 2);
    qp.A << -1, -1;
    qp.b = Vector::Constant(1, -1.0);
    const SolveReport r = solve_qp(qp);
    REQUIRE(r.ok());
    CHECK(r.x(0) == doctest::Approx(0.5));
    CHECK(r.x(1) == doctest::Approx(0.5));
    CHECK(r.multipliers(0) == doctest::Approx(0.5));
}

TEST_CASE("nlp: active bound") {
    NlpProblem p;
    p.dim = 1;
    p.n_constraints = 1;
    p.cost = [](const Vector& x, Vector* g) {
        if (g) *g = Vector::Constant(1, 2 * (x(0) - 2));
        return (x(0) - 2) * (x(0) - 2);
    };
    p.constraints = [](const Vector& x, Vector& g, RowMatrix* J) {
        g = Vector::Constant(1, x(0) - 1);
        if (J) *J = RowMatrix::Ones(1, 1);
    };
    p.x0 = Vector::Zero(1);
    const SolveReport r = solve_nlp(p);
    REQUIRE(r.ok());
    CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("nlp: symmetric optimum") {
    NlpProblem p;
    p.dim = 2;
    p.n_constraints = 1;
    p.cost = [](const Vector& x, Vector* g) {
        if (g) *g = 2 * x;
        return x.squaredNorm();
    };
    p.constraints = [](const Vector& x, Vector& g, RowMatrix* J) {
        g = Vector::Constant(1, 1 - x.sum());
        if (J) *J = -RowMatrix::Ones(1, 2);
    };
    p.x0 = Vector::Constant(2, 3.0);
    const SolveReport r = solve_nlp(p);
    REQUIRE(r.ok());
    CHECK(r.x(0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(r.x(1) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("nlp: polynomial problem reaches a KKT point below its start") {
    // min x^4 + y^2 + z^2 - x z  s.t.  x^2 + y^2 <= 2, x y z >= -1, z <= 1 + x
    NlpProblem p;
    p.dim = 3;
    p.n_constraints = 3;
    p.cost = [](const Vector& v, Vector* g) {
        const double x = v(0), y = v(1), z = v(2);
        if (g) *g = (Vector(3) << 4 * x * x * x - z, 2 * y, 2 * z - x).finished();
        return x * x * x * x + y * y + z * z - x * z;
    };
    p.constraints = [](const Vector& v, Vector& g, RowMatrix* J) {
        const double x = v(0), y = v(1), z = v(2);
        g = (Vector(3) << x * x + y * y - 2, -x * y * z - 1, z - 1 - x).finished();
        if (J) {
            J->resize(3, 3);
            *J << 2 * x, 2 * y, 0, -y * z, -x * z, -x * y, -1, 0, 1;
        }
    };
    p.x0 = (Vector(3) << 1.0, 0.5, 0.5).finished();
    const double f0 = p.cost(p.x0, nullptr);
    const SolveReport r = solve_nlp(p);
    REQUIRE(r.ok());
    CHECK(p.cost(r.x, nullptr) <= f0);
    // stationarity of the Lagrangian by finite differences
    auto lag = [&](const Vector& x) {
        Vector g;
        p.constraints(x, g, nullptr);
        return p.cost(x, nullptr) + r.multipliers.dot(g);
    };
    for (int j = 0; j < 3; ++j) {
        Vector a = r.x, b = r.x;
        a(j) += 1e-6;
        b(j) -= 1e-6;
        CHECK(std::abs((lag(a) - lag(b)) / 2e-6) < 1e-4);
    }
}
