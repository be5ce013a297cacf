#include "smbound/fps.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>

using namespace smbound;

TEST_CASE("one-row feasible set") {
    RegressorTable t;
    t.phi = RowMatrix(1, 2);
    t.phi << 1, 0;
    t.y = Vector::Constant(1, 2.0);
    t.k = {0};
    const Polytope P = build_theta_p(t, 0.3, 0.2);
    CHECK(P.rows() == 2);
    const Vector e0 = (Vector(2) << 1, 0).finished();
    CHECK(support(P, e0).value == doctest::Approx(2.5));
    CHECK(-support(P, -e0).value == doctest::Approx(1.5));
    CHECK(support(P, Vector::Unit(2, 1)).status == SolveStatus::Unbounded);
}

TEST_CASE("feasible set has two rows per data row") {
    testing::Rng rng(3);
    RegressorTable t;
    t.phi = rng.matrix(17, 3);
    t.y = rng.gaussian(17);
    t.k.resize(17);
    CHECK(build_theta_p(t, 1.0, 0.5).rows() == 34);
}

TEST_CASE("decay box") {
    DecayEnvelope e;
    e.L_hat = 1.0;
    e.L_u = 1.0;
    e.rho_hat = 0.5;
    const Polytope B = build_gamma_p(e, 1, 1, 1, Flavor::Arx);
    CHECK(support(B, Vector::Unit(2, 0)).value == doctest::Approx(0.25));
    CHECK(support(B, Vector::Unit(2, 1)).value == doctest::Approx(0.5));
    e.L_hat = 0.0;
    e.L_u = 0.0;
    const Polytope Z = build_gamma_p(e, 2, 1, 3, Flavor::Arx);
    CHECK(support(Z, Vector::Unit(Z.dim(), 0)).value == doctest::Approx(0.0));
    CHECK(-support(Z, -Vector::Unit(Z.dim(), 1)).value == doctest::Approx(0.0));
}

TEST_CASE("intersection") {
    const Polytope a = box_polytope(-Vector::Ones(2), Vector::Ones(2));
    Polytope universe;
    universe.G = RowMatrix(0, 2);
    universe.h = Vector(0);
    const Polytope u = intersect(a, universe);
    CHECK(u.rows() == a.rows());
    CHECK(u.G == a.G);
    const Polytope far = box_polytope(Vector::Constant(2, 3.0), Vector::Constant(2, 4.0));
    const Polytope both = intersect(a, far);
    CHECK(both.rows() == a.rows() + far.rows());
    CHECK(is_empty(both));
    CHECK_FALSE(is_empty(a));
}

TEST_CASE("emptiness") {
    Polytope p;
    p.G = RowMatrix(2, 1);
    p.G << 1, -1;
    p.h = Vector(2);
    p.h << 0, -1;
    CHECK(is_empty(p));
}

TEST_CASE("emptiness against a grid probe") {
    testing::Rng rng(9);
    for (int c = 0; c < 30; ++c) {
        Polytope p = box_polytope(-Vector::Ones(2), Vector::Ones(2));
        Polytope cuts;
        cuts.G = rng.matrix(4, 2);
        cuts.h = rng.vector(4, -1.0, 0.5);
        cuts.labels.resize(4);
        p = intersect(p, cuts);
        bool hit = false;
        for (int a = 0; a <= 400 && !hit; ++a)
            for (int b = 0; b <= 400 && !hit; ++b) {
                const Vector x = (Vector(2) << -1 + a / 200.0, -1 + b / 200.0).finished();
                hit = p.contains(x, 0.0);
            }
        // a grid hit proves nonemptiness; an empty verdict must then be wrong
        if (hit) CHECK_FALSE(is_empty(p));
        if (is_empty(p)) CHECK_FALSE(hit);
    }
}

TEST_CASE("support of the unit box") {
    const Polytope b = box_polytope(-Vector::Ones(2), Vector::Ones(2));
    CHECK(support(b, Vector::Ones(2)).value == doctest::Approx(2.0));
    CHECK(support(b, Vector::Zero(2)).value == doctest::Approx(0.0));
}

TEST_CASE("support against vertex enumeration") {
    testing::Rng rng(21);
    for (int c = 0; c < 20; ++c) {
        const Polytope P = testing::random_polytope(rng, 3, 6, 4);
        const Vector d = rng.gaussian(3);
        double best = -1e300;
        for (const Vector& v : testing::enumerate_vertices(P.G, P.h)) best = std::max(best, d.dot(v));
        CHECK(support(P, d).value == doctest::Approx(best).epsilon(1e-8));
    }
}

TEST_CASE("redundancy removal: dominated parallel row") {
    Polytope p;
    p.G = RowMatrix(3, 1);
    p.G << 1, 1, -1;
    p.h = Vector(3);
    p.h << 1, 2, 0;
    p.labels.resize(3);
    const Polytope r = remove_redundant(p);
    CHECK(r.rows() == 2);
    CHECK(support(r, Vector::Ones(1)).value == doctest::Approx(1.0));
}

TEST_CASE("redundancy removal: cut outside a square") {
    Polytope p = box_polytope(-Vector::Ones(2), Vector::Ones(2));
    Polytope cut;
    cut.G = RowMatrix(1, 2);
    cut.G << 1, 1;
    cut.h = Vector::Constant(1, 3.0);
    cut.labels.resize(1);
    const Polytope r = remove_redundant(intersect(p, cut));
    CHECK(r.rows() == 4);
}

TEST_CASE("redundancy removal keeps membership") {
    testing::Rng rng(33);
    for (int c = 0; c < 5; ++c) {
        const Polytope P = testing::random_polytope(rng, 3, 6, 30);
        const Polytope R = remove_redundant(P);
        CHECK(R.rows() < P.rows());
        int disagree = 0;
        for (int s = 0; s < 10000; ++s) {
            const Vector x = rng.vector(3, -1.2, 1.2);
            disagree += P.contains(x, 1e-9) != R.contains(x, 1e-9);
        }
        CHECK(disagree == 0);
    }
}

TEST_CASE("feasible set bundle holds the data-consistent predictor") {
    // noise-free y(k+1) = 0.5 y(k) + u(k): the true theta_p lies in every set
    LtiSystem s;
    s.A = Matrix::Constant(1, 1, 0.5);
    s.B = Matrix::Ones(1, 1);
    s.C = Matrix::Ones(1, 1);
    const Dataset ds = simulate_lti(s, random_step_input(300, {-1, 0, 1}, 3, 1), Vector::Zero(1), 1);
    LambdaSeries lam;
    for (int p = 1; p <= 5; ++p) {
        lam.p.push_back(p);
        lam.values.push_back(0.01);
        lam.residual.push_back(0.01);
    }
    DecayEnvelope env;
    env.L_hat = 4.0;
    env.L_u = 4.0;
    env.rho_hat = 0.8;
    const FpsBundle b = build_fps_bundle(ds, Flavor::Arx, 0, 1, {1, 2, 5}, lam, env, 0.0);
    CHECK(b.sets.at(1).contains((Vector(2) << 0.5, 1.0).finished(), 1e-9));
    CHECK(b.sets.at(2).contains((Vector(3) << 0.25, 1.0, 0.5).finished(), 1e-9));
    CHECK(b.eps_hat.at(1) == doctest::Approx(1.2 * 0.01));
    // far too small a bound leaves nothing
    env.L_hat = 0.0;
    CHECK_THROWS_AS(build_fps_bundle(ds, Flavor::Arx, 0, 1, {1}, lam, env, 0.0), EmptyFpsError);
}

TEST_CASE("polytope dump format") {
    const Polytope b = box_polytope(-Vector::Ones(2), Vector::Ones(2));
    const std::string path = "/tmp/smb_dump.txt";
    dump_polytope(path, b);
    std::ifstream f(path);
    std::string line;
    int n = 0;
    while (std::getline(f, line))
        if (!line.empty() && line[0] != '#') {
            CHECK(line.find('|') != std::string::npos);
            ++n;
        }
    CHECK(n == 4);
}
