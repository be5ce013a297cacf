// Timing of the inner kernels: LP solves, support queries on a feasible set, horizon maps,
// redundancy removal and a lambda series.
#include "smbound/bounds.hpp"
#include "smbound/fps.hpp"
#include "smbound/predictor.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace smbound;

namespace {

Dataset benchmark_data(Index T) {
    const LtiSystem sys = benchmark_system();
    Vector noise(3);
    noise << 1.0, 1.0, 0.1;
    return simulate_lti(sys, random_step_input(T, {-1, 0, 1}, 40, 1), noise, 1, 0.1);
}

LinearProgram random_lp(Index n, Index m, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::normal_distribution<double> N;
    LinearProgram lp;
    lp.c = Vector::NullaryExpr(n, [&](Index) { return N(g); });
    lp.G = RowMatrix::NullaryExpr(m, n, [&](Index, Index) { return N(g); });
    lp.h = Vector::Constant(m, 1.0);
    lp.lower = Vector::Constant(n, -5.0);
    lp.upper = Vector::Constant(n, 5.0);
    return lp;
}

// The one-step ARX set of channel 1 at order 3 with a generous decay box.
Polytope arx_set(const Dataset& ds, int p) {
    const RegressorTable t = build_regressors(ds, Flavor::Arx, 0, p, 3, Portion::Identification);
    DecayEnvelope env;
    env.L_hat = 50.0;
    env.L_u = 50.0;
    env.rho_hat = 0.96;
    return intersect(build_theta_p(t, 0.3, 1.0), build_gamma_p(env, 3, 1, p, Flavor::Arx));
}

}  // namespace

static void BM_SolveLp(benchmark::State& state) {
    const LinearProgram lp = random_lp(state.range(0), 4 * state.range(0), 7);
    for (auto _ : state) benchmark::DoNotOptimize(solve_lp(lp));
}
BENCHMARK(BM_SolveLp)->Arg(5)->Arg(20)->Arg(60);

static void BM_SupportQueries(benchmark::State& state) {
    const Dataset ds = benchmark_data(4000);
    const Polytope P = remove_redundant(arx_set(ds, static_cast<int>(state.range(0))));
    std::mt19937_64 g(3);
    std::normal_distribution<double> N;
    for (auto _ : state) {
        SupportOracle o(P);
        for (int k = 0; k < 50; ++k) benchmark::DoNotOptimize(o.query(Vector::NullaryExpr(P.dim(), [&](Index) { return N(g); })));
    }
}
BENCHMARK(BM_SupportQueries)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

static void BM_RemoveRedundant(benchmark::State& state) {
    const Dataset ds = benchmark_data(4000);
    const Polytope P = arx_set(ds, static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(remove_redundant(P));
}
BENCHMARK(BM_RemoveRedundant)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

static void BM_HorizonMaps(benchmark::State& state) {
    Vector th(6);
    th << 1.05, 0.27, -0.56, 0.02, 0.09, 0.14;
    const bool jac = state.range(1) != 0;
    for (auto _ : state) benchmark::DoNotOptimize(arx_horizon_maps(th, 3, 1, static_cast<int>(state.range(0)), jac));
}
BENCHMARK(BM_HorizonMaps)->Args({100, 0})->Args({100, 1});

static void BM_LambdaSeries(benchmark::State& state) {
    const Dataset ds = benchmark_data(4000);
    for (auto _ : state)
        benchmark::DoNotOptimize(lambda_series(ds, Flavor::Arx, 0, 3, {1, static_cast<int>(state.range(0))}, 1.0));
}
BENCHMARK(BM_LambdaSeries)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
