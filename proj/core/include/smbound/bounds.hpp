#pragma once

#include "smbound/dataset.hpp"
#include "smbound/types.hpp"

#include <string>
#include <vector>

namespace smbound {

struct LambdaResult {
    double lambda = 0.0;
    Vector theta;
    SolveStatus status = SolveStatus::MaxIter;
    bool omega_active = false;  // the ||theta||_inf <= omega box binds
};

// min lambda s.t. |y - phi^T theta| <= lambda + d_bar over all rows, |theta|_inf <= omega, lambda >= 0.
LambdaResult compute_lambda(const RegressorTable& table, double d_bar_i, double omega = 1e6, double tol = 1e-9);

// Same LP with d_bar = 0 and lambda free of its sign constraint: the Chebyshev residual M.
// While the omega box is inactive, compute_lambda(d) == max(0, M - d) for every d >= 0,
// which is how the procedures below evaluate lambda for many noise guesses at once.
LambdaResult chebyshev_residual(const RegressorTable& table, double omega = 1e6, double tol = 1e-9);

struct LambdaSeries {
    int i = 0;
    int o = 1;
    Flavor flavor = Flavor::Arx;
    double d_bar = 0.0;
    std::vector<int> p;                // horizons, ascending
    std::vector<double> residual;      // Chebyshev residual M_p
    std::vector<double> values;        // lambda_p = max(0, M_p - d_bar)
    std::vector<Vector> theta_p_opt;   // minimizers, empty unless requested
    std::vector<char> omega_active;

    LambdaSeries with_d_bar(double d) const;  // re-shifted copy
    double at(int horizon) const;             // lambda at a computed horizon
};

struct LambdaOptions {
    double omega = 1e6;
    double tol = 1e-9;
    bool keep_theta = false;
};

// lambda_p for every listed horizon on the identification portion; LPs run as a parallel map.
LambdaSeries lambda_series(const Dataset& ds, Flavor flavor, int i, int o, const std::vector<int>& horizons,
                           double d_bar_i, const LambdaOptions& opts = {});

std::vector<int> horizon_range(int first, int last);

struct PlateauOptions {
    int window = 20;
    double rel_range = 0.02;
    double abs_range = 1e-6;
};

struct NoiseBoundEstimate {
    Vector d_bar;
    Vector e_d;
    Vector d_init;
    std::vector<char> converged;
    double delta = 1e-8;
    int p_max = 0;
    std::vector<LambdaSeries> series;  // per channel, computed at d_init
    std::vector<std::string> diagnostics;
};

struct NoiseBoundOptions {
    int p_max = 150;
    int p_max_cap = 600;  // geometric retries stop here
    double delta = 1e-8;
    PlateauOptions plateau;
    LambdaOptions lp;
};

NoiseBoundEstimate estimate_noise_bound(const Dataset& ds, Flavor flavor, int o_init, const Vector& d_init,
                                        const NoiseBoundOptions& opts = {});

// Smallest p_bar such that lambda_p < delta for every computed p >= p_bar. Throws if none.
int compute_p_bar(const LambdaSeries& lambda, double delta = 1e-8);

struct OrderEstimate {
    int o = 1;
    std::vector<int> per_channel;
    bool reached_one = false;
    std::vector<std::string> notes;
    std::vector<LambdaSeries> failing_series;  // per channel, series at the first failing order
};

struct OrderOptions {
    double delta = 1e-8;
    // Failure threshold is delta + rel_tol * d_bar: finite-sample residuals of a correctly
    // sized but smaller model sit a hair above those of the starting order.
    double rel_tol = 0.0;
    int p_max = 150;
    LambdaOptions lp;
};

OrderEstimate estimate_order(const Dataset& ds, Flavor flavor, const Vector& d_bar, int o_start,
                             const std::vector<int>& p_bar, const OrderOptions& opts = {});

struct DecayEnvelope {
    int i = 0;
    double L_hat = 0.0;    // scale of the decay bound on output (or state) coefficients
    double rho_hat = 0.5;
    double L_prime = 0.0;  // fitted scale before normalization
    double L_u = 0.0;      // scale of the bound on input coefficients
    int p_bar = 1;
    bool degenerate = false;
};

// Fits g(p) = L' rho^(p+1) over p in [1, p_bar] in least squares subject to g >= lambda,
// then normalizes L_hat = L' / norm, with norm = o d_bar_i (ARX) or ||d_bar||_1 (state space).
DecayEnvelope fit_decay(const LambdaSeries& lambda, int p_bar, double norm);

double envelope_value(const DecayEnvelope& env, int p);  // L' rho^(p+1)

// Half-widths of the decay box at horizon p, in regressor layout order.
// ARX: output slot l (1-based) gets L_hat rho^(p+l); input tap l gets L_u rho^ceil(l/m).
// State space: state slots get L_hat rho^(p+1); the input block multiplying u(k+s) gets
// L_u rho^(p-s), so the most recent input has exponent 1 as in the ARX layout.
Vector decay_box(const DecayEnvelope& env, Flavor flavor, int o, int m, int p);

}  // namespace smbound
