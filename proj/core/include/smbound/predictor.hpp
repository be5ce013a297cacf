#pragma once

#include "smbound/bounds.hpp"
#include "smbound/dataset.hpp"
#include "smbound/types.hpp"

#include <string>
#include <vector>

namespace smbound {

enum class Method { MethodI, MethodII, PEM, SEM };
const char* to_string(Method m);
Method method_from_string(const std::string& s);

struct ParameterVector {
    Flavor flavor = Flavor::Arx;
    int i = 0;
    int p = 1;
    int o = 1;
    int m = 1;
    Vector theta;

    Index dim() const { return regressor_dim(flavor, o, m, p); }
    auto z_block() const { return theta.head(o); }
    auto u_block() const { return theta.tail(theta.size() - o); }
};

// theta_p and d theta_p / d theta_1 for p = 1..P (index p-1).
struct HorizonMaps {
    std::vector<Vector> theta;
    std::vector<Matrix> jac;
};

// ARX recursion on the canonical layout [y(k)..y(k-o+1), u(k+p-1)..u(k-o+1)].
HorizonMaps arx_horizon_maps(const Vector& theta1, int o, int m, int P, bool with_jacobian);
ParameterVector iterate_predictor(const ParameterVector& theta1, int p);
Matrix jacobian_h(const ParameterVector& theta1, int p);

// State space: theta_p = [C_i A^p | C_i A^(p-1) B | ... | C_i B] on the layout
// [x(k), u(k), ..., u(k+p-1)]. The Jacobian is taken with respect to the stacked
// per-channel one-step vectors [A_1 B_1, A_2 B_2, ...] (rows of A and B).
HorizonMaps ss_horizon_maps(const Matrix& A, const Matrix& B, int i, int P, bool with_jacobian);

struct StabilityCertificate {
    bool certified = false;
    int p_bar = 0;
    double chi = 0.0;
    int fail_p = 0;       // first violated horizon, 0 when none
    Index fail_index = -1;
    double spectral_radius = 0.0;  // diagnostic only
    std::string reason;
};

struct TauSeries;  // errorbounds.hpp

struct IdentifiedModel {
    Flavor flavor = Flavor::Arx;
    Method method = Method::PEM;
    int o = 1, m = 1, q = 1;
    std::vector<Vector> theta1;  // per channel
    std::vector<DecayEnvelope> envelopes;
    Vector d_bar;
    double alpha = 1.2, gamma = 1.1;
    std::vector<LambdaSeries> lambda;
    std::vector<StabilityCertificate> stability;
    std::vector<std::vector<int>> tau_p;       // per channel horizons
    std::vector<std::vector<double>> tau_hat;  // per channel bounds
    std::vector<double> tau_inf;
    std::vector<double> chi;

    Matrix A_hat() const;  // state-space flavor only
    Matrix B_hat() const;
};

// theta_p of channel i for any flavor.
Vector model_theta_p(const IdentifiedModel& model, int i, int p);
HorizonMaps model_horizon_maps(const IdentifiedModel& model, int i, int P, bool with_jacobian);

// Feedback simulation from measured data up to start_k; returns zhat(start_k+1 .. start_k+P)
// for channel i. ARX uses the measured window y(start_k-o+1..start_k); state space starts
// from x(start_k) = y(start_k).
Vector simulate_model(const IdentifiedModel& model, const Dataset& ds, int i, Index start_k, int P);

// Whole-portion free-run simulation for all channels: the first o samples (ARX) or the first
// sample (state space) are taken from data, everything after is fed back. Rows before the
// first prediction hold the measured values.
Matrix simulate_portion(const IdentifiedModel& model, const Dataset& ds, Portion portion);

// Companion matrix of the ARX output block.
Matrix companion(const Vector& theta_z);
double spectral_radius(const Matrix& M);

StabilityCertificate certify_stability(const Vector& theta1, const DecayEnvelope& env, int o, int m, int p_bar,
                                       double tol = 1e-9);
StabilityCertificate certify_stability_ss(const Matrix& A, const Matrix& B, int i, const DecayEnvelope& env,
                                          int p_bar, double tol = 1e-9);

void assemble_state_space(const std::vector<Vector>& theta1, int n, Matrix& A, Matrix& B);
std::vector<Vector> split_state_space(const Matrix& A, const Matrix& B);

}  // namespace smbound
