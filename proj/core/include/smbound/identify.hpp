#pragma once

#include "smbound/bounds.hpp"
#include "smbound/dataset.hpp"
#include "smbound/errorbounds.hpp"
#include "smbound/fps.hpp"
#include "smbound/nlp.hpp"
#include "smbound/predictor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace smbound {

struct IdentifyConfig {
    Method method = Method::MethodII;
    int p_bar_fps = 30;   // FPS membership horizon of Method I
    int p_bar_inf = 100;  // decay constraints and stability certificate horizon
    double alpha = 1.2;
    double gamma = 1.1;
    int multistart = 8;
    std::uint64_t seed = 1;
    NlpOptions nlp;
    bool quadratic_cost = false;  // Method I: sum of squared row bounds instead of the worst one
    // Method I: when no single model meets every horizon's FPS, shift all FPS rows by the
    // smallest uniform amount that makes them jointly feasible instead of failing.
    bool relax_method_one = true;
};

struct StartReport {
    std::string origin;
    SolveStatus status = SolveStatus::MaxIter;
    double objective = 0.0;      // authoritative value, recomputed after the solve
    double max_violation = 0.0;  // recomputed after the solve
    int iterations = 0;
    bool feasible = false;
    double seconds = 0.0;
};

struct ChannelReport {
    int i = -1;  // -1 for a joint (state-space) problem
    Index variables = 0;
    Index constraints = 0;
    std::vector<StartReport> starts;
    int chosen = -1;
    double fps_relaxation = 0.0;  // uniform shift applied to the FPS rows (Method I fallback)
};

struct IdentifyReport {
    Method method = Method::PEM;
    std::vector<ChannelReport> problems;
    std::vector<std::string> notes;
    double seconds = 0.0;
};

// Inputs shared by Methods I and II, per output channel.
struct SetMembershipData {
    Flavor flavor = Flavor::Arx;
    int o = 1, m = 1, q = 1;
    Vector d_bar;
    std::vector<DecayEnvelope> envelopes;
    std::vector<LambdaSeries> lambda;
    std::vector<FpsBundle> fps;  // reduced sets; p = 1 is required, Method I needs [1, p_bar_fps]
    // c+ and c- per channel and horizon on the (unreduced) rows of fps.tables
    std::vector<std::map<int, RowSupports>> supports;
};

// One-step least squares per channel (QR); minimum-norm when rank deficient.
IdentifiedModel pem(const Dataset& ds, Flavor flavor, int o, std::vector<std::string>* warnings = nullptr);

// Unconstrained simulation-error fit started from the given models.
IdentifiedModel sem(const Dataset& ds, Flavor flavor, int o, const std::vector<IdentifiedModel>& starts,
                    const IdentifyConfig& cfg, IdentifyReport* report = nullptr);

// Simulation-error fit with theta_1 in the reduced FPS at p = 1 and h_p(theta_1) in the decay
// box for p in [2, p_bar_inf]. Starts: every reference model, 0.5 x the first, then seeded
// perturbations of the first, up to cfg.multistart.
IdentifiedModel method_two(const Dataset& ds, const SetMembershipData& sm, const std::vector<IdentifiedModel>& refs,
                           const IdentifyConfig& cfg, IdentifyReport* report = nullptr);

// Worst-case bound minimization (epigraph form) with FPS membership for p in [1, p_bar_fps]
// and the decay box beyond, up to p_bar_inf.
IdentifiedModel method_one(const Dataset& ds, const SetMembershipData& sm, const std::vector<IdentifiedModel>& refs,
                           const IdentifyConfig& cfg, IdentifyReport* report = nullptr);

// Simulation cost over the identification portion for the ARX model of one channel, or the
// weighted joint cost of a state-space model (weights 1 / d_bar_i^2). Gradient via the
// sensitivity recursion; gn receives the Gauss-Newton Hessian when non-null.
double arx_simulation_cost(const Dataset& ds, int i, int o, const Vector& theta1, Vector* grad, Matrix* gn);
double ss_simulation_cost(const Dataset& ds, const Vector& params, const Vector& weights, Vector* grad, Matrix* gn);

// NLPs assembled by the methods, exposed for derivative audits. channel is ignored for the
// state-space flavor (joint problem over all channels).
NlpProblem method_two_problem(const Dataset& ds, const SetMembershipData& sm, int channel, const IdentifyConfig& cfg);
NlpProblem method_one_problem(const Dataset& ds, const SetMembershipData& sm, int channel, const IdentifyConfig& cfg);

// Widens the decay scales so that the horizon maps of a reference model fit the box for every
// p in [1, p_to] with margin kappa: L_hat = max(L_hat, kappa max |theta_p,l| / rho^e_l) over the
// output (state) slots, L_u likewise over the input slots.
DecayEnvelope calibrate_envelope(const DecayEnvelope& env, const IdentifiedModel& ref, int i, int p_to,
                                 double kappa = 1.5);

// Recomputes chi, stability certificates and spectral data for a set-membership model.
void certify_model(IdentifiedModel& model, int p_bar_inf, double tol = 1e-6);

}  // namespace smbound
