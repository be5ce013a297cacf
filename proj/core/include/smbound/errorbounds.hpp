#pragma once

#include "smbound/dataset.hpp"
#include "smbound/fps.hpp"
#include "smbound/predictor.hpp"
#include "smbound/types.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace smbound {

// Raised when chi >= 1: the long-horizon recursion does not contract for this p_bar.
class ContractionError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct TauSeries {
    int i = 0;
    Flavor flavor = Flavor::Arx;
    double gamma = 1.1;
    double d_bar = 0.0;               // d_bar_i (ARX) or ||d_bar||_1 (state space)
    int o = 1;
    int p_bar = 0;                    // horizon used for the long-horizon bounds
    std::map<int, double> finite;     // p -> tau_hat_p
    std::map<int, double> iterative;  // p > p_bar -> over-estimate
    double chi = 0.0;
    bool has_inf = false;
    double tau_inf = 0.0;
    double tau_max = 0.0;
    bool overshoot_possible = false;
    int ell_bar = 0;
    bool bridged = false;  // a trailing window fell between computed horizons
};

// Per-row supports c+ = max phi^T theta and c- = min phi^T theta over a set. They do not depend
// on the model, so every method evaluated on the same set reuses them.
struct RowSupports {
    Vector upper, lower;
    Index failures = 0;
};

RowSupports row_supports(const Polytope& set, const RegressorTable& table, double tol = 1e-9);

// max_k max(c+ - phi^T theta_p, phi^T theta_p - c-), the worst parametric error on the rows.
double parametric_error(const RowSupports& s, const RegressorTable& table, const Vector& theta_p);

double tau_from_supports(const RowSupports& s, const RegressorTable& table, const Vector& theta_p, double gamma,
                         double eps_hat);

// tau_hat_p for channel i of the model on the bundle's set at p. Throws EmptyFpsError when the
// set is empty.
double compute_tau_p(const IdentifiedModel& model, const FpsBundle& fps, int p, double gamma);

double chi_value(const DecayEnvelope& env, Flavor flavor, int o, int p_bar);

// Over-estimate at p_target = l p_bar + j (j in [1, p_bar]) from computed bounds. The trailing
// window max{tau_(j-l o) .. tau_j} is clamped to [1, p_bar]; when it contains no computed
// horizon the nearest computed neighbours on either side are used and *bridged is set.
double iterate_tau(const std::map<int, double>& finite, double chi, double d_bar, int o, int p_bar, int p_target,
                   bool* bridged = nullptr);

// State-space form: tau_pbar of the channel, trailing term ||tau_j||_1 across channels.
double iterate_tau_ss(double tau_pbar, const std::map<int, double>& l1_series, double chi, double d_bar_l1,
                      int p_bar, int p_target, bool* bridged = nullptr);

double tau_infinity(double tau_pbar, double chi, double d_bar);

struct OvershootResult {
    bool possible = false;
    int ell_bar = 0;
    double delta = 0.0;
};

OvershootResult overshoot_check(double tau_max, double tau_pbar, double chi, double d_bar, double delta_fraction = 0.01);

// Fills chi, tau_inf, tau_max, the overshoot fields and the iterative entries at p_targets.
// For the state-space flavor, l1_series supplies ||tau_j||_1 (empty for ARX).
void complete_series(TauSeries& s, const DecayEnvelope& env, const std::vector<int>& p_targets,
                     const std::map<int, double>& l1_series = {});

struct HorizonCheck {
    int p = 0;
    double bound = 0.0;  // tau_hat_p + d_bar_i
    Index checked = 0;
    Index violations = 0;
    double worst_margin = 0.0;  // max |y - zhat| - bound
    double max_error = 0.0;
};

struct BoundValidation {
    int i = 0;
    std::vector<HorizonCheck> horizons;
    Index total_violations = 0;
    Index total_checked = 0;
};

// Checks |y(k+p) - zhat(k+p)| <= tau_hat_p + d_bar_i on the portion for every admissible k.
// Bounds are looked up in finite, then iterative, then tau_inf.
std::vector<BoundValidation> validate_bounds(const IdentifiedModel& model, const Dataset& ds,
                                             const std::vector<TauSeries>& tau, const std::vector<int>& p_list,
                                             Portion portion = Portion::Validation);

}  // namespace smbound
