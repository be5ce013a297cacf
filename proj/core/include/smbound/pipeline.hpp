#pragma once

#include "smbound/bounds.hpp"
#include "smbound/dataset.hpp"
#include "smbound/errorbounds.hpp"
#include "smbound/identify.hpp"
#include "smbound/predictor.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace smbound {

// Invalid or inconsistent configuration; maps to exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Validation data contradict a certified bound; maps to exit code 3.
class BoundInvalidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum ExitCode : int { ExitOk = 0, ExitConfig = 2, ExitEmptyFps = 3, ExitSolver = 4 };

struct PipelineConfig {
    // data: "paper-example" regenerates the benchmark, anything else is a CSV path
    std::string source = "paper-example";
    std::uint64_t seed = 1;
    Index samples = 10000;
    double ts = 0.1;
    double split_fraction = 0.5;
    std::vector<double> noise = {1.0, 1.0, 0.1};
    std::vector<double> input_values = {-1.0, 0.0, 1.0};
    Index hold = 40;
    std::string discretization = "zoh";
    std::vector<std::string> csv_inputs, csv_outputs, csv_truth;

    // bounds
    Flavor flavor = Flavor::Arx;
    int o_init = 5;
    int order = 0;  // 0: estimate the order
    std::vector<double> d_init;  // empty: zero
    double delta = 1e-8;
    int p_max = 150;
    int p_max_cap = 600;
    int plateau_window = 20;
    double plateau_rel_range = 0.02;
    double order_rel_tol = 0.01;
    double omega = 1e6;

    // identification
    std::vector<Method> methods = {Method::PEM, Method::SEM, Method::MethodI, Method::MethodII};
    double alpha = 1.2;
    double gamma = 1.1;
    int p_bar_fps = 30;
    int p_bar_inf = 100;
    int fps_stride = 4;
    int stride_from = 10;
    double envelope_margin = 1.5;
    int multistart = 8;
    double nlp_tol = 1e-6;
    int nlp_max_iter = 300;
    bool quadratic_cost = false;
    bool relax_method_one = true;  // Method I: shift jointly infeasible FPS rows instead of failing
    std::vector<int> tau_grid;            // empty: 1..30, 35, 50, 80, 100, 120
    std::vector<int> tau_iterative = {150, 200, 300, 500, 1000};
    int tau_p_bar = 100;                  // horizon of the long-horizon recursion
    bool dump_polytopes = true;

    // evaluation
    std::vector<int> eval_p = {1, 10, 20, 30, 60};

    std::string out_dir = "smbound_out";
    int threads = 0;

    std::vector<int> resolved_tau_grid() const;
};

// Reads a JSON document mirroring PipelineConfig; keys not present keep their defaults and
// unknown keys are rejected.
PipelineConfig load_config(const std::string& path);
PipelineConfig config_from_json(const std::string& text);
std::string config_to_json(const PipelineConfig& cfg, int indent = 2);
void validate_config(const PipelineConfig& cfg);

Dataset make_dataset(const PipelineConfig& cfg);

struct EstimateResult {
    Flavor flavor = Flavor::Arx;
    int o = 1;
    Vector d_bar, e_d;
    std::vector<int> p_bar;                  // per channel
    std::vector<LambdaSeries> lambda;        // at the final order, shifted by d_bar
    std::vector<DecayEnvelope> envelopes;    // fitted, before any calibration
    std::vector<char> converged;
    OrderEstimate order;
    Vector first_pass_d_bar;
    std::vector<LambdaSeries> first_pass;  // at o_init, shifted by d_init
    std::vector<std::string> notes;
    double seconds_noise = 0.0;  // first noise-bound pass
    double seconds_order = 0.0;  // order selection
};

// Noise bound at o_init, p_bar, order, noise bound again at the chosen order, decay fit.
EstimateResult estimate_all(const PipelineConfig& cfg, const Dataset& ds);

struct IdentifyResult {
    Flavor flavor = Flavor::Arx;
    std::vector<IdentifiedModel> models;
    std::vector<std::vector<TauSeries>> tau;  // per model, per channel
    std::vector<IdentifyReport> reports;
    SetMembershipData sm;  // calibrated envelopes, reduced sets, supports
    std::vector<std::string> notes;
};

// Builds the sets, runs the configured methods and bounds every model.
IdentifyResult identify_all(const PipelineConfig& cfg, const Dataset& ds, const EstimateResult& est);

// tau_hat on the configured grid plus the long-horizon entries, for every channel.
std::vector<TauSeries> bound_model(const PipelineConfig& cfg, const IdentifiedModel& model,
                                   const SetMembershipData& sm);

struct MetricRow {
    Method method = Method::PEM;
    int i = 0;
    int p = 1;
    double e_p = 0.0;
    double rmse_p = 0.0;
    Index n = 0;
};

struct MetricsReport {
    std::vector<MetricRow> rows;
    std::vector<std::pair<Method, Vector>> sim_rmse;
    std::vector<std::pair<Method, std::vector<BoundValidation>>> validation;

    const MetricRow* find(Method m, int i, int p) const;
    const Vector* sim(Method m) const;
};

// e_p, RMSE_p and the free-run RMSE on the validation portion, and bound checks when tau
// series are given (one entry per model, possibly empty).
MetricsReport evaluate_models(const PipelineConfig& cfg, const Dataset& ds, const std::vector<IdentifiedModel>& models,
                              const std::vector<std::vector<TauSeries>>& tau);

struct Check {
    std::string id;
    std::string description;
    bool pass = false;
    std::string measured;
    std::string reference;
};

struct ReproduceSummary {
    std::vector<Check> checks;
    bool all_pass = false;
    double seconds = 0.0;
};

// CLI entry points. Each writes its artifacts under cfg.out_dir and returns an exit code;
// errors are reported on stderr.
int cmd_generate(const PipelineConfig& cfg);
int cmd_estimate(const PipelineConfig& cfg);
int cmd_identify(const PipelineConfig& cfg);
int cmd_evaluate(const PipelineConfig& cfg);
int cmd_reproduce(const PipelineConfig& cfg);

// Runs the whole benchmark and returns the checks; artifacts go to cfg.out_dir.
ReproduceSummary run_reproduce(const PipelineConfig& cfg);

}  // namespace smbound
