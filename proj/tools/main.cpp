// smbound command line: generate | estimate | identify | evaluate | reproduce
#include "smbound/json_io.hpp"
#include "smbound/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

int main(int argc, char** argv) {
    using namespace smbound;
    CLI::App app{"Set membership identification of LTI predictors with guaranteed simulation error bounds"};
    app.set_version_flag("--version", std::string(version_string()));
    app.require_subcommand(1, 1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads, p_bar_fps, p_bar_inf;
    std::optional<std::string> out;
    bool print_config = false;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "random seed (data, multistart)");
        sub->add_option("--threads", threads, "worker threads (0: hardware concurrency)")->check(CLI::NonNegativeNumber);
        sub->add_option("--out", out, "output directory");
        sub->add_option("--p-bar-fps", p_bar_fps, "FPS membership horizon of Method I")->check(CLI::PositiveNumber);
        sub->add_option("--p-bar-inf", p_bar_inf, "decay constraint and certificate horizon")->check(CLI::PositiveNumber);
        sub->add_flag("--print-config", print_config, "print the resolved configuration and exit");
    };
    CLI::App* gen = app.add_subcommand("generate", "simulate the benchmark system (or load a CSV) and write dataset.csv");
    CLI::App* est = app.add_subcommand("estimate", "noise bound, order, decay envelope; writes lambda_series.csv and bounds_report.json");
    CLI::App* idf = app.add_subcommand("identify", "PEM, SEM, Method I and II; writes model_*.json, tau_series_*.csv, identify_report.json");
    CLI::App* evl = app.add_subcommand("evaluate", "validation errors and bound checks; writes metrics and bound_validation.json");
    CLI::App* rep = app.add_subcommand("reproduce", "full benchmark with pass/fail summary");
    for (CLI::App* s : {gen, est, idf, evl, rep}) common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? ExitOk : ExitConfig;
    }

    PipelineConfig cfg;
    try {
        if (!config_path.empty()) cfg = load_config(config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return ExitConfig;
    }
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (out) cfg.out_dir = *out;
    if (p_bar_fps) cfg.p_bar_fps = *p_bar_fps;
    if (p_bar_inf) cfg.p_bar_inf = *p_bar_inf;
    if (print_config) {
        std::cout << config_to_json(cfg) << '\n';
        return ExitOk;
    }

    if (*gen) return cmd_generate(cfg);
    if (*est) return cmd_estimate(cfg);
    if (*idf) return cmd_identify(cfg);
    if (*evl) return cmd_evaluate(cfg);
    return cmd_reproduce(cfg);
}
