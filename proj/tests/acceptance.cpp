// Runs the full benchmark and the randomized suites, then prints one verdict line per
// acceptance criterion (1 to 11). Exit status is 0 only when every criterion passes.
#include "smbound/pipeline.hpp"
#include "support.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <map>

using namespace smbound;

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string out = "acceptance_out";
    std::uint64_t seed = 1;
    app.add_option("--out", out, "output directory");
    app.add_option("--seed", seed, "benchmark seed");
    CLI11_PARSE(app, argc, argv);

    PipelineConfig cfg;
    cfg.out_dir = out;
    cfg.seed = seed;
    ReproduceSummary rep;
    try {
        rep = run_reproduce(cfg);
    } catch (const std::exception& e) {
        std::cerr << "reproduce failed: " << e.what() << '\n';
    }
    std::map<std::string, const Check*> by_id;
    for (const Check& c : rep.checks) by_id[c.id] = &c;

    const testing::SuiteResult lp = testing::lp_vertex_suite(100, 101, 1e-7);
    const testing::SuiteResult dual = testing::dual_path_suite(100, 102, 1e-10);
    const testing::SuiteResult jac = testing::jacobian_suite(100, 103, 1e-5);
    const testing::SuiteResult red = testing::redundancy_suite(50, 104, 1e-7);
    const testing::SuiteResult lem = testing::no_overshoot_suite(100, 105);
    const bool props = lp.pass() && dual.pass() && jac.pass() && red.pass() && lem.pass();
    auto brief = [](const char* n, const testing::SuiteResult& r) {
        return std::string(n) + " " + std::to_string(r.cases - r.failures) + "/" + std::to_string(r.cases);
    };
    const std::string props_msg = brief("lp", lp) + ", " + brief("dual", dual) + ", " + brief("jacobian", jac) + ", " +
                                  brief("redundancy", red) + ", " + brief("no_overshoot", lem);

    bool all = true;
    for (int k = 1; k <= 11; ++k) {
        const std::string id = "C" + std::to_string(k);
        bool pass = false;
        std::string what;
        if (k == 10) {
            pass = props;
            what = props_msg;
        } else if (const auto it = by_id.find(id); it != by_id.end()) {
            pass = it->second->pass;
            what = it->second->measured;
        } else {
            what = "not evaluated";
        }
        all = all && pass;
        std::cout << "criterion " << k << ": " << (pass ? "PASS" : "FAIL") << "  " << what << '\n';
    }
    return all ? 0 : 1;
}
