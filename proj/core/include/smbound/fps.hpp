#pragma once

#include "smbound/bounds.hpp"
#include "smbound/dataset.hpp"
#include "smbound/lp.hpp"
#include "smbound/types.hpp"

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace smbound {

struct RowLabel {
    enum class Kind { Data, Decay, Other };
    Kind kind = Kind::Other;
    Index index = 0;  // data row k or box coordinate
    int sign = 1;     // +1 upper side, -1 lower side
};

struct Polytope {
    RowMatrix G;
    Vector h;
    std::vector<RowLabel> labels;

    Index dim() const { return G.cols(); }
    Index rows() const { return G.rows(); }
    bool contains(const Vector& x, double tol = 1e-9) const;
};

// Raised when a feasible set comes out empty: the data contradict the estimated bounds.
class EmptyFpsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Polytope build_theta_p(const RegressorTable& table, double eps_hat, double d_bar_i);
Polytope build_gamma_p(const DecayEnvelope& env, int o, int m, int p, Flavor flavor);
Polytope box_polytope(const Vector& lower, const Vector& upper);
Polytope intersect(const Polytope& a, const Polytope& b);

bool is_empty(const Polytope& p, double tol = 1e-9);

struct SupportResult {
    double value = 0.0;
    SolveStatus status = SolveStatus::MaxIter;
    Vector argmax;
};

SupportResult support(const Polytope& p, const Vector& c, double tol = 1e-9);

// Warm-started support queries on one polytope. Single axis rows (a box) are handed to the
// solver as variable bounds.
class SupportOracle {
public:
    explicit SupportOracle(const Polytope& p, double tol = 1e-9);
    SupportResult query(const Vector& c);
    long pivots() const { return lp_->total_pivots(); }

private:
    std::unique_ptr<PolytopeMaximizer> lp_;
};

// max c_j^T theta for every row c_j of C, as a chunked parallel map (one oracle per chunk).
std::vector<SupportResult> support_batch(const Polytope& p, const RowMatrix& C, double tol = 1e-9);

struct RedundancyStats {
    Index before = 0, after = 0;
    int sweeps = 0;
    Index box_filtered = 0;
    Index lp_failures = 0;
};

Polytope remove_redundant(const Polytope& p, RedundancyStats* stats = nullptr, double tol = 1e-9);

void dump_polytope(const std::string& path, const Polytope& p);

struct FpsBundle {
    int i = 0;
    Flavor flavor = Flavor::Arx;
    int o = 1, m = 1;
    double alpha = 1.2;
    double d_bar = 0.0;
    DecayEnvelope envelope;
    std::map<int, Polytope> sets;        // p -> Theta^{L rho}_p
    std::map<int, double> eps_hat;       // p -> alpha lambda_p
    std::map<int, RegressorTable> tables;  // rows used for the set and its queries
    bool reduced = false;
};

struct FpsOptions {
    double alpha = 1.2;
    int stride = 1;            // row subsampling for p > stride_from
    int stride_from = 10;
    bool check_empty = true;
};

FpsBundle build_fps_bundle(const Dataset& ds, Flavor flavor, int i, int o, const std::vector<int>& horizons,
                           const LambdaSeries& lambda, const DecayEnvelope& env, double d_bar_i,
                           const FpsOptions& opts = {});

}  // namespace smbound
