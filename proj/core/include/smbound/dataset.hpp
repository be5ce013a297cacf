#pragma once

#include "smbound/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace smbound {

enum class Flavor { Arx, StateSpace };
enum class Portion { Identification, Validation };
enum class Discretization { ZeroOrderHold, Tustin };

const char* to_string(Flavor f);
Flavor flavor_from_string(const std::string& s);

struct Dataset {
    Matrix u;  // T x m
    Matrix y;  // T x q, measured
    Matrix z;  // T x q noise-free outputs, empty unless synthetic
    double ts = 1.0;
    Index split_index = 0;

    Index T() const { return u.rows(); }
    Index m() const { return u.cols(); }
    Index q() const { return y.cols(); }
    bool has_truth() const { return z.rows() == y.rows() && z.size() > 0; }
    // [begin, end) sample range of a portion
    Index begin(Portion p) const { return p == Portion::Identification ? 0 : split_index; }
    Index end(Portion p) const { return p == Portion::Identification ? split_index : T(); }
};

struct LtiSystem {
    Matrix A, B, C;
    Vector x0;  // zero when empty
};

struct RegressorTable {
    Flavor flavor = Flavor::Arx;
    int i = 0;  // output channel, 0-based
    int p = 1;
    int o = 1;  // ARX order or state dimension
    int m = 1;
    RowMatrix phi;        // N x dim
    Vector y;             // N targets y_i(k+p)
    std::vector<Index> k; // sample index of each row

    Index N() const { return phi.rows(); }
    Index dim() const { return phi.cols(); }
};

// Regressor length for a horizon: o + m(o+p-1) for ARX, n + m p for state space.
Index regressor_dim(Flavor f, int o, int m, int p);

struct CsvOptions {
    double ts = 1.0;
    double split_fraction = 0.5;
    // Column names; when empty, u*, y* and z* headers are picked up in file order.
    std::vector<std::string> inputs, outputs, truth;
};

Dataset load_csv(const std::string& path, const CsvOptions& opts = {});
void save_csv(const std::string& path, const Dataset& ds);

Index split_index_for(Index T, double fraction);

Dataset simulate_lti(const LtiSystem& sys, const Matrix& u, const Vector& noise, std::uint64_t seed,
                     double ts = 1.0, double split_fraction = 0.5);

// Piecewise constant input: every `hold` samples a value is drawn uniformly from `values`.
Matrix random_step_input(Index T, const std::vector<double>& values, Index hold, std::uint64_t seed,
                         Index m = 1);

RegressorTable build_regressors(const Dataset& ds, Flavor flavor, int i, int p, int o, Portion portion,
                                int stride = 1);

// Sampled-data model of dx/dt = Ac x + Bc u with sampling period ts.
void discretize(const Matrix& Ac, const Matrix& Bc, double ts, Discretization method, Matrix& Ad,
                Matrix& Bd);

// Three-state, one-input underdamped benchmark with full state measurement.
LtiSystem benchmark_system(double ts = 0.1, Discretization method = Discretization::ZeroOrderHold);

}  // namespace smbound
