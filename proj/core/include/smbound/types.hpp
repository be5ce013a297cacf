#pragma once

#include <Eigen/Dense>

#include <string>

namespace smbound {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIter, RestorationFailed };

const char* to_string(SolveStatus s);

struct SolveReport {
    SolveStatus status = SolveStatus::MaxIter;
    Vector x;
    double objective = 0.0;
    double kkt_residual = 0.0;  // NLP only
    double duality_gap = 0.0;   // LP only
    double max_violation = 0.0;
    int iterations = 0;
    std::string message;
    Vector multipliers;  // one per inequality row when available

    bool ok() const { return status == SolveStatus::Optimal; }
};

}  // namespace smbound
