#pragma once

#include "smbound/types.hpp"

#include <functional>

namespace smbound {

// min f(x) s.t. g_j(x) <= 0. Callbacks fill values and first derivatives on all of R^dim.
struct NlpProblem {
    Index dim = 0;
    Index n_constraints = 0;
    std::function<double(const Vector& x, Vector* grad)> cost;
    // Fills g (n_constraints) and, when jac is non-null, its Jacobian (n_constraints x dim).
    std::function<void(const Vector& x, Vector& g, RowMatrix* jac)> constraints;
    // Optional positive semidefinite model of the cost Hessian (e.g. Gauss-Newton). When given
    // it replaces the quasi-Newton update.
    std::function<Matrix(const Vector& x)> cost_hessian;
    Vector x0;
};

struct NlpOptions {
    double tol = 1e-6;        // KKT residual and step tolerance
    double feas_tol = 1e-7;   // accepted constraint violation, relative to 1 + |g| scale
    int max_iter = 500;
    bool restoration = true;  // run a feasibility phase when x0 violates the constraints
};

// SQP with a damped BFGS Hessian, an l1 merit line search and an elastic fallback for
// inconsistent linearizations. Deterministic for given inputs.
SolveReport solve_nlp(const NlpProblem& nlp, const NlpOptions& opts = {});

}  // namespace smbound
