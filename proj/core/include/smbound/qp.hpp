#pragma once

#include "smbound/types.hpp"

namespace smbound {

// min 0.5 x^T H x + g^T x  s.t.  A x <= b, with H symmetric positive definite.
struct QuadraticProgram {
    Matrix H;
    Vector g;
    RowMatrix A;
    Vector b;
};

struct QpOptions {
    double tol = 1e-10;  // relative violation accepted at termination
    int max_iter = 0;    // 0: scaled with the problem size
};

// Dual active-set method of Goldfarb and Idnani. Starts from the unconstrained minimizer and
// adds the most violated constraint at a time, so only the (few) active rows are factorized.
// multipliers holds one entry per row of A (zero when inactive).
SolveReport solve_qp(const QuadraticProgram& qp, const QpOptions& opts = {});

}  // namespace smbound
