#pragma once

#include "smbound/types.hpp"

#include <vector>

namespace smbound {

struct LinearProgram {
    Vector c;       // minimize c^T x
    RowMatrix G;    // G x <= h
    Vector h;
    Vector lower;   // optional box; empty means -inf for every variable
    Vector upper;   // empty means +inf
};

struct LpOptions {
    double tol = 1e-9;
    int max_iter = 0;  // 0: scaled with the problem size
    int refactor_period = 64;
};

SolveReport solve_lp(const LinearProgram& lp, double tol = 1e-9);

// Maximizes c^T x over a fixed polytope {G x <= h, lower <= x <= upper} for a stream
// of cost vectors. Internally it runs a revised simplex on the dual standard form,
// whose rows are the (few) primal variables and whose columns are the (many)
// constraints. A basis that is optimal for one cost stays primal feasible for the
// next one, so each new query resumes with dual simplex pivots.
class PolytopeMaximizer {
public:
    PolytopeMaximizer(const RowMatrix& G, const Vector& h, const Vector& lower,
                      const Vector& upper, LpOptions opts = {});

    SolveReport maximize(const Vector& c);

    // Appends rows G x <= h. The current basis stays valid, so the next maximize call resumes
    // from it (row generation).
    void add_rows(const RowMatrix& G, const Vector& h);

    Index rows() const { return r_; }
    Index dim() const { return d_; }
    long total_pivots() const { return total_pivots_; }

private:
    enum class Phase { Primal, Dual };

    double normalize_row(Index j);
    void load_column(Index j, Vector& out) const;
    double column_cost(Index j) const;
    double reduced_cost(Index j) const;
    bool refactor();
    void recompute_primal_point();
    void pivot(Index leave_pos, Index enter, const Vector& delta);
    void cold_basis(const Vector& c);
    SolveStatus run_primal(const Vector& c, int& iters, int max_iter);
    SolveStatus run_dual(const Vector& c, int& iters, int max_iter);
    SolveReport finish(const Vector& c, SolveStatus st, int iters);

    RowMatrix G_;       // rows scaled to unit 2-norm
    Vector h_;
    Vector row_scale_;  // original norm of each row
    Vector lo_, hi_;    // finite or virtual bounds
    std::vector<char> lo_virtual_, hi_virtual_;
    std::vector<char> row_dead_;
    bool trivially_infeasible_ = false;
    Index r_ = 0, d_ = 0;
    LpOptions opts_;

    std::vector<Index> head_;  // basic column per basis position
    std::vector<Index> where_; // basis position per column or -1
    Matrix Binv_;
    Vector x_;      // primal point of the polytope problem
    Vector wB_;     // basic values of the dual standard form
    Vector slack_;  // h - G x for data rows
    bool have_basis_ = false;
    int since_refactor_ = 0;
    long total_pivots_ = 0;
    bool bland_ = false;
    int degenerate_run_ = 0;
    double best_obj_ = 0.0;
};

}  // namespace smbound
