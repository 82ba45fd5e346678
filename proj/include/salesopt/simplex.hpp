#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace salesopt {

enum class RowSense { LessEqual, Equal, GreaterEqual };

struct LpRow {
  std::vector<std::pair<Eigen::Index, double>> coeffs;
  RowSense sense = RowSense::LessEqual;
  double rhs = 0.0;
  std::string name;
};

/// maximize c'x  s.t.  rows,  0 <= x <= upper
struct LinearProgram {
  Eigen::VectorXd objective;
  std::vector<LpRow> rows;
  /// Per-variable upper bound; +inf for none.
  Eigen::VectorXd upper;

  Eigen::Index num_vars() const { return objective.size(); }
};

struct SimplexOptions {
  double pivot_tol = 1e-9;
  double optimality_tol = 1e-9;
  /// Phase-1 objective above this means the program is infeasible.
  double feasibility_tol = 1e-7;
  /// Consecutive degenerate pivots under the largest-coefficient rule before
  /// switching to Bland's rule for the rest of the phase.
  int degenerate_limit = 50;
  int max_iterations = 1'000'000;
};

struct LpSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
  bool used_bland = false;
};

/// Dense two-phase tableau simplex. Pivoting is deterministic: largest reduced cost
/// with lowest-index tie breaks, falling back to Bland's rule under degeneracy.
/// Returns a basic (vertex) solution. Throws Infeasible with the residual phase-1
/// infeasibility and the offending rows; throws Error("unbounded") if the
/// objective is unbounded.
LpSolution solve_simplex(const LinearProgram& lp, const SimplexOptions& options = {});

/// Largest violation of any row or bound at x.
double max_violation(const LinearProgram& lp, const Eigen::VectorXd& x);

}  // namespace salesopt
