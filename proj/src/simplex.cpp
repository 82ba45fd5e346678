#include "salesopt/simplex.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "salesopt/errors.hpp"

namespace salesopt {

namespace {

// A row sum_k a_k x_k <= b with all a_k >= 0 bounds x_k by b / a_k, since every x >= 0.
std::vector<bool> implied_upper_bounds(const LinearProgram& lp) {
  std::vector<bool> implied(static_cast<std::size_t>(lp.num_vars()), false);
  for (const LpRow& row : lp.rows) {
    if (row.sense == RowSense::GreaterEqual) continue;
    const bool nonneg = std::all_of(row.coeffs.begin(), row.coeffs.end(),
                                    [](const auto& c) { return c.second >= 0.0; });
    if (!nonneg) continue;
    for (const auto& [var, a] : row.coeffs)
      if (a > 0.0 && row.rhs / a <= lp.upper(var)) implied[static_cast<std::size_t>(var)] = true;
  }
  return implied;
}

class Tableau {
 public:
  Tableau(Eigen::Index rows, Eigen::Index cols) : t_(Eigen::MatrixXd::Zero(rows + 1, cols + 1)) {}

  Eigen::Index rows() const { return t_.rows() - 1; }
  Eigen::Index cols() const { return t_.cols() - 1; }
  double& at(Eigen::Index i, Eigen::Index j) { return t_(i, j); }
  double at(Eigen::Index i, Eigen::Index j) const { return t_(i, j); }
  double rhs(Eigen::Index i) const { return t_(i, cols()); }
  double& reduced(Eigen::Index j) { return t_(rows(), j); }
  double reduced(Eigen::Index j) const { return t_(rows(), j); }
  double value() const { return t_(rows(), cols()); }
  Eigen::MatrixXd& raw() { return t_; }

  void pivot(Eigen::Index r, Eigen::Index c) {
    t_.row(r) /= t_(r, c);
    t_(r, c) = 1.0;
    const Eigen::RowVectorXd pivot_row = t_.row(r);
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f == 0.0) continue;
      t_.row(i) -= f * pivot_row;
      t_(i, c) = 0.0;
    }
  }

 private:
  Eigen::MatrixXd t_;
};

struct PhaseResult {
  int iterations = 0;
  bool used_bland = false;
  bool unbounded = false;
};

PhaseResult run_phase(Tableau& t, std::vector<Eigen::Index>& basis, const std::vector<bool>& enterable,
                      const SimplexOptions& opt, int iteration_budget) {
  PhaseResult result;
  bool bland = false;
  int degenerate_run = 0;
  const Eigen::Index m = t.rows();
  const Eigen::Index n = t.cols();
  while (true) {
    if (result.iterations >= iteration_budget) throw Error("iteration_limit", "simplex iteration limit hit");
    Eigen::Index enter = -1;
    double best = -opt.optimality_tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!enterable[static_cast<std::size_t>(j)]) continue;
      const double d = t.reduced(j);
      if (bland) {
        if (d < -opt.optimality_tol) {
          enter = j;
          break;
        }
      } else if (d < best) {
        best = d;
        enter = j;
      }
    }
    if (enter < 0) return result;

    Eigen::Index leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      const double a = t.at(i, enter);
      if (a <= opt.pivot_tol) continue;
      const double ratio = std::max(t.rhs(i), 0.0) / a;
      if (ratio < best_ratio - 1e-12) {
        best_ratio = ratio;
        leave = i;
      } else if (ratio <= best_ratio + 1e-12 &&
                 basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)]) {
        // lowest basic index among ties, as Bland's rule requires
        best_ratio = std::min(best_ratio, ratio);
        leave = i;
      }
    }
    if (leave < 0) {
      result.unbounded = true;
      return result;
    }
    degenerate_run = best_ratio <= 1e-12 ? degenerate_run + 1 : 0;
    if (!bland && degenerate_run >= opt.degenerate_limit) {
      bland = true;
      result.used_bland = true;
    }
    t.pivot(leave, enter);
    basis[static_cast<std::size_t>(leave)] = enter;
    ++result.iterations;
  }
}

}  // namespace

double max_violation(const LinearProgram& lp, const Eigen::VectorXd& x) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    worst = std::max(worst, -x(j));
    if (std::isfinite(lp.upper(j))) worst = std::max(worst, x(j) - lp.upper(j));
  }
  for (const LpRow& row : lp.rows) {
    double lhs = 0.0;
    for (const auto& [var, a] : row.coeffs) lhs += a * x(var);
    switch (row.sense) {
      case RowSense::LessEqual: worst = std::max(worst, lhs - row.rhs); break;
      case RowSense::GreaterEqual: worst = std::max(worst, row.rhs - lhs); break;
      case RowSense::Equal: worst = std::max(worst, std::abs(lhs - row.rhs)); break;
    }
  }
  return worst;
}

LpSolution solve_simplex(const LinearProgram& lp, const SimplexOptions& opt) {
  const Eigen::Index n = lp.num_vars();
  if (lp.upper.size() != n) throw InvalidArgument("upper bound vector size differs from objective");

  // Working rows: the program's rows plus explicit bound rows that are not already implied.
  std::vector<LpRow> rows = lp.rows;
  const std::vector<bool> implied = implied_upper_bounds(lp);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isfinite(lp.upper(j)) && !implied[static_cast<std::size_t>(j)])
      rows.push_back(LpRow{{{j, 1.0}}, RowSense::LessEqual, lp.upper(j), fmt::format("ub[{}]", j)});
  }

  // Flip rows so every right-hand side is non-negative.
  for (LpRow& row : rows) {
    if (row.rhs < 0.0) {
      row.rhs = -row.rhs;
      for (auto& c : row.coeffs) c.second = -c.second;
      if (row.sense == RowSense::LessEqual)
        row.sense = RowSense::GreaterEqual;
      else if (row.sense == RowSense::GreaterEqual)
        row.sense = RowSense::LessEqual;
    }
  }

  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  Eigen::Index n_slack = 0, n_art = 0;
  for (const LpRow& row : rows) {
    if (row.sense != RowSense::Equal) ++n_slack;
    if (row.sense != RowSense::LessEqual) ++n_art;
  }
  const Eigen::Index total = n + n_slack + n_art;
  Tableau t(m, total);
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  std::vector<bool> is_artificial(static_cast<std::size_t>(total), false);

  Eigen::Index slack_col = n, art_col = n + n_slack;
  for (Eigen::Index i = 0; i < m; ++i) {
    const LpRow& row = rows[static_cast<std::size_t>(i)];
    for (const auto& [var, a] : row.coeffs) t.at(i, var) += a;
    t.at(i, total) = row.rhs;
    if (row.sense == RowSense::LessEqual) {
      t.at(i, slack_col) = 1.0;
      basis[static_cast<std::size_t>(i)] = slack_col++;
    } else {
      if (row.sense == RowSense::GreaterEqual) t.at(i, slack_col++) = -1.0;
      t.at(i, art_col) = 1.0;
      is_artificial[static_cast<std::size_t>(art_col)] = true;
      basis[static_cast<std::size_t>(i)] = art_col++;
    }
  }

  LpSolution sol;
  std::vector<bool> enterable(static_cast<std::size_t>(total), true);

  // Phase 1: maximize -sum(artificials). Reduced costs d_j = -sum over artificial rows of T(i,j).
  if (n_art > 0) {
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!is_artificial[static_cast<std::size_t>(basis[static_cast<std::size_t>(i)])]) continue;
      t.raw().row(m) -= t.raw().row(i);
    }
    for (Eigen::Index j = 0; j < total; ++j)
      if (is_artificial[static_cast<std::size_t>(j)]) t.reduced(j) = 0.0;
    const PhaseResult p1 = run_phase(t, basis, enterable, opt, opt.max_iterations);
    sol.iterations += p1.iterations;
    sol.used_bland |= p1.used_bland;
    const double infeasibility = -t.value();
    if (infeasibility > opt.feasibility_tol) {
      std::string offending;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (is_artificial[static_cast<std::size_t>(basis[static_cast<std::size_t>(i)])] &&
            t.rhs(i) > opt.feasibility_tol) {
          if (!offending.empty()) offending += ", ";
          offending += rows[static_cast<std::size_t>(i)].name.empty() ? fmt::format("row {}", i)
                                                                     : rows[static_cast<std::size_t>(i)].name;
        }
      }
      throw Infeasible(fmt::format("LP infeasible: minimum total infeasibility {:.6g} (rows: {})",
                                   infeasibility, offending));
    }
    // Drive artificials out of the basis where a real column can replace them.
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!is_artificial[static_cast<std::size_t>(basis[static_cast<std::size_t>(i)])]) continue;
      for (Eigen::Index j = 0; j < total; ++j) {
        if (is_artificial[static_cast<std::size_t>(j)] || std::abs(t.at(i, j)) <= opt.pivot_tol) continue;
        t.pivot(i, j);
        basis[static_cast<std::size_t>(i)] = j;
        break;
      }
    }
    for (Eigen::Index j = 0; j < total; ++j)
      if (is_artificial[static_cast<std::size_t>(j)]) enterable[static_cast<std::size_t>(j)] = false;
  }

  // Phase 2 objective row: d_j = c_B B^-1 A_j - c_j.
  auto cost = [&](Eigen::Index j) { return j < n ? lp.objective(j) : 0.0; };
  t.raw().row(m).setZero();
  for (Eigen::Index j = 0; j < total; ++j) t.reduced(j) = -cost(j);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double cb = cost(basis[static_cast<std::size_t>(i)]);
    if (cb != 0.0) t.raw().row(m) += cb * t.raw().row(i);
  }
  const PhaseResult p2 = run_phase(t, basis, enterable, opt, opt.max_iterations - sol.iterations);
  sol.iterations += p2.iterations;
  sol.used_bland |= p2.used_bland;
  if (p2.unbounded) throw Error("unbounded", "LP objective is unbounded");

  sol.x = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index b = basis[static_cast<std::size_t>(i)];
    if (b < n) sol.x(b) = std::max(t.rhs(i), 0.0);
  }
  sol.objective = lp.objective.dot(sol.x);
  return sol;
}

}  // namespace salesopt
