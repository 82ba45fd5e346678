#include "doctest.h"

#include <cmath>
#include <limits>

#include "salesopt/errors.hpp"
#include "salesopt/rng.hpp"
#include "salesopt/simplex.hpp"

using namespace salesopt;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

LinearProgram make(std::vector<double> c) {
  LinearProgram lp;
  lp.objective = Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  lp.upper = Eigen::VectorXd::Constant(lp.objective.size(), kInf);
  return lp;
}

}  // namespace

TEST_CASE("textbook maximization") {
  // max 3x + 5y  s.t.  x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
  LinearProgram lp = make({3, 5});
  lp.rows.push_back({{{0, 1.0}}, RowSense::LessEqual, 4});
  lp.rows.push_back({{{1, 2.0}}, RowSense::LessEqual, 12});
  lp.rows.push_back({{{0, 3.0}, {1, 2.0}}, RowSense::LessEqual, 18});
  const LpSolution s = solve_simplex(lp);
  CHECK(s.objective == doctest::Approx(36.0));
  CHECK(s.x[0] == doctest::Approx(2.0));
  CHECK(s.x[1] == doctest::Approx(6.0));
  CHECK(max_violation(lp, s.x) < 1e-9);
}

TEST_CASE("equality and greater-equal rows need phase one") {
  // max -x - y  s.t.  x + y >= 2, x - y = 1  ->  (1.5, 0.5)
  LinearProgram lp = make({-1, -1});
  lp.rows.push_back({{{0, 1.0}, {1, 1.0}}, RowSense::GreaterEqual, 2});
  lp.rows.push_back({{{0, 1.0}, {1, -1.0}}, RowSense::Equal, 1});
  const LpSolution s = solve_simplex(lp);
  CHECK(s.objective == doctest::Approx(-2.0));
  CHECK(s.x[0] == doctest::Approx(1.5));
  CHECK(s.x[1] == doctest::Approx(0.5));
}

TEST_CASE("upper bounds are honoured") {
  LinearProgram lp = make({1, 2});
  lp.upper = Eigen::Vector2d(0.5, 0.25);
  const LpSolution s = solve_simplex(lp);
  CHECK(s.objective == doctest::Approx(1.0));
  CHECK(s.x[0] == doctest::Approx(0.5));
  CHECK(s.x[1] == doctest::Approx(0.25));
}

TEST_CASE("infeasible and unbounded programs") {
  LinearProgram lp = make({1, 1});
  lp.rows.push_back({{{0, 1.0}, {1, 1.0}}, RowSense::GreaterEqual, 5, "need5"});
  lp.rows.push_back({{{0, 1.0}, {1, 1.0}}, RowSense::LessEqual, 3, "cap3"});
  CHECK_THROWS_AS(solve_simplex(lp), Infeasible);

  LinearProgram ub = make({1, 0});
  ub.rows.push_back({{{1, 1.0}}, RowSense::LessEqual, 1});
  try {
    solve_simplex(ub);
    FAIL("expected unbounded");
  } catch (const Error& e) {
    CHECK(e.code() == "unbounded");
  }
  LinearProgram bad = make({1, 0});
  bad.upper = Eigen::VectorXd::Ones(3);
  CHECK_THROWS_AS(solve_simplex(bad), InvalidArgument);
}

TEST_CASE("degenerate cycling example terminates at the optimum") {
  // Beale's example: cycles under the textbook rule without anti-cycling.
  LinearProgram lp = make({0.75, -20, 0.5, -6});
  lp.rows.push_back({{{0, 0.25}, {1, -8}, {2, -1}, {3, 9}}, RowSense::LessEqual, 0});
  lp.rows.push_back({{{0, 0.5}, {1, -12}, {2, -0.5}, {3, 3}}, RowSense::LessEqual, 0});
  lp.rows.push_back({{{2, 1.0}}, RowSense::LessEqual, 1});
  SimplexOptions opts;
  opts.degenerate_limit = 2;
  const LpSolution s = solve_simplex(lp, opts);
  CHECK(s.objective == doctest::Approx(1.25));
  CHECK(max_violation(lp, s.x) < 1e-9);
}

TEST_CASE("transportation programs have integral optima equal to enumeration") {
  // Rows: per-column capacity <= cap, per-row assignment <= 1. The constraint matrix
  // is totally unimodular, so the LP value must equal the best 0/1 assignment.
  Rng r(77);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + static_cast<int>(r.below(4));
    const int m = 1 + static_cast<int>(r.below(2));
    const int cap = 1 + static_cast<int>(r.below(2));
    std::vector<double> c(static_cast<std::size_t>(n * m));
    for (auto& v : c) v = std::round(r.uniform() * 20.0 - 5.0);
    LinearProgram lp = make(c);
    lp.upper = Eigen::VectorXd::Ones(n * m);
    for (int j = 0; j < m; ++j) {
      LpRow row{{}, RowSense::LessEqual, static_cast<double>(cap)};
      for (int i = 0; i < n; ++i) row.coeffs.emplace_back(i * m + j, 1.0);
      lp.rows.push_back(row);
    }
    for (int i = 0; i < n; ++i) {
      LpRow row{{}, RowSense::LessEqual, 1.0};
      for (int j = 0; j < m; ++j) row.coeffs.emplace_back(i * m + j, 1.0);
      lp.rows.push_back(row);
    }
    // enumerate: each account picks a rep or none
    double best = -kInf;
    std::vector<int> choice(static_cast<std::size_t>(n), 0);
    while (true) {
      std::vector<int> load(static_cast<std::size_t>(m), 0);
      double v = 0;
      bool ok = true;
      for (int i = 0; i < n; ++i)
        if (choice[static_cast<std::size_t>(i)] > 0) {
          const int j = choice[static_cast<std::size_t>(i)] - 1;
          ok &= ++load[static_cast<std::size_t>(j)] <= cap;
          v += c[static_cast<std::size_t>(i * m + j)];
        }
      if (ok) best = std::max(best, v);
      int k = 0;
      while (k < n && ++choice[static_cast<std::size_t>(k)] > m) choice[static_cast<std::size_t>(k++)] = 0;
      if (k == n) break;
    }
    const LpSolution s = solve_simplex(lp);
    CHECK(s.objective == doctest::Approx(best).epsilon(1e-9));
    CHECK(max_violation(lp, s.x) < 1e-9);
    for (Eigen::Index k = 0; k < s.x.size(); ++k)
      CHECK(std::abs(s.x[k] - std::round(s.x[k])) < 1e-9);
  }
}
