#include "doctest.h"

#include <cmath>

#include "salesopt/errors.hpp"
#include "salesopt/optimizer.hpp"
#include "salesopt/pipeline.hpp"

using namespace salesopt;

namespace {

ScoredAccount scored(std::string id, int d, double y_u, double y_e, double y_u_raw = 1.0,
                     FeatureVector delta = {1.0, 0.5}) {
  ScoredAccount s;
  s.account_id = std::move(id);
  s.d = d;
  s.y_u = y_u;
  s.y_e = y_e;
  s.y_u_raw = y_u_raw;
  s.delta_e = std::move(delta);
  s.y_e_raw = engagement_diff(s.delta_e);
  return s;
}

std::vector<Rep> reps(int m) {
  std::vector<Rep> out;
  for (int j = 0; j < m; ++j) out.push_back(Rep{"R" + std::to_string(j + 1), {0.0}});
  return out;
}

}  // namespace

TEST_CASE("sigmoid weight") {
  CHECK(weight(90, -0.05, 90) == 0.5);
  CHECK(weight(0, -0.05, 90) == doctest::Approx(1.0 / (1.0 + std::exp(-4.5))));
  CHECK(weight(0, -0.05, 90) > 0.98);
  CHECK(weight(365, -0.05, 90) < 0.01);
  CHECK(weight(1e9, -1e6, 0) == 0.0);
  CHECK(weight(-1e9, -1e6, 0) == 1.0);
  CHECK(std::isfinite(weight(1e300, 1e10, 0)));
  OptimizerParams p;
  p.weight_override = 0.5;
  CHECK(weight_for(p, 0) == 0.5);
}

TEST_CASE("objective coefficient and engagement difference") {
  OptimizerParams p;
  const ScoredAccount s = scored("A", 90, 80, 20);
  CHECK(objective_coefficient(s, p) == doctest::Approx(50.0));
  CHECK(engagement_diff(std::vector<double>{-3.0, 2.0}) == 3.0);
  CHECK_THROWS_AS(engagement_diff(std::vector<double>{}), InvalidArgument);
}

TEST_CASE("min-max normalization") {
  std::vector<ScoredAccount> pool{scored("A", 0, 0, 0, -2.0), scored("B", 0, 0, 0, 3.0),
                                  scored("C", 0, 0, 0, 8.0)};
  const auto n = normalize_scores(pool);
  CHECK(n[0].y_u == 0.0);
  CHECK(n[1].y_u == doctest::Approx(50.0));
  CHECK(n[2].y_u == 100.0);
  CHECK(n[0].y_e == 50.0);  // constant y_e_raw
  CHECK(normalize_scores({}).empty());
}

TEST_CASE("eligibility thresholds are strict and combine with or/and") {
  OptimizerParams p;
  std::vector<ScoredAccount> pool{scored("A", 0, 25, 0), scored("B", 0, 26, 0), scored("C", 0, 0, 30),
                                  scored("D", 0, 30, 30)};
  auto ids = [](const std::vector<ScoredAccount>& v) {
    std::vector<std::string> out;
    for (const auto& s : v) out.push_back(s.account_id);
    return out;
  };
  CHECK(ids(eligibility_filter(pool, {}, p, 0)) == std::vector<std::string>{"B", "C", "D"});
  p.combiner = EligibilityCombiner::And;
  CHECK(ids(eligibility_filter(pool, {}, p, 0)) == std::vector<std::string>{"D"});
}

TEST_CASE("cooldown window boundaries") {
  OptimizerParams p;
  std::vector<ScoredAccount> pool{scored("A", 0, 90, 90)};
  std::vector<Recommendation> hist{{"A", "R1", ActionType::PromoteUpsell, 1, 1, 1.0, "", 10}};
  CHECK(eligibility_filter(pool, hist, p, 10).size() == 1);  // same day is outside the window
  CHECK(eligibility_filter(pool, hist, p, 11).empty());
  CHECK(eligibility_filter(pool, hist, p, 24).empty());
  CHECK(eligibility_filter(pool, hist, p, 25).size() == 1);
  CHECK_THROWS_AS(eligibility_filter(pool, hist, p, 9), InvalidArgument);
  p.cooldown_days = 0;
  CHECK(eligibility_filter(pool, hist, p, 11).size() == 1);
}

TEST_CASE("LP layout") {
  OptimizerParams p;
  p.n_min = 1;
  p.n_max = 2;
  std::vector<ScoredAccount> pool{scored("A", 90, 50, 50), scored("B", 90, 60, 60), scored("C", 90, 70, 70)};
  const LpInstance inst = build_lp(pool, reps(2), p);
  CHECK(inst.lp.num_vars() == 6);
  CHECK(inst.lp.rows.size() == 2 * 2 + 3);
  CHECK(inst.lp.rows[0].name == "cap_min[R1]");
  CHECK(inst.lp.rows[1].name == "cap_max[R1]");
  CHECK(inst.lp.rows.back().name == "assign[C]");
  CHECK(inst.var(2, 1) == 5);
  CHECK(inst.lp.objective[5] == doctest::Approx(70.0));

  p.n_min = 2;
  CHECK_THROWS_AS(build_lp(pool, reps(2), p), Infeasible);
  p.n_min = 0;
  p.n_max = 1;
  p.mode = AssignmentMode::ExactlyOne;
  CHECK_THROWS_AS(build_lp(pool, reps(2), p), Infeasible);
  p.capacity_rows = false;
  CHECK(build_lp(pool, reps(2), p).lp.rows.size() == 3);
  CHECK_THROWS_AS(build_lp({}, reps(2), p), InvalidArgument);
  OptimizerParams bad;
  bad.n_min = 3;
  bad.n_max = 2;
  CHECK_THROWS_AS(validate_params(bad), InvalidArgument);
}

TEST_CASE("solve, match and rank a hand instance") {
  // Coefficients 80, 60, 40, 20 at d = d0; two reps with one slot each keep the top two.
  OptimizerParams p;
  p.n_max = 1;
  std::vector<ScoredAccount> pool{scored("A", 90, 40, 40), scored("B", 90, 80, 80), scored("C", 90, 20, 20),
                                  scored("D", 90, 60, 60)};
  const LpInstance inst = build_lp(pool, reps(2), p);
  const AssignmentMatrix a = solve_lp(inst);
  CHECK(validate(a).empty());
  CHECK(assignment_objective(inst, a) == doctest::Approx(140.0));
  const auto matched = match_and_rank(a, pool, p);
  REQUIRE(matched.size() == 2);
  CHECK(matched[0].account_id == "B");
  CHECK(matched[1].account_id == "D");
  CHECK(matched[0].g_rank == 1);
  CHECK(matched[1].g_rank == 2);
  CHECK(matched[0].r_rank == 1);
  CHECK(matched[1].r_rank == 1);
  CHECK(matched[0].rep_id != matched[1].rep_id);
}

TEST_CASE("ranking ties fall back to coefficient then id") {
  AssignmentMatrix a;
  a.entries = Eigen::MatrixXd{{1.0}, {1.0}, {1.0}, {0.49}};
  a.account_index = {"B", "A", "C", "D"};
  a.rep_index = {"R1"};
  OptimizerParams p;
  std::vector<ScoredAccount> pool{scored("A", 90, 50, 50), scored("B", 90, 50, 50), scored("C", 90, 90, 90),
                                  scored("D", 90, 99, 99)};
  const auto m = match_and_rank(a, pool, p);
  REQUIRE(m.size() == 3);
  CHECK(m[0].account_id == "C");
  CHECK(m[1].account_id == "A");
  CHECK(m[2].account_id == "B");
  CHECK(m[2].r_rank == 3);
}

TEST_CASE("action rule truth table") {
  OptimizerParams p;  // at d = d0 the weight is 0.5, so M <= E iff y_u <= y_e
  // M <= E, all |delta| equal -> BoostEngagement
  CHECK(recommend_action(scored("A", 90, 10, 30, 5.0, {2.0, -2.0}), p) == ActionType::BoostEngagement);
  // M <= E, |delta| differ -> PromoteUpsell
  CHECK(recommend_action(scored("A", 90, 10, 30, 5.0, {2.0, 0.5}), p) == ActionType::PromoteUpsell);
  // M > E, positive raw uplift -> PromoteUpsell
  CHECK(recommend_action(scored("A", 90, 90, 30, 5000.0), p) == ActionType::PromoteUpsell);
  // M > E, non-positive raw uplift -> PreventChurn
  CHECK(recommend_action(scored("A", 90, 90, 30, -1000.0), p) == ActionType::PreventChurn);
  CHECK(recommend_action(scored("A", 90, 90, 30, 0.0), p) == ActionType::PreventChurn);
  // ties go to the engagement branch
  CHECK(recommend_action(scored("A", 90, 30, 30, -1.0, {1.0}), p) == ActionType::BoostEngagement);
}

TEST_CASE("plan_day end to end on a tiny pool") {
  OptimizerParams p;
  p.n_max = 2;
  std::vector<ScoredAccount> raw{scored("A", 10, 0, 0, 3.0, {1.0, 0.2}), scored("B", 200, 0, 0, -1.0, {9.0, 0.1}),
                                 scored("C", 50, 0, 0, 1.0, {0.5, 0.1}), scored("D", 90, 0, 0, 0.0, {0.0, 0.0})};
  const DailyPlan plan = plan_day(raw, reps(2), {}, p, 0);
  CHECK(validate(plan.recommendations).empty());
  CHECK(plan.recommendations.size() <= 4);
  for (const auto& r : plan.recommendations) CHECK(r.created_at == 0);
  // An empty eligible pool yields an empty plan.
  p.t_u = p.t_e = 100;
  const DailyPlan none = plan_day(raw, reps(2), {}, p, 0);
  CHECK(none.recommendations.empty());
  CHECK(none.pool.empty());
}
