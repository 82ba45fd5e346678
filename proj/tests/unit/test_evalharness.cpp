#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"

#include "salesopt/errors.hpp"
#include "salesopt/evalharness.hpp"

using namespace salesopt;

namespace {

PanelObservation obs(std::string id, Group g, Period p, double y, FeatureVector x = {}) {
  PanelObservation o;
  o.unit_id = std::move(id);
  o.group = g;
  o.period = p;
  o.t = p == Period::Post ? 1 : 0;
  o.outcome = y;
  o.covariates = std::move(x);
  return o;
}

std::vector<PanelObservation> two_per_cell() {
  return {obs("t1", Group::Treat, Period::Pre, 9),  obs("t2", Group::Treat, Period::Pre, 11),
          obs("t1", Group::Treat, Period::Post, 13), obs("t2", Group::Treat, Period::Post, 15),
          obs("c1", Group::Ctrl, Period::Pre, 7),   obs("c2", Group::Ctrl, Period::Pre, 9),
          obs("c1", Group::Ctrl, Period::Post, 8),  obs("c2", Group::Ctrl, Period::Post, 10)};
}

}  // namespace

TEST_CASE("net ratio") {
  CHECK(net_ratio(120.0, 100.0) == doctest::Approx(1.2));
  CHECK_THROWS_AS(net_ratio(1.0, 0.0), InvalidArgument);
}

TEST_CASE("DiD on cell means") {
  const std::vector<PanelObservation> p{obs("t", Group::Treat, Period::Pre, 10), obs("t", Group::Treat, Period::Post, 14),
                                        obs("c", Group::Ctrl, Period::Pre, 8), obs("c", Group::Ctrl, Period::Post, 9)};
  const auto r = did_estimate(p);
  CHECK(r.tau_hat == 3.0);
  REQUIRE(r.rte);
  CHECK(*r.rte == 3.0);
  CHECK(r.n == 4);
  CHECK(std::isnan(r.std_error));
}

TEST_CASE("DiD standard error and test") {
  const auto r = did_estimate(two_per_cell());
  CHECK(r.tau_hat == doctest::Approx(3.0));
  CHECK(r.treat_pre == 10.0);
  CHECK(r.ctrl_post == 9.0);
  // Each cell contributes sum(e^2)/n_c^2 = 0.5; HC1 scales by n/(n-4) = 2.
  CHECK(r.std_error == doctest::Approx(2.0));
  CHECK(r.t_stat == doctest::Approx(1.5));
  CHECK(r.p_value == doctest::Approx(0.208).epsilon(1e-9));
  CHECK(r.ci_low == doctest::Approx(3.0 - 2.7764451051977987 * 2.0));
  CHECK(r.ci_high == doctest::Approx(3.0 + 2.7764451051977987 * 2.0));
}

TEST_CASE("DiD validation") {
  auto p = two_per_cell();
  for (auto& o : p)
    if (o.group == Group::Ctrl && o.period == Period::Post) o.outcome -= 1.0;
  CHECK_THROWS_AS(did_estimate(p), InvalidArgument);
  DidOptions opt;
  opt.require_rte = false;
  const auto r = did_estimate(p, opt);
  CHECK_FALSE(r.rte);
  CHECK(r.tau_hat == doctest::Approx(4.0));

  p.erase(std::remove_if(p.begin(), p.end(), [](const auto& o) { return o.group == Group::Ctrl && o.period == Period::Pre; }),
          p.end());
  CHECK_THROWS_AS(did_estimate(p, opt), InsufficientData);
}

TEST_CASE("weighted DiD drops unweighted units") {
  const std::map<std::string, double> w{{"t1", 1.0}, {"t2", 3.0}, {"c1", 1.0}, {"c2", 1.0}};
  const auto r = did_estimate(two_per_cell(), {}, &w);
  CHECK(r.treat_pre == doctest::Approx((9.0 + 33.0) / 4.0));
  const std::map<std::string, double> only{{"t1", 1.0}, {"c1", 1.0}};
  const auto s = did_estimate(two_per_cell(), {}, &only);
  CHECK(s.tau_hat == doctest::Approx((13.0 - 9.0) - (8.0 - 7.0)));
}

TEST_CASE("DiD recovers an injected effect on a noiseless panel") {
  PanelConfig cfg;
  cfg.noise_sd = 0.0;
  cfg.unit_sd = 0.0;
  const auto panel = generate_panel(cfg, 0.7);
  const auto r = did_estimate(panel);
  CHECK(r.tau_hat == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("CEM strata and weights") {
  const std::vector<CemUnit> units{{"t1", Group::Treat, {0.2}}, {"t2", Group::Treat, {0.3}},
                                   {"t3", Group::Treat, {0.9}}, {"t4", Group::Treat, {3.0}},
                                   {"c1", Group::Ctrl, {0.1}},  {"c2", Group::Ctrl, {0.8}},
                                   {"c3", Group::Ctrl, {0.7}},  {"c4", Group::Ctrl, {0.6}}};
  const auto r = cem_match(units, {{0.5, 2.0}});
  CHECK(r.strata == 2);
  CHECK(r.dropped_treat == 1);
  CHECK(r.dropped_ctrl == 0);
  CHECK_FALSE(r.empty);
  CHECK(r.matched_treat.size() == 3);
  CHECK(r.matched_ctrl.size() == 4);
  CHECK(r.weights.at("t1") == 1.0);
  CHECK(r.weights.at("c1") == doctest::Approx((2.0 / 3.0) / (1.0 / 4.0)));
  CHECK(r.weights.at("c2") == doctest::Approx((1.0 / 3.0) / (3.0 / 4.0)));
  CHECK_FALSE(r.weights.contains("t4"));

  const std::vector<CemUnit> apart{{"t", Group::Treat, {0.0}}, {"c", Group::Ctrl, {1.0}}};
  CHECK(cem_match(apart, {{0.5}}).empty);
  CHECK_THROWS_AS(cem_match(units, {}), InvalidArgument);
  CHECK_THROWS_AS(cem_match(units, {{1.0, 0.0}}), InvalidArgument);
}

TEST_CASE("CEM improves balance") {
  PanelConfig cfg;
  cfg.covariate_shift = 0.8;
  const auto panel = generate_panel(cfg, 0.0);
  const auto units = cem_units(panel);
  CHECK(units.size() == cfg.n_treat + cfg.n_ctrl);
  std::vector<double> edges;
  for (int k = -4; k <= 4; ++k) edges.push_back(0.5 * k);
  Coarsening c(units.front().covariates.size(), edges);
  const auto m = cem_match(units, c);
  REQUIRE_FALSE(m.empty);
  const auto before = standardized_mean_difference(units);
  const auto after = standardized_mean_difference(units, &m.weights);
  REQUIRE(before.size() == after.size());
  for (std::size_t j = 0; j < before.size(); ++j) CHECK(after[j] < before[j]);
}

TEST_CASE("standardized mean difference by hand") {
  const std::vector<CemUnit> units{{"t1", Group::Treat, {1.0}}, {"t2", Group::Treat, {3.0}},
                                   {"c1", Group::Ctrl, {0.0}}, {"c2", Group::Ctrl, {2.0}}};
  CHECK(standardized_mean_difference(units)[0] == doctest::Approx(1.0));
}

TEST_CASE("placebo pretest") {
  PanelConfig cfg;
  cfg.n_pre_periods = 4;
  cfg.n_post_periods = 1;
  cfg.seed = 3;
  const auto parallel = placebo_pretest(generate_panel(cfg, 1.0));
  CHECK(parallel.cuts.size() == 3);
  CHECK(parallel.corrected_alpha == doctest::Approx(0.05 / 3.0));
  CHECK(parallel.results.size() == 3);

  cfg.treated_trend_divergence = 1.0;
  const auto diverging = placebo_pretest(generate_panel(cfg, 1.0));
  CHECK_FALSE(diverging.parallel_trends_plausible);

  PanelConfig single;
  CHECK_THROWS_AS(placebo_pretest(generate_panel(single, 0.0)), InsufficientData);
  CHECK_THROWS_AS(placebo_pretest(generate_panel(cfg, 0.0), {0}), InvalidArgument);
}

TEST_CASE("placebo false positive rate stays near alpha") {
  PanelConfig cfg;
  cfg.n_pre_periods = 3;
  int rejections = 0;
  const int reps = 100;
  for (int s = 0; s < reps; ++s) {
    cfg.seed = 100 + static_cast<std::uint64_t>(s);
    rejections += !placebo_pretest(generate_panel(cfg, 0.5)).parallel_trends_plausible;
  }
  CHECK(rejections <= 12);
}

TEST_CASE("precision metrics and bookings") {
  auto rec = [](std::string id, ActionType a) {
    Recommendation r;
    r.account_id = std::move(id);
    r.rep_id = "R001";
    r.action = a;
    return r;
  };
  const std::vector<Recommendation> recs{rec("A", ActionType::PromoteUpsell), rec("B", ActionType::PromoteUpsell),
                                         rec("C", ActionType::PreventChurn), rec("D", ActionType::PreventChurn),
                                         rec("E", ActionType::BoostEngagement), rec("Z", ActionType::PromoteUpsell)};
  std::map<std::string, RealizedOutcome> out;
  out["A"].upsell_closes_with_outreach = true;
  out["B"];
  out["C"].churns_without_outreach = true;
  out["C"].outreach_retains = true;
  out["D"].churns_without_outreach = true;
  out["E"];
  const auto m = precision_metrics(recs, out);
  CHECK(m.upsell_recs == 2);
  CHECK(*m.p_ups == 0.5);
  CHECK(*m.p_ch == 1.0);
  CHECK(*m.p_rec == 0.5);
  CHECK(*m.p_low == 0.0);
  CHECK_FALSE(precision_metrics({}, out).p_ups);

  RealizedOutcome o;
  o.bookings_with_outreach = 2.5;
  CHECK(realized_bookings(recs[0], o) == 2.5);
  o.outreach_retains = true;
  CHECK(realized_bookings(recs[0], o) == 3.5);
}

TEST_CASE("constraints met by hand") {
  std::vector<Rep> reps(2);
  reps[0].id = "R1";
  reps[1].id = "R2";
  OptimizerParams params;
  params.n_max = 2;
  auto rec = [](std::string a, std::string r) {
    Recommendation x;
    x.account_id = std::move(a);
    x.rep_id = std::move(r);
    return x;
  };
  const std::vector<Recommendation> recs{rec("A", "R1"), rec("B", "R1"), rec("C", "R1"), rec("A", "R2")};
  CHECK(constraints_met(recs, reps, params) == doctest::Approx(3.0 / 5.0));
  params.n_min = 2;
  CHECK(constraints_met(recs, reps, params) == doctest::Approx(4.0 / 7.0));
  CHECK(constraints_met({}, {}, params) == 1.0);
}

TEST_CASE("ablation report shape") {
  AblationConfig cfg;
  cfg.population.n_accounts = 200;
  cfg.population.n_reps = 4;
  const auto report = run_ablation(cfg);
  REQUIRE(report.variants.size() == 4);
  std::set<int> ranks;
  for (const auto& v : report.variants) ranks.insert(v.bookings_rank);
  CHECK(ranks == std::set<int>{1, 2, 3, 4});
  const auto& full = report.at(AblationVariant::Full);
  CHECK(full.constraints_met == 1.0);
  CHECK(full.capacity_ratio <= 1.0);
  CHECK(full.matched <= 4u * static_cast<std::size_t>(cfg.optimizer.n_max));
  const auto& b = report.at(AblationVariant::B_NoCapacity);
  CHECK(b.matched >= full.matched);
  const auto table = format_ablation_table(report);
  CHECK(std::count(table.begin(), table.end(), '\n') == 5);
  CHECK(table.find("C_SimplifiedRules") != std::string::npos);

  CHECK(variant_from_string("B") == AblationVariant::B_NoCapacity);
  CHECK_THROWS_AS(variant_from_string("Q"), InvalidArgument);
  const std::array<AblationVariant, 1> only{AblationVariant::Full};
  CHECK_THROWS_AS(run_ablation(cfg, only).at(AblationVariant::A_NoWeighting), NotFound);
}
