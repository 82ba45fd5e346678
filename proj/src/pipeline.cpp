#include "salesopt/pipeline.hpp"

#include <map>

#include "salesopt/errors.hpp"

namespace salesopt {

namespace {

constexpr std::uint64_t kHistoryCampaignStream = 11;
constexpr std::uint64_t kHistoryEngagementStream = 12;

Eigen::MatrixXd rows_of(std::span<const Account> accounts, bool engagement) {
  if (accounts.empty()) return {};
  const auto first = engagement ? accounts.front().x_e() : accounts.front().x_u();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(accounts.size()), static_cast<Eigen::Index>(first.size()));
  for (std::size_t i = 0; i < accounts.size(); ++i) {
    const auto v = engagement ? accounts[i].x_e() : accounts[i].x_u();
    for (std::size_t j = 0; j < v.size(); ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
  }
  return X;
}

}  // namespace

PredictionModels train_models(const GenConfig& config, const Population& population,
                              const TrainingOptions& options) {
  const auto& accounts = population.accounts;
  if (accounts.empty()) throw InsufficientData("cannot train on an empty population");
  Rng campaign(config.seed, kHistoryCampaignStream);
  const std::vector<int> a = assign_treatment(config, accounts, campaign);
  const std::vector<double> y = simulate_outcomes(config, accounts, a, campaign);
  const Eigen::MatrixXd Xu = rows_of(accounts, false);
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));

  PredictionModels models;
  models.uplift = fit_uplift(options.learner, Xu, yv, a, options.uplift);

  Rng history(config.seed, kHistoryEngagementStream);
  const Eigen::MatrixXd next = simulate_engagement_next(config, accounts, history);
  const Eigen::MatrixXd Xe = rows_of(accounts, true);
  for (Eigen::Index j = 0; j < next.cols(); ++j)
    models.forecasters.push_back(
        Forecaster::fit(Xe, next.col(j), target_for_metric(static_cast<std::size_t>(j)), options.forecast));
  return models;
}

ScoredAccount score_account(const PredictionModels& models, const Account& account) {
  ScoredAccount s;
  s.account_id = account.id;
  s.d = account.d;
  const FeatureVector xu = account.x_u();
  s.y_u_raw = models.uplift.predict_ite(
      Eigen::Map<const Eigen::VectorXd>(xu.data(), static_cast<Eigen::Index>(xu.size())));
  s.delta_e = forecast_delta(models.forecasters, account);
  s.y_e_raw = engagement_diff(s.delta_e);
  return s;
}

std::vector<ScoredAccount> score_accounts(const PredictionModels& models, std::span<const Account> accounts) {
  std::vector<ScoredAccount> out;
  out.reserve(accounts.size());
  for (const auto& a : accounts) out.push_back(score_account(models, a));
  return out;
}

DailyPlan plan_day(std::span<const ScoredAccount> raw_pool, std::span<const Rep> reps,
                   std::span<const Recommendation> history, const OptimizerParams& params, Day today,
                   ActionRule rule) {
  DailyPlan plan;
  const auto normalized = normalize_scores({raw_pool.begin(), raw_pool.end()});
  plan.pool = eligibility_filter(normalized, history, params, today);
  if (plan.pool.empty() || reps.empty()) return plan;
  const LpInstance lp = build_lp(plan.pool, reps, params);
  plan.assignment = solve_lp(lp);
  plan.objective = assignment_objective(lp, plan.assignment);
  std::map<std::string, const ScoredAccount*> by_id;
  for (const auto& s : plan.pool) by_id[s.account_id] = &s;
  for (const MatchedPair& m : match_and_rank(plan.assignment, plan.pool, params)) {
    const ScoredAccount& s = *by_id.at(m.account_id);
    Recommendation r;
    r.account_id = m.account_id;
    r.rep_id = m.rep_id;
    r.action = rule == ActionRule::Algorithm1
                   ? recommend_action(s, params)
                   : (s.y_u_raw > 0.0 ? ActionType::PromoteUpsell : ActionType::PreventChurn);
    r.g_rank = m.g_rank;
    r.r_rank = m.r_rank;
    r.a_value = m.a_value;
    r.created_at = today;
    plan.recommendations.push_back(std::move(r));
  }
  return plan;
}

}  // namespace salesopt
