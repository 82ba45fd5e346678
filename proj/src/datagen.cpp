#include "salesopt/datagen.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "salesopt/errors.hpp"

namespace salesopt {

namespace {

constexpr double kFeatureClip = 3.0;

// Independent streams per generator concern, so adding draws to one never shifts another.
enum Stream : std::uint64_t {
  kAccountStream = 1,
  kRepStream = 2,
  kPanelStream = 3,
};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double clipped_normal(Rng& rng) { return std::clamp(rng.normal(), -kFeatureClip, kFeatureClip); }

double dot_prefix(const FeatureVector& w, const FeatureVector& x) {
  double s = 0.0;
  const std::size_t n = std::min(w.size(), x.size());
  for (std::size_t i = 0; i < n; ++i) s += w[i] * x[i];
  return s;
}

}  // namespace

BanditEnvSpec default_bandit_env(std::size_t context_dims) {
  BanditEnvSpec env;
  auto tilt = [&](std::size_t index, double value) {
    FeatureVector t(context_dims, 0.0);
    if (index < context_dims) t[index] = value;
    return t;
  };
  // x_a = first four account features: 0..2 drive the uplift, 3 is an engagement proxy.
  env.per_action[static_cast<std::size_t>(ActionType::BoostEngagement)] =
      ActionResponse{0.30, 0.20, tilt(3, 0.08), {}};
  env.per_action[static_cast<std::size_t>(ActionType::PreventChurn)] =
      ActionResponse{0.30, 0.20, tilt(1, -0.08), {}};
  env.per_action[static_cast<std::size_t>(ActionType::PromoteUpsell)] =
      ActionResponse{0.35, 0.15, tilt(0, 0.08), {}};
  return env;
}

BanditEnvSpec dominant_action_env(ActionType dominant) {
  BanditEnvSpec env;
  for (ActionType a : kAllActions)
    env.per_action[static_cast<std::size_t>(a)] =
        a == dominant ? ActionResponse{1.0, 0.0, {}, {}} : ActionResponse{0.3, 0.3, {}, {}};
  return env;
}

BanditEnvSpec symmetric_env(double click, double dismiss) {
  BanditEnvSpec env;
  for (auto& r : env.per_action) r = ActionResponse{click, dismiss, {}, {}};
  return env;
}

void validate_config(const GenConfig& c) {
  if (!(c.treatment_share > 0.0 && c.treatment_share < 1.0))
    throw InvalidArgument("treatment_share must lie in (0,1)");
  if (c.account_dims < 1 || c.rep_dims < 1 || c.engagement_dims < 1 || c.engagement_metrics < 1)
    throw InvalidArgument("all feature dimensions must be >= 1");
  if (c.engagement_dims > c.account_dims)
    throw InvalidArgument("engagement_dims cannot exceed account_dims");
  if (c.account_dims < 5 && c.baseline.nonlinearity != 0.0)
    throw InvalidArgument("baseline nonlinearity needs account_dims >= 5");
  for (std::size_t f : c.effect.features)
    if (f >= c.account_dims) throw InvalidArgument("effect feature index out of range");
  if (!(c.noise_sd >= 0.0)) throw InvalidArgument("noise_sd must be >= 0");
  if (c.max_days_to_rtcd < 0) throw InvalidArgument("max_days_to_rtcd must be >= 0");
}

double true_effect(const EffectSpec& spec, const FeatureVector& x) {
  double tau = spec.intercept;
  for (std::size_t k = 0; k < spec.coef.size(); ++k) tau += spec.coef[k] * x.at(spec.features[k]);
  return tau;
}

double baseline_outcome(const BaselineSpec& spec, const FeatureVector& x) {
  double y = spec.intercept;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double c = spec.coef.empty() ? ((j % 2 == 0) ? 1.0 : -1.0) / static_cast<double>(j + 1)
                                       : (j < spec.coef.size() ? spec.coef[j] : 0.0);
    y += c * x[j];
  }
  if (spec.nonlinearity != 0.0) y += spec.nonlinearity * (std::sin(x[3]) + 0.5 * x[4] * x[4]);
  return y;
}

std::pair<double, double> engagement_range(std::size_t metric) {
  return metric == 1 ? std::pair{0.0, 1.0} : std::pair{0.0, 100.0};
}

Population generate_population(const GenConfig& config) {
  validate_config(config);
  Population pop;
  Rng rng(config.seed, kAccountStream);
  const std::size_t p = config.account_dims;
  std::vector<std::size_t> u_index(p);
  for (std::size_t j = 0; j < p; ++j) u_index[j] = j;
  std::vector<std::size_t> e_index;
  for (std::size_t j = p - config.engagement_dims; j < p; ++j) e_index.push_back(j);

  pop.accounts.reserve(config.n_accounts);
  for (std::size_t i = 0; i < config.n_accounts; ++i) {
    Account a;
    a.id = fmt::format("A{:05d}", i + 1);
    a.x.resize(p);
    for (double& v : a.x) v = clipped_normal(rng);
    a.u_index = u_index;
    a.e_index = e_index;
    const FeatureVector xe = a.x_e();
    for (std::size_t j = 0; j < config.engagement_metrics; ++j) {
      const auto [lo, hi] = engagement_range(j);
      const double z = xe[j % xe.size()];
      const double now = (j == 1) ? 0.5 + 0.1 * z : 50.0 + 12.0 * z;
      a.engagement_now.push_back(std::clamp(now, lo, hi));
    }
    a.d = static_cast<int>(rng.below(static_cast<std::uint64_t>(config.max_days_to_rtcd) + 1));
    a.true_ite = true_effect(config.effect, a.x);
    pop.accounts.push_back(std::move(a));
  }

  Rng rep_rng(config.seed, kRepStream);
  pop.reps.reserve(config.n_reps);
  for (std::size_t j = 0; j < config.n_reps; ++j) {
    Rep r;
    r.id = fmt::format("R{:03d}", j + 1);
    r.s.resize(config.rep_dims);
    for (double& v : r.s) v = clipped_normal(rep_rng);
    pop.reps.push_back(std::move(r));
  }
  return pop;
}

double true_propensity(const GenConfig& config, const Account& a) {
  const double base = std::log(config.treatment_share / (1.0 - config.treatment_share));
  if (config.confounding == 0.0) return config.treatment_share;
  return sigmoid(base + config.confounding * a.x.at(1));
}

std::vector<int> assign_treatment(const GenConfig& config, const std::vector<Account>& accounts,
                                  Rng& rng) {
  std::vector<int> a(accounts.size());
  for (std::size_t i = 0; i < accounts.size(); ++i)
    a[i] = rng.bernoulli(true_propensity(config, accounts[i])) ? 1 : 0;
  return a;
}

std::vector<double> simulate_outcomes(const GenConfig& config, const std::vector<Account>& accounts,
                                      const std::vector<int>& assignment, Rng& rng) {
  if (assignment.size() != accounts.size())
    throw InvalidArgument("treatment assignment must cover all accounts");
  std::vector<double> y(accounts.size());
  for (std::size_t i = 0; i < accounts.size(); ++i) {
    const Account& acc = accounts[i];
    const double tau = acc.true_ite ? *acc.true_ite : true_effect(config.effect, acc.x);
    // always draw, so the noise of account i does not depend on noise_sd being zero
    const double eps = rng.normal();
    y[i] = baseline_outcome(config.baseline, acc.x) + assignment[i] * tau + config.noise_sd * eps;
  }
  return y;
}

Eigen::MatrixXd simulate_engagement_next(const GenConfig& config,
                                         const std::vector<Account>& accounts, Rng& rng) {
  const std::size_t k = config.engagement_metrics;
  Eigen::MatrixXd next(static_cast<Eigen::Index>(accounts.size()), static_cast<Eigen::Index>(k));
  const auto& drift = config.drift;
  for (std::size_t i = 0; i < accounts.size(); ++i) {
    const FeatureVector xe = accounts[i].x_e();
    for (std::size_t j = 0; j < k; ++j) {
      const bool adoption = (j == 1);
      const double slope = adoption ? drift.pa_slope : drift.pu_slope;
      const double sd = adoption ? drift.pa_noise_sd : drift.pu_noise_sd;
      const double tilt = dot_prefix(adoption ? drift.pa_coef : drift.pu_coef, xe);
      const auto [lo, hi] = engagement_range(j);
      const double value = accounts[i].engagement_now.at(j) + slope + tilt + sd * rng.normal();
      next(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::clamp(value, lo, hi);
    }
  }
  return next;
}

ResponseProbabilities response_probabilities(const BanditEnvSpec& env, const FeatureVector& x_t,
                                             ActionType action) {
  const ActionResponse& r = env.per_action[static_cast<std::size_t>(action)];
  ResponseProbabilities p;
  p.click = std::clamp(r.click + dot_prefix(r.click_tilt, x_t), 0.0, 1.0);
  p.dismiss = std::clamp(r.dismiss + dot_prefix(r.dismiss_tilt, x_t), 0.0, 1.0 - p.click);
  p.no_click = std::max(0.0, 1.0 - p.click - p.dismiss);
  return p;
}

double expected_reward(const BanditEnvSpec& env, const FeatureVector& x_t, ActionType action) {
  const auto p = response_probabilities(env, x_t, action);
  return p.click - p.dismiss;
}

FeedbackEvent simulate_feedback(const BanditEnvSpec& env, const BanditContext& context,
                                ActionType action, Rng& rng, const std::string& rep_id,
                                const std::string& account_id, Day t) {
  const auto p = response_probabilities(env, context.concat(), action);
  const double u = rng.uniform();
  FeedbackKind kind = FeedbackKind::NoClick;
  if (u < p.click)
    kind = FeedbackKind::DeepLinkClicked;
  else if (u < p.click + p.dismiss)
    kind = FeedbackKind::NotificationDismissed;
  return make_feedback(rep_id, account_id, action, kind, t);
}

BanditContext make_context(const Account& account, const Rep& rep, const AlertHistory& history,
                           Day today) {
  BanditContext c;
  c.x_a.assign(account.x.begin(),
               account.x.begin() + static_cast<std::ptrdiff_t>(std::min(kBanditAccountDims, account.x.size())));
  c.x_a.resize(kBanditAccountDims, 0.0);
  c.x_s = rep.s;
  c.x_r = encode_alert_history(history, today);
  return c;
}

std::vector<PanelObservation> generate_panel(const PanelConfig& config, double injected_effect) {
  if (!std::isfinite(injected_effect)) throw InvalidArgument("injected_effect must be finite");
  if (config.n_pre_periods < 1 || config.n_post_periods < 0)
    throw InvalidArgument("panel needs at least one pre period");
  Rng rng(config.seed, kPanelStream);
  std::vector<PanelObservation> panel;
  const int periods = config.n_pre_periods + config.n_post_periods;
  const std::size_t n = config.n_treat + config.n_ctrl;
  panel.reserve(n * static_cast<std::size_t>(periods));
  for (std::size_t u = 0; u < n; ++u) {
    const bool treated = u < config.n_treat;
    const double shift = treated ? config.covariate_shift : 0.0;
    FeatureVector cov{rng.normal() + shift, rng.normal() + shift, rng.normal() + shift};
    const double alpha = config.unit_sd * rng.normal() + 0.2 * cov[0];
    const std::string id = fmt::format("{}{:04d}", treated ? "T" : "C", u + 1);
    for (int t = 0; t < periods; ++t) {
      PanelObservation obs;
      obs.unit_id = id;
      obs.group = treated ? Group::Treat : Group::Ctrl;
      obs.t = t;
      obs.period = t < config.n_pre_periods ? Period::Pre : Period::Post;
      const double eps = rng.normal();
      double y = config.base_level + alpha + config.time_trend * t;
      if (treated) {
        y += config.treated_trend_divergence * t;
        if (obs.period == Period::Post) y += injected_effect;
      }
      obs.outcome = y + config.noise_sd * eps;
      obs.covariates = cov;
      panel.push_back(std::move(obs));
    }
  }
  return panel;
}

std::vector<RealizedOutcome> simulate_realized_outcomes(const OutcomeWorldSpec& spec,
                                                        const std::vector<Account>& accounts,
                                                        const Eigen::MatrixXd& engagement_next,
                                                        Rng& rng) {
  std::vector<RealizedOutcome> out(accounts.size());
  for (std::size_t i = 0; i < accounts.size(); ++i) {
    const Account& a = accounts[i];
    const double tau = a.true_ite.value_or(0.0);
    const double pu_change =
        engagement_next(static_cast<Eigen::Index>(i), 0) - a.engagement_now.at(0);
    RealizedOutcome& o = out[i];
    // fixed number of draws per account
    const double u_churn = rng.uniform();
    const double u_retain = rng.uniform();
    const double u_upsell = rng.uniform();
    const double eps = rng.normal();
    o.renewal_due = a.d <= spec.window_days;
    const double churn_p = sigmoid(spec.churn_intercept - spec.churn_engagement * pu_change / 10.0 -
                                   spec.churn_effect * tau);
    o.churns_without_outreach = o.renewal_due && u_churn < churn_p;
    const double retain_p =
        tau > 0.0 ? spec.retain_if_positive_effect : spec.retain_if_nonpositive_effect;
    o.outreach_retains = o.churns_without_outreach && u_retain < retain_p;
    o.upsell_closes_with_outreach = u_upsell < sigmoid(spec.upsell_slope * (tau - spec.upsell_center));
    o.bookings_with_outreach = tau + spec.bookings_noise_sd * eps;
  }
  return out;
}

}  // namespace salesopt
