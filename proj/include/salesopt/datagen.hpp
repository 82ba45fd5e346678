#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "salesopt/domain.hpp"
#include "salesopt/rng.hpp"

namespace salesopt {

/// tau(x) = intercept + sum_k coef[k] * x[features[k]]
struct EffectSpec {
  double intercept = 1.0;
  std::array<double, 3> coef{1.5, -1.0, 0.5};
  std::array<std::size_t, 3> features{0, 1, 2};
};

/// baseline(x) = intercept + sum_j coef[j] * x[j]
///             + nonlinearity * (sin(x[3]) + 0.5 * x[4]^2)
struct BaselineSpec {
  double intercept = 10.0;
  /// Empty selects a fixed decaying pattern 1, -1/2, 1/3, ...
  std::vector<double> coef;
  double nonlinearity = 1.0;
};

/// Next-period engagement: next_j = now_j + slope_j + coef_j . x_e + noise, clamped
/// to the metric's range. Metric 0 is product utilization (0-100), metric 1 product
/// adoption (0-1); further metrics reuse the utilization scale.
struct EngagementDriftSpec {
  double pu_slope = -5.0;
  double pa_slope = -0.02;
  std::vector<double> pu_coef{-2.0, 1.5, 1.0};
  std::vector<double> pa_coef{0.02, 0.0, 0.02};
  double pu_noise_sd = 4.0;
  double pa_noise_sd = 0.05;
};

/// Per-action feedback distribution: p_click = clamp(click + click_tilt . x_t, 0, 1),
/// p_dismiss = clamp(dismiss + dismiss_tilt . x_t, 0, 1 - p_click), rest is NoClick.
/// Empty tilts mean no dependence on context.
struct ActionResponse {
  double click = 0.3;
  double dismiss = 0.2;
  FeatureVector click_tilt;
  FeatureVector dismiss_tilt;
};

struct BanditEnvSpec {
  std::array<ActionResponse, kNumActions> per_action;
};

/// Number of leading account features exposed to the bandit as x_a.
inline constexpr std::size_t kBanditAccountDims = 4;

BanditEnvSpec default_bandit_env(std::size_t context_dims);
/// `dominant` always yields a click; the others are a coin toss between click and dismiss.
BanditEnvSpec dominant_action_env(ActionType dominant);
/// Same response for every action.
BanditEnvSpec symmetric_env(double click, double dismiss);

struct GenConfig {
  std::size_t n_accounts = 1000;
  std::size_t n_reps = 10;
  std::size_t account_dims = 8;
  std::size_t rep_dims = 2;
  /// Trailing positions of x that form x_e.
  std::size_t engagement_dims = 3;
  /// k in the engagement difference; metric 0 = pu, 1 = pa.
  std::size_t engagement_metrics = 2;
  std::uint64_t seed = 1;
  double treatment_share = 0.5;
  /// Logit shift of the treatment propensity per unit of x[1]; 0 = randomized.
  double confounding = 0.0;
  double noise_sd = 1.0;
  int max_days_to_rtcd = 365;
  EffectSpec effect;
  BaselineSpec baseline;
  EngagementDriftSpec drift;
  BanditEnvSpec bandit_env = default_bandit_env(kBanditAccountDims + 2 + kAlertHistoryDims);
};

/// Throws InvalidArgument on a bad config.
void validate_config(const GenConfig& c);

struct Population {
  std::vector<Account> accounts;
  std::vector<Rep> reps;
};

Population generate_population(const GenConfig& config);

double true_effect(const EffectSpec& spec, const FeatureVector& x);
double baseline_outcome(const BaselineSpec& spec, const FeatureVector& x);

/// Per-account {0,1}; Bernoulli(treatment_share), tilted by `confounding`.
std::vector<int> assign_treatment(const GenConfig& config, const std::vector<Account>& accounts,
                                  Rng& rng);
/// Propensity the generator used for an account.
double true_propensity(const GenConfig& config, const Account& a);

/// y = baseline(x) + a * true_ite + N(0, noise_sd^2)
std::vector<double> simulate_outcomes(const GenConfig& config, const std::vector<Account>& accounts,
                                      const std::vector<int>& assignment, Rng& rng);

/// Next-period value of each engagement metric, per account (accounts x k).
Eigen::MatrixXd simulate_engagement_next(const GenConfig& config,
                                         const std::vector<Account>& accounts, Rng& rng);

/// Range of engagement metric j.
std::pair<double, double> engagement_range(std::size_t metric);

struct ResponseProbabilities {
  double click = 0.0;
  double dismiss = 0.0;
  double no_click = 1.0;
};

ResponseProbabilities response_probabilities(const BanditEnvSpec& env, const FeatureVector& x_t,
                                             ActionType action);
/// Oracle mean reward p_click - p_dismiss, used for regret.
double expected_reward(const BanditEnvSpec& env, const FeatureVector& x_t, ActionType action);

FeedbackEvent simulate_feedback(const BanditEnvSpec& env, const BanditContext& context,
                                ActionType action, Rng& rng, const std::string& rep_id = {},
                                const std::string& account_id = {}, Day t = 0);

/// Bandit context for an (account, rep) pair on `today`.
BanditContext make_context(const Account& account, const Rep& rep, const AlertHistory& history,
                           Day today);

struct PanelConfig {
  std::size_t n_treat = 200;
  std::size_t n_ctrl = 200;
  int n_pre_periods = 1;
  int n_post_periods = 1;
  double base_level = 1.0;
  double unit_sd = 0.3;
  double noise_sd = 0.1;
  double time_trend = 0.05;
  /// Extra per-period slope of the treated group; non-zero breaks parallel trends.
  double treated_trend_divergence = 0.0;
  /// Mean shift of treated covariates, which confounds levels but not trends.
  double covariate_shift = 0.5;
  std::uint64_t seed = 1;
};

/// Two groups over n_pre + n_post periods:
/// y_it = base + alpha_i + trend*t + divergence*t*G + effect*G*Post + noise.
/// Covariates are (account size, engagement level, past sales activity).
std::vector<PanelObservation> generate_panel(const PanelConfig& config, double injected_effect);

/// Realized business outcomes of one account in the evaluation window, drawn once
/// per account so every policy variant is scored against the same world.
struct RealizedOutcome {
  /// Renewal falls inside the evaluation window.
  bool renewal_due = false;
  /// Would churn at renewal if nobody reaches out.
  bool churns_without_outreach = false;
  /// Outreach prevents the churn.
  bool outreach_retains = false;
  /// An upsell pitch closes.
  bool upsell_closes_with_outreach = false;
  /// Incremental bookings realized when the account is worked.
  double bookings_with_outreach = 0.0;
};

struct OutcomeWorldSpec {
  int window_days = 90;
  /// Churn logit = churn_intercept - churn_engagement * (pu change / 10) - churn_effect * tau.
  double churn_intercept = -0.5;
  double churn_engagement = 1.0;
  double churn_effect = 0.5;
  /// Probability outreach retains a would-be churner, by sign of tau.
  double retain_if_positive_effect = 0.8;
  double retain_if_nonpositive_effect = 0.3;
  /// Upsell close logit = upsell_slope * (tau - upsell_center).
  double upsell_slope = 1.5;
  double upsell_center = 0.5;
  double bookings_noise_sd = 0.5;
};

std::vector<RealizedOutcome> simulate_realized_outcomes(const OutcomeWorldSpec& spec,
                                                        const std::vector<Account>& accounts,
                                                        const Eigen::MatrixXd& engagement_next,
                                                        Rng& rng);

}  // namespace salesopt
