#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salesopt/datagen.hpp"
#include "salesopt/domain.hpp"
#include "salesopt/optimizer.hpp"
#include "salesopt/pipeline.hpp"

namespace salesopt {

/// (renewal + add-on bookings) / renewal target. Throws unless target > 0.
double net_ratio(double renewal_plus_addon_bookings, double renewal_target);

struct DidResult {
  double tau_hat = 0.0;
  /// tau_hat / control trend; empty when the control trend is zero.
  std::optional<double> rte;
  double treat_pre = 0.0;
  double treat_post = 0.0;
  double ctrl_pre = 0.0;
  double ctrl_post = 0.0;
  /// HC1 standard error of the interaction coefficient.
  double std_error = 0.0;
  double t_stat = 0.0;
  /// Two-sided, Student t with n - 4 degrees of freedom.
  double p_value = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;
};

struct DidOptions {
  /// Throw when the control trend is zero instead of leaving rte empty.
  bool require_rte = true;
  double confidence = 0.95;
};

/// Cell-mean DiD plus the interaction term of y ~ 1 + G + P + G*P with HC1 errors.
/// `weights` (unit id -> weight) turns both into their weighted forms; units
/// without a weight are left out. Throws InsufficientData on an empty cell.
DidResult did_estimate(std::span<const PanelObservation> panel, const DidOptions& options = {},
                       const std::map<std::string, double>* weights = nullptr);

struct CemUnit {
  std::string unit_id;
  Group group = Group::Treat;
  FeatureVector covariates;
};

/// Bin edges per covariate; bin = number of edges <= value.
using Coarsening = std::vector<std::vector<double>>;

struct CemResult {
  std::vector<std::string> matched_treat;
  std::vector<std::string> matched_ctrl;
  /// Treated units weigh 1; controls (m_T^s / m_T) / (m_C^s / m_C).
  std::map<std::string, double> weights;
  std::size_t strata = 0;
  std::size_t dropped_treat = 0;
  std::size_t dropped_ctrl = 0;
  /// No stratum held both groups.
  bool empty = false;
};

/// One unit per distinct unit_id (first occurrence wins).
std::vector<CemUnit> cem_units(std::span<const PanelObservation> panel);

CemResult cem_match(std::span<const CemUnit> units, const Coarsening& coarsening);

/// |mean_T - mean_C| / sqrt((var_T + var_C) / 2) per covariate, optionally weighted.
std::vector<double> standardized_mean_difference(std::span<const CemUnit> units,
                                                 const std::map<std::string, double>* weights = nullptr);

struct PlaceboResult {
  std::vector<int> cuts;
  std::vector<DidResult> results;
  double alpha = 0.05;
  /// alpha / number of cuts.
  double corrected_alpha = 0.05;
  bool parallel_trends_plausible = true;
};

/// Pre-period observations only. Each cut c relabels t >= c as pseudo-post; each
/// unit's observations are averaged within a pseudo-period before the DiD. Empty
/// `cuts` tests every pre-period time point after the first. Throws
/// InsufficientData with fewer than 2 pre-period time points.
PlaceboResult placebo_pretest(std::span<const PanelObservation> panel, std::vector<int> cuts = {},
                              double alpha = 0.05);

struct PrecisionMetrics {
  std::optional<double> p_ups;
  std::optional<double> p_ch;
  std::optional<double> p_rec;
  std::optional<double> p_low;
  std::size_t upsell_recs = 0;
  std::size_t churn_recs = 0;
  std::size_t low_recs = 0;
};

/// Recommendations whose account has no outcome are skipped.
PrecisionMetrics precision_metrics(std::span<const Recommendation> recommendations,
                                   const std::map<std::string, RealizedOutcome>& outcomes);

/// Bookings credited to a worked account: incremental bookings plus one renewal
/// unit when outreach retains a would-be churner.
double realized_bookings(const Recommendation& rec, const RealizedOutcome& outcome);

enum class AblationVariant { Full, A_NoWeighting, B_NoCapacity, C_SimplifiedRules };
inline constexpr std::array<AblationVariant, 4> kAllVariants{
    AblationVariant::Full, AblationVariant::A_NoWeighting, AblationVariant::B_NoCapacity,
    AblationVariant::C_SimplifiedRules};
std::string_view to_string(AblationVariant v);
AblationVariant variant_from_string(std::string_view s);

struct AblationConfig {
  GenConfig population;
  OptimizerParams optimizer;
  OutcomeWorldSpec world;
  TrainingOptions training;
  Day today = 0;

  AblationConfig();
};

struct VariantReport {
  AblationVariant variant = AblationVariant::Full;
  PrecisionMetrics metrics;
  double bookings = 0.0;
  int bookings_rank = 0;
  /// Satisfied capacity and assignment constraints over all of them, in [0,1].
  double constraints_met = 1.0;
  /// Matched accounts / (reps * n_max).
  double capacity_ratio = 0.0;
  std::size_t matched = 0;
  std::array<std::size_t, kNumActions> action_counts{};
};

struct AblationReport {
  std::uint64_t seed = 0;
  std::vector<VariantReport> variants;

  const VariantReport& at(AblationVariant v) const;
};

/// Fraction of capacity (n_min/n_max per rep) and assignment (one rep per account)
/// constraints the recommendations satisfy.
double constraints_met(std::span<const Recommendation> recs, std::span<const Rep> reps,
                       const OptimizerParams& params);

/// Trains once, draws the realized world once, then runs each variant's optimizer
/// and action rule on the same scored pool.
AblationReport run_ablation(const AblationConfig& config,
                            std::span<const AblationVariant> variants = kAllVariants);

/// Aligned text table in the shape of the ablation result tables.
std::string format_ablation_table(const AblationReport& report);

}  // namespace salesopt
