#pragma once

#include <span>
#include <vector>

#include "salesopt/datagen.hpp"
#include "salesopt/forecast.hpp"
#include "salesopt/optimizer.hpp"
#include "salesopt/uplift.hpp"

namespace salesopt {

struct PredictionModels {
  UpliftModel uplift;
  /// One per engagement metric, in metric order.
  std::vector<Forecaster> forecasters;
};

struct TrainingOptions {
  LearnerKind learner = LearnerKind::T;
  UpliftSpec uplift;
  RegressorSpec forecast;
};

/// Fits uplift on a simulated historical campaign over the population (x_u, a, y)
/// and one forecaster per engagement metric on a simulated historical period.
PredictionModels train_models(const GenConfig& config, const Population& population,
                              const TrainingOptions& options = {});

/// Raw scores: y_u_raw = predicted ITE, delta_e = forecast - current, y_e_raw = max |delta|.
ScoredAccount score_account(const PredictionModels& models, const Account& account);
std::vector<ScoredAccount> score_accounts(const PredictionModels& models, std::span<const Account> accounts);

enum class ActionRule { Algorithm1, UpliftSignOnly };

struct DailyPlan {
  /// Normalized, eligible pool the LP ran on.
  std::vector<ScoredAccount> pool;
  AssignmentMatrix assignment;
  double objective = 0.0;
  std::vector<Recommendation> recommendations;
};

/// normalize -> eligibility (incl. cooldown) -> LP -> match/rank -> action.
/// An empty eligible pool yields an empty plan.
DailyPlan plan_day(std::span<const ScoredAccount> raw_pool, std::span<const Rep> reps,
                   std::span<const Recommendation> history, const OptimizerParams& params, Day today,
                   ActionRule rule = ActionRule::Algorithm1);

}  // namespace salesopt
