#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salesopt/domain.hpp"
#include "salesopt/simplex.hpp"

namespace salesopt {

enum class EligibilityCombiner { Or, And };
enum class AssignmentMode { AtMostOne, ExactlyOne };

struct OptimizerParams {
  /// Sigmoid sharpness per day. Negative puts the weight on uplift as the
  /// renewal date approaches.
  double k = -0.05;
  /// Sigmoid centre in days (one quarter).
  double d0 = 90.0;
  int n_min = 0;
  int n_max = 10;
  /// Thresholds on the normalized scores.
  double t_u = 25.0;
  double t_e = 25.0;
  int cooldown_days = 14;
  EligibilityCombiner combiner = EligibilityCombiner::Or;
  AssignmentMode mode = AssignmentMode::AtMostOne;
  /// Emit the per-rep n_min/n_max rows.
  bool capacity_rows = true;
  /// Replaces w(d) everywhere when set (the no-weighting ablation uses 0.5).
  std::optional<double> weight_override;
};

/// Throws InvalidArgument unless 0 <= n_min <= n_max and cooldown_days >= 0.
void validate_params(const OptimizerParams& p);

/// 1 / (1 + exp(-k (d - d0))), evaluated without overflow for any finite k*(d - d0).
double weight(double d, double k, double d0);
double weight_for(const OptimizerParams& p, double d);

/// Objective coefficient w(d) y_u + (1 - w(d)) y_e on the normalized scores.
double objective_coefficient(const ScoredAccount& s, const OptimizerParams& p);

/// max_j |delta_e[j]|. Throws on an empty vector.
double engagement_diff(std::span<const double> delta_e);

/// Min-max maps y_u_raw and y_e_raw over the pool onto [0, 100]; a constant
/// column maps to 50.
std::vector<ScoredAccount> normalize_scores(std::vector<ScoredAccount> pool);

/// Keeps accounts that pass the threshold test and were not served in the
/// cooldown window [today - cooldown_days, today - 1].
std::vector<ScoredAccount> eligibility_filter(std::span<const ScoredAccount> pool,
                                              std::span<const Recommendation> history,
                                              const OptimizerParams& params, Day today);

struct LpInstance {
  LinearProgram lp;
  std::vector<std::string> account_ids;
  std::vector<std::string> rep_ids;
  /// Objective coefficient per account (the same for every rep).
  std::vector<double> coefficients;

  Eigen::Index var(std::size_t account, std::size_t rep) const {
    return static_cast<Eigen::Index>(account * rep_ids.size() + rep);
  }
};

/// Variables a_ij in [0,1], row-major over (account, rep). Capacity rows
/// n_min <= sum_i a_ij <= n_max per rep; assignment rows sum_j a_ij <= 1 (or = 1).
LpInstance build_lp(std::span<const ScoredAccount> pool, std::span<const Rep> reps,
                    const OptimizerParams& params);

/// Solves the relaxation and checks every constraint at 1e-6 before returning.
AssignmentMatrix solve_lp(const LpInstance& instance, const SimplexOptions& options = {});
double assignment_objective(const LpInstance& instance, const AssignmentMatrix& a);

struct MatchedPair {
  std::string account_id;
  std::string rep_id;
  double a_value = 0.0;
  double coefficient = 0.0;
  int g_rank = 0;
  int r_rank = 0;
};

/// Matches (i, j) when floor(a_ij + 0.5) = 1, then ranks by a_ij descending,
/// breaking ties by objective coefficient (descending) and account id.
std::vector<MatchedPair> match_and_rank(const AssignmentMatrix& assignment,
                                        std::span<const ScoredAccount> pool,
                                        const OptimizerParams& params);

/// Cold-start action for a matched account:
///   M = w(d) y_u, E = (1 - w(d)) y_e
///   M <= E: BoostEngagement if min|delta| >= max|delta|, else PromoteUpsell
///   M >  E: PromoteUpsell if y_u_raw > 0, else PreventChurn
ActionType recommend_action(const ScoredAccount& account, const OptimizerParams& params);

}  // namespace salesopt
