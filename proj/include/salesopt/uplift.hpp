#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "salesopt/regression.hpp"

namespace salesopt {

enum class LearnerKind { S, T, X, DR };
std::string_view to_string(LearnerKind k);
LearnerKind learner_from_string(std::string_view s);

/// Weighting g(x) in the X-learner's final combination g*tau0 + (1-g)*tau1.
enum class XWeighting { Propensity, Half };

inline constexpr double kPropensityClip = 0.01;

struct UpliftSpec {
  RegressorSpec base;
  XWeighting x_weighting = XWeighting::Propensity;
  /// L2 penalty on the logistic slopes of the propensity model.
  double propensity_l2 = 1.0;
  /// S-learner design [x, a, a*x] instead of [x, a] for ridge bases, so a linear
  /// base can express a heterogeneous effect.
  bool s_interactions = true;
};

/// Logistic model of P(a = 1 | x) fit by penalized Newton (IRLS) steps.
class PropensityModel {
 public:
  static PropensityModel fit(const Eigen::MatrixXd& X, std::span<const int> a, double l2 = 1.0);

  /// Unclipped logistic output.
  double predict_raw(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Output clipped into [0.01, 0.99].
  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd predict_rows(const Eigen::MatrixXd& X) const;

  double intercept() const { return intercept_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const Eigen::RowVectorXd& centre() const { return centre_; }
  int iterations() const { return iterations_; }

  static PropensityModel from_parameters(double intercept, Eigen::VectorXd weights,
                                         Eigen::RowVectorXd centre);

 private:
  double intercept_ = 0.0;
  Eigen::VectorXd weights_;
  Eigen::RowVectorXd centre_;
  int iterations_ = 0;
};

class UpliftModel {
 public:
  LearnerKind kind() const { return kind_; }

  double predict_ite(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd predict_ite_rows(const Eigen::MatrixXd& X) const;

  Eigen::Index dims() const { return dims_; }

  // Fitted components; which ones are set depends on the learner.
  const std::optional<BaseRegressor>& single() const { return single_; }
  const std::optional<BaseRegressor>& control_model() const { return f0_; }
  const std::optional<BaseRegressor>& treated_model() const { return f1_; }
  const std::optional<BaseRegressor>& tau_control() const { return tau0_; }
  const std::optional<BaseRegressor>& tau_treated() const { return tau1_; }
  const std::optional<BaseRegressor>& final_model() const { return final_; }
  const std::optional<PropensityModel>& propensity() const { return propensity_; }
  bool s_interactions() const { return s_interactions_; }
  XWeighting x_weighting() const { return x_weighting_; }
  /// Training rows whose propensity was clipped (DR only).
  std::size_t clipped_propensities() const { return clipped_; }

  static UpliftModel s_learner(BaseRegressor single, bool interactions);
  static UpliftModel t_learner(BaseRegressor f0, BaseRegressor f1);
  static UpliftModel x_learner(BaseRegressor f0, BaseRegressor f1, BaseRegressor tau0,
                               BaseRegressor tau1, std::optional<PropensityModel> propensity,
                               XWeighting weighting);
  static UpliftModel dr_learner(BaseRegressor f0, BaseRegressor f1, PropensityModel propensity,
                                BaseRegressor final_model, std::size_t clipped = 0);

 private:
  LearnerKind kind_ = LearnerKind::T;
  Eigen::Index dims_ = 0;
  std::optional<BaseRegressor> single_, f0_, f1_, tau0_, tau1_, final_;
  std::optional<PropensityModel> propensity_;
  bool s_interactions_ = true;
  XWeighting x_weighting_ = XWeighting::Propensity;
  std::size_t clipped_ = 0;
};

/// S-learner design row for treatment value `a`.
Eigen::VectorXd s_learner_row(const Eigen::Ref<const Eigen::VectorXd>& x, int a, bool interactions);

UpliftModel fit_s_learner(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> a,
                          const UpliftSpec& spec = {});
UpliftModel fit_t_learner(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> a,
                          const UpliftSpec& spec = {});
UpliftModel fit_x_learner(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> a,
                          const UpliftSpec& spec = {});
UpliftModel fit_dr_learner(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> a,
                           const UpliftSpec& spec = {});
UpliftModel fit_uplift(LearnerKind kind, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       std::span<const int> a, const UpliftSpec& spec = {});

/// DR pseudo-outcome f1 - f0 + a (y - f1)/e - (1 - a)(y - f0)/(1 - e).
double dr_pseudo_outcome(double y, int a, double f0, double f1, double e);

struct DecileRow {
  int decile = 0;  // 0 = lowest predicted uplift
  std::size_t n = 0;
  std::size_t n_treated = 0;
  std::size_t n_control = 0;
  double mean_score = 0.0;
  /// mean(y | a=1) - mean(y | a=0); empty when either arm is absent from the bin.
  std::optional<double> uplift;
};

/// Decile index per row: rank rows by ascending score (stable, so ties keep input
/// order) and cut the ranking into 10 equal-count bins.
std::vector<int> decile_membership(std::span<const double> scores);

std::vector<DecileRow> uplift_deciles(std::span<const double> scores, std::span<const double> y,
                                      std::span<const int> a);

}  // namespace salesopt
