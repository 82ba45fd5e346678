#pragma once

#include <span>
#include <string_view>

#include <Eigen/Dense>

#include "salesopt/domain.hpp"
#include "salesopt/regression.hpp"

namespace salesopt {

/// Product utilization (0-100) or product adoption (0-1).
enum class EngagementTarget { pu, pa };
std::string_view to_string(EngagementTarget t);
std::pair<double, double> target_range(EngagementTarget t);
/// Metric j of an account's engagement vector: 1 is adoption, everything else utilization-scaled.
EngagementTarget target_for_metric(std::size_t metric);

/// Next-period engagement forecaster: a base regressor on x_e whose output is
/// clamped to the target's score range. Adoption is treated as a clamped
/// regression, not a classifier.
class Forecaster {
 public:
  static Forecaster fit(const Eigen::MatrixXd& X_e, const Eigen::VectorXd& y, EngagementTarget target,
                        const RegressorSpec& spec = {});
  static Forecaster from_base(EngagementTarget target, BaseRegressor base);

  double predict_raw(const Eigen::Ref<const Eigen::VectorXd>& x_e) const;
  double predict(const Eigen::Ref<const Eigen::VectorXd>& x_e) const;
  Eigen::VectorXd predict_rows(const Eigen::MatrixXd& X_e) const;

  EngagementTarget target() const { return target_; }
  const BaseRegressor& base() const { return base_; }

 private:
  EngagementTarget target_ = EngagementTarget::pu;
  BaseRegressor base_;
};

struct ForecastErrors {
  double mae = 0.0;
  double rmse = 0.0;
};

ForecastErrors forecast_errors(std::span<const double> predicted, std::span<const double> actual);
ForecastErrors evaluate(const Forecaster& f, const Eigen::MatrixXd& X_holdout,
                        const Eigen::VectorXd& y_holdout);

/// One-period-ahead change per engagement metric: forecast minus the account's
/// current value. forecasters[j] predicts metric j.
FeatureVector forecast_delta(std::span<const Forecaster> forecasters, const Account& account);

}  // namespace salesopt
