#include "salesopt/forecast.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "salesopt/errors.hpp"

namespace salesopt {

std::string_view to_string(EngagementTarget t) { return t == EngagementTarget::pu ? "pu" : "pa"; }

std::pair<double, double> target_range(EngagementTarget t) {
  return t == EngagementTarget::pu ? std::pair{0.0, 100.0} : std::pair{0.0, 1.0};
}

EngagementTarget target_for_metric(std::size_t metric) {
  return metric == 1 ? EngagementTarget::pa : EngagementTarget::pu;
}

Forecaster Forecaster::fit(const Eigen::MatrixXd& X_e, const Eigen::VectorXd& y,
                           EngagementTarget target, const RegressorSpec& spec) {
  const auto [lo, hi] = target_range(target);
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (!(y(i) >= lo && y(i) <= hi))
      throw InvalidArgument(fmt::format("{} target {} at row {} outside [{}, {}]", to_string(target),
                                        y(i), i, lo, hi));
  return from_base(target, BaseRegressor::fit(X_e, y, spec));
}

Forecaster Forecaster::from_base(EngagementTarget target, BaseRegressor base) {
  Forecaster f;
  f.target_ = target;
  f.base_ = std::move(base);
  return f;
}

double Forecaster::predict_raw(const Eigen::Ref<const Eigen::VectorXd>& x_e) const {
  return base_.predict(x_e);
}

double Forecaster::predict(const Eigen::Ref<const Eigen::VectorXd>& x_e) const {
  const auto [lo, hi] = target_range(target_);
  return std::clamp(predict_raw(x_e), lo, hi);
}

Eigen::VectorXd Forecaster::predict_rows(const Eigen::MatrixXd& X_e) const {
  const auto [lo, hi] = target_range(target_);
  return base_.predict_rows(X_e).cwiseMax(lo).cwiseMin(hi);
}

ForecastErrors forecast_errors(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) throw InvalidArgument("prediction/actual sizes differ");
  if (predicted.empty()) throw InvalidArgument("holdout must be non-empty");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double e = predicted[i] - actual[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  const double n = static_cast<double>(predicted.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

ForecastErrors evaluate(const Forecaster& f, const Eigen::MatrixXd& X_holdout,
                        const Eigen::VectorXd& y_holdout) {
  const Eigen::VectorXd pred = f.predict_rows(X_holdout);
  return forecast_errors(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
                         std::span<const double>(y_holdout.data(), static_cast<std::size_t>(y_holdout.size())));
}

FeatureVector forecast_delta(std::span<const Forecaster> forecasters, const Account& account) {
  if (account.engagement_now.size() < forecasters.size())
    throw InvalidArgument(fmt::format("account {} lacks current engagement values", account.id));
  const FeatureVector xe = account.x_e();
  const Eigen::Map<const Eigen::VectorXd> x(xe.data(), static_cast<Eigen::Index>(xe.size()));
  FeatureVector delta(forecasters.size());
  for (std::size_t j = 0; j < forecasters.size(); ++j)
    delta[j] = forecasters[j].predict(x) - account.engagement_now[j];
  return delta;
}

}  // namespace salesopt
