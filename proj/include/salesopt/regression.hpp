#pragma once

#include <vector>

#include <Eigen/Dense>

namespace salesopt {

enum class RegressorKind { Ridge, BoostedStumps };

struct RegressorSpec {
  RegressorKind kind = RegressorKind::Ridge;
  /// Ridge penalty on the slopes; the intercept is never penalized.
  double lambda = 0.0;
  int rounds = 200;
  double learning_rate = 0.1;
};

struct Stump {
  int feature = 0;
  double threshold = 0.0;
  double left = 0.0;   // x[feature] <= threshold
  double right = 0.0;  // x[feature] >  threshold
};

/// Fitted ridge or depth-1 boosted model. Immutable after fitting, predict is deterministic.
class BaseRegressor {
 public:
  BaseRegressor() = default;

  /// Ridge solves the centred normal equations (X'X + lambda I) b = X'y; with lambda = 0
  /// it returns the minimum-norm least-squares solution, so a constant column never
  /// makes the fit fail. Boosting fits stumps stage-wise on squared error.
  static BaseRegressor fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const RegressorSpec& spec);
  /// Weighted ridge (weights >= 0, not all zero). Boosting specs are rejected.
  static BaseRegressor fit_weighted(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& weights, const RegressorSpec& spec);

  static BaseRegressor linear(double intercept, Eigen::VectorXd coefficients);
  static BaseRegressor boosted(double intercept, double learning_rate, std::vector<Stump> stumps,
                               Eigen::Index dims);

  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd predict_rows(const Eigen::MatrixXd& X) const;

  RegressorKind kind() const { return kind_; }
  Eigen::Index dims() const { return dims_; }
  double intercept() const { return intercept_; }
  const Eigen::VectorXd& coefficients() const { return coef_; }
  const std::vector<Stump>& stumps() const { return stumps_; }
  double learning_rate() const { return learning_rate_; }

 private:
  RegressorKind kind_ = RegressorKind::Ridge;
  Eigen::Index dims_ = 0;
  double intercept_ = 0.0;
  Eigen::VectorXd coef_;
  double learning_rate_ = 0.0;
  std::vector<Stump> stumps_;
};

}  // namespace salesopt
