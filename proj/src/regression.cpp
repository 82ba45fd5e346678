#include "salesopt/regression.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "salesopt/errors.hpp"

namespace salesopt {

namespace {

BaseRegressor fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& w, double lambda) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (n < p + 1)
    throw InsufficientData(fmt::format("ridge needs at least {} rows, got {}", p + 1, n));
  const double wsum = w.sum();
  if (!(wsum > 0.0)) throw InvalidArgument("regression weights must not all be zero");

  const Eigen::RowVectorXd x_mean = (w.transpose() * X) / wsum;
  const double y_mean = w.dot(y) / wsum;
  const Eigen::VectorXd sqrt_w = w.array().sqrt();
  const Eigen::MatrixXd Xc = (X.rowwise() - x_mean).array().colwise() * sqrt_w.array();
  const Eigen::VectorXd yc = (y.array() - y_mean) * sqrt_w.array();

  Eigen::VectorXd beta;
  if (lambda == 0.0) {
    beta = Xc.completeOrthogonalDecomposition().solve(yc);
  } else {
    Eigen::MatrixXd gram = Xc.transpose() * Xc;
    gram.diagonal().array() += lambda;
    beta = gram.ldlt().solve(Xc.transpose() * yc);
  }
  const double intercept = y_mean - x_mean.dot(beta);
  return BaseRegressor::linear(intercept, std::move(beta));
}

BaseRegressor fit_stumps(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const RegressorSpec& spec) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (n == 0) throw InsufficientData("boosting needs at least one row");
  if (spec.rounds < 0 || !(spec.learning_rate > 0.0))
    throw InvalidArgument("boosting needs rounds >= 0 and a positive learning rate");

  std::vector<std::vector<Eigen::Index>> order(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    auto& o = order[static_cast<std::size_t>(j)];
    o.resize(static_cast<std::size_t>(n));
    std::iota(o.begin(), o.end(), Eigen::Index{0});
    std::stable_sort(o.begin(), o.end(), [&](Eigen::Index a, Eigen::Index b) { return X(a, j) < X(b, j); });
  }

  const double init = y.mean();
  Eigen::VectorXd residual = y.array() - init;
  std::vector<Stump> stumps;
  for (int round = 0; round < spec.rounds; ++round) {
    const double total = residual.sum();
    double best_gain = 0.0;
    Stump best;
    bool found = false;
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto& o = order[static_cast<std::size_t>(j)];
      double left_sum = 0.0;
      for (Eigen::Index k = 0; k + 1 < n; ++k) {
        left_sum += residual(o[static_cast<std::size_t>(k)]);
        const double here = X(o[static_cast<std::size_t>(k)], j);
        const double next = X(o[static_cast<std::size_t>(k + 1)], j);
        if (!(next > here)) continue;
        const double nl = static_cast<double>(k + 1);
        const double nr = static_cast<double>(n - k - 1);
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - total * total / n;
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best = Stump{static_cast<int>(j), 0.5 * (here + next), left_sum / nl, right_sum / nr};
          found = true;
        }
      }
    }
    if (!found) break;
    for (Eigen::Index i = 0; i < n; ++i)
      residual(i) -= spec.learning_rate * (X(i, best.feature) <= best.threshold ? best.left : best.right);
    stumps.push_back(best);
  }
  return BaseRegressor::boosted(init, spec.learning_rate, std::move(stumps), p);
}

}  // namespace

BaseRegressor BaseRegressor::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const RegressorSpec& spec) {
  if (X.rows() != y.size()) throw InvalidArgument("X and y row counts differ");
  if (spec.kind == RegressorKind::Ridge) {
    if (spec.lambda < 0.0) throw InvalidArgument("ridge lambda must be >= 0");
    return fit_ridge(X, y, Eigen::VectorXd::Ones(y.size()), spec.lambda);
  }
  return fit_stumps(X, y, spec);
}

BaseRegressor BaseRegressor::fit_weighted(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& weights,
                                          const RegressorSpec& spec) {
  if (spec.kind != RegressorKind::Ridge) throw InvalidArgument("weighted fit supports ridge only");
  if (X.rows() != y.size() || weights.size() != y.size())
    throw InvalidArgument("X, y and weights sizes differ");
  if ((weights.array() < 0.0).any()) throw InvalidArgument("weights must be >= 0");
  return fit_ridge(X, y, weights, spec.lambda);
}

BaseRegressor BaseRegressor::linear(double intercept, Eigen::VectorXd coefficients) {
  BaseRegressor r;
  r.kind_ = RegressorKind::Ridge;
  r.dims_ = coefficients.size();
  r.intercept_ = intercept;
  r.coef_ = std::move(coefficients);
  return r;
}

BaseRegressor BaseRegressor::boosted(double intercept, double learning_rate,
                                     std::vector<Stump> stumps, Eigen::Index dims) {
  BaseRegressor r;
  r.kind_ = RegressorKind::BoostedStumps;
  r.dims_ = dims;
  r.intercept_ = intercept;
  r.learning_rate_ = learning_rate;
  r.stumps_ = std::move(stumps);
  return r;
}

double BaseRegressor::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dims_)
    throw InvalidArgument(fmt::format("expected {} features, got {}", dims_, x.size()));
  if (kind_ == RegressorKind::Ridge) return intercept_ + coef_.dot(x);
  double out = intercept_;
  for (const Stump& s : stumps_) out += learning_rate_ * (x(s.feature) <= s.threshold ? s.left : s.right);
  return out;
}

Eigen::VectorXd BaseRegressor::predict_rows(const Eigen::MatrixXd& X) const {
  if (X.cols() != dims_)
    throw InvalidArgument(fmt::format("expected {} features, got {}", dims_, X.cols()));
  if (kind_ == RegressorKind::Ridge) return (X * coef_).array() + intercept_;
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict(X.row(i).transpose());
  return out;
}

}  // namespace salesopt
