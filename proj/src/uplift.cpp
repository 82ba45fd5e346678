#include "salesopt/uplift.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "salesopt/errors.hpp"
#include "salesopt/log.hpp"

namespace salesopt {

namespace {

struct ArmSplit {
  std::vector<Eigen::Index> treated;
  std::vector<Eigen::Index> control;
};

ArmSplit split_arms(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> a) {
  if (static_cast<Eigen::Index>(a.size()) != X.rows() || y.size() != X.rows())
    throw InvalidArgument("X, y and treatment indicator sizes differ");
  ArmSplit s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != 0 && a[i] != 1) throw InvalidArgument("treatment indicator must be 0 or 1");
    (a[i] == 1 ? s.treated : s.control).push_back(static_cast<Eigen::Index>(i));
  }
  return s;
}

// Each arm must carry enough rows to fit its own outcome model.
void require_arm(const std::vector<Eigen::Index>& rows, const char* arm, Eigen::Index dims,
                 const RegressorSpec& spec) {
  const Eigen::Index needed = spec.kind == RegressorKind::Ridge ? dims + 1 : 1;
  if (static_cast<Eigen::Index>(rows.size()) < needed)
    throw InsufficientData(fmt::format("{} arm has {} rows, needs at least {} to fit its outcome model",
                                       arm, rows.size(), needed));
}

BaseRegressor fit_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const std::vector<Eigen::Index>& rows, const RegressorSpec& spec) {
  return BaseRegressor::fit(X(rows, Eigen::all), y(rows), spec);
}

struct OutcomeModels {
  BaseRegressor f0;
  BaseRegressor f1;
  ArmSplit arms;
};

OutcomeModels fit_outcome_models(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 std::span<const int> a, const UpliftSpec& spec) {
  ArmSplit arms = split_arms(X, y, a);
  require_arm(arms.treated, "treated", X.cols(), spec.base);
  require_arm(arms.control, "control", X.cols(), spec.base);
  BaseRegressor f0 = fit_rows(X, y, arms.control, spec.base);
  BaseRegressor f1 = fit_rows(X, y, arms.treated, spec.base);
  return {std::move(f0), std::move(f1), std::move(arms)};
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

std::string_view to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::S: return "S";
    case LearnerKind::T: return "T";
    case LearnerKind::X: return "X";
    case LearnerKind::DR: return "DR";
  }
  return "?";
}

LearnerKind learner_from_string(std::string_view s) {
  for (LearnerKind k : {LearnerKind::S, LearnerKind::T, LearnerKind::X, LearnerKind::DR})
    if (to_string(k) == s) return k;
  throw InvalidArgument(fmt::format("unknown learner '{}'", s));
}

// ---------------------------------------------------------------------------
// Propensity

PropensityModel PropensityModel::fit(const Eigen::MatrixXd& X, std::span<const int> a, double l2) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (static_cast<Eigen::Index>(a.size()) != n) throw InvalidArgument("X and a sizes differ");
  if (!(l2 > 0.0)) throw InvalidArgument("propensity penalty must be positive");
  Eigen::VectorXd target(n);
  for (Eigen::Index i = 0; i < n; ++i) target(i) = a[static_cast<std::size_t>(i)];
  const double share = target.mean();
  if (share <= 0.0 || share >= 1.0)
    throw InsufficientData("propensity model needs both treated and control rows");

  PropensityModel m;
  m.centre_ = X.colwise().mean();
  const Eigen::MatrixXd Xc = X.rowwise() - m.centre_;
  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = Xc;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p + 1);
  theta(0) = std::log(share / (1.0 - share));
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p + 1, l2);
  penalty(0) = 0.0;

  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd eta = design * theta;
    Eigen::VectorXd prob(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob(i) = sigmoid(eta(i));
      w(i) = std::max(prob(i) * (1.0 - prob(i)), 1e-12);
    }
    const Eigen::VectorXd grad = design.transpose() * (target - prob) - penalty.cwiseProduct(theta);
    Eigen::MatrixXd hess = design.transpose() * w.asDiagonal() * design;
    hess.diagonal() += penalty;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    theta += step;
    m.iterations_ = iter + 1;
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  m.intercept_ = theta(0);
  m.weights_ = theta.tail(p);
  return m;
}

PropensityModel PropensityModel::from_parameters(double intercept, Eigen::VectorXd weights,
                                                 Eigen::RowVectorXd centre) {
  PropensityModel m;
  m.intercept_ = intercept;
  m.weights_ = std::move(weights);
  m.centre_ = std::move(centre);
  return m;
}

double PropensityModel::predict_raw(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return sigmoid(intercept_ + weights_.dot(x - centre_.transpose()));
}

double PropensityModel::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return std::clamp(predict_raw(x), kPropensityClip, 1.0 - kPropensityClip);
}

Eigen::VectorXd PropensityModel::predict_rows(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict(X.row(i).transpose());
  return out;
}

// ---------------------------------------------------------------------------
// Model assembly and prediction

UpliftModel UpliftModel::s_learner(BaseRegressor single, bool interactions) {
  UpliftModel m;
  m.kind_ = LearnerKind::S;
  m.s_interactions_ = interactions;
  m.dims_ = interactions ? (single.dims() - 1) / 2 : single.dims() - 1;
  m.single_ = std::move(single);
  return m;
}

UpliftModel UpliftModel::t_learner(BaseRegressor f0, BaseRegressor f1) {
  UpliftModel m;
  m.kind_ = LearnerKind::T;
  m.dims_ = f0.dims();
  m.f0_ = std::move(f0);
  m.f1_ = std::move(f1);
  return m;
}

UpliftModel UpliftModel::x_learner(BaseRegressor f0, BaseRegressor f1, BaseRegressor tau0,
                                   BaseRegressor tau1, std::optional<PropensityModel> propensity,
                                   XWeighting weighting) {
  UpliftModel m;
  m.kind_ = LearnerKind::X;
  m.dims_ = f0.dims();
  m.f0_ = std::move(f0);
  m.f1_ = std::move(f1);
  m.tau0_ = std::move(tau0);
  m.tau1_ = std::move(tau1);
  m.propensity_ = std::move(propensity);
  m.x_weighting_ = weighting;
  if (weighting == XWeighting::Propensity && !m.propensity_)
    throw InvalidArgument("propensity weighting needs a propensity model");
  return m;
}

UpliftModel UpliftModel::dr_learner(BaseRegressor f0, BaseRegressor f1, PropensityModel propensity,
                                    BaseRegressor final_model, std::size_t clipped) {
  UpliftModel m;
  m.kind_ = LearnerKind::DR;
  m.dims_ = f0.dims();
  m.f0_ = std::move(f0);
  m.f1_ = std::move(f1);
  m.propensity_ = std::move(propensity);
  m.final_ = std::move(final_model);
  m.clipped_ = clipped;
  return m;
}

Eigen::VectorXd s_learner_row(const Eigen::Ref<const Eigen::VectorXd>& x, int a, bool interactions) {
  const Eigen::Index p = x.size();
  Eigen::VectorXd row(interactions ? 2 * p + 1 : p + 1);
  row.head(p) = x;
  row(p) = a;
  if (interactions) row.tail(p) = static_cast<double>(a) * x;
  return row;
}

double UpliftModel::predict_ite(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dims_)
    throw InvalidArgument(fmt::format("expected {} features, got {}", dims_, x.size()));
  switch (kind_) {
    case LearnerKind::S:
      return single_->predict(s_learner_row(x, 1, s_interactions_)) -
             single_->predict(s_learner_row(x, 0, s_interactions_));
    case LearnerKind::T:
      return f1_->predict(x) - f0_->predict(x);
    case LearnerKind::X: {
      const double g = x_weighting_ == XWeighting::Half ? 0.5 : propensity_->predict(x);
      return g * tau0_->predict(x) + (1.0 - g) * tau1_->predict(x);
    }
    case LearnerKind::DR:
      return final_->predict(x);
  }
  return 0.0;
}

Eigen::VectorXd UpliftModel::predict_ite_rows(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict_ite(X.row(i).transpose());
  return out;
}

// ---------------------------------------------------------------------------
// Fitting

UpliftModel fit_s_learner(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> a,
                          const UpliftSpec& spec) {
  const ArmSplit arms = split_arms(X, y, a);
  if (arms.treated.empty() || arms.control.empty())
    throw InsufficientData("S-learner needs variation in the treatment indicator");
  const bool interactions = spec.s_interactions && spec.base.kind == RegressorKind::Ridge;
  const Eigen::Index p = X.cols();
  Eigen::MatrixXd design(X.rows(), interactions ? 2 * p + 1 : p + 1);
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    design.row(i) = s_learner_row(X.row(i).transpose(), a[static_cast<std::size_t>(i)], interactions).transpose();
  return UpliftModel::s_learner(BaseRegressor::fit(design, y, spec.base), interactions);
}

UpliftModel fit_t_learner(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> a,
                          const UpliftSpec& spec) {
  OutcomeModels m = fit_outcome_models(X, y, a, spec);
  return UpliftModel::t_learner(std::move(m.f0), std::move(m.f1));
}

UpliftModel fit_x_learner(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> a,
                          const UpliftSpec& spec) {
  OutcomeModels m = fit_outcome_models(X, y, a, spec);
  // imputed effects: D1 = y - f0(x) on treated rows, D0 = f1(x) - y on control rows
  const Eigen::MatrixXd Xt = X(m.arms.treated, Eigen::all);
  const Eigen::MatrixXd Xc = X(m.arms.control, Eigen::all);
  const Eigen::VectorXd d1 = y(m.arms.treated) - m.f0.predict_rows(Xt);
  const Eigen::VectorXd d0 = m.f1.predict_rows(Xc) - y(m.arms.control);
  BaseRegressor tau1 = BaseRegressor::fit(Xt, d1, spec.base);
  BaseRegressor tau0 = BaseRegressor::fit(Xc, d0, spec.base);
  std::optional<PropensityModel> e;
  if (spec.x_weighting == XWeighting::Propensity) e = PropensityModel::fit(X, a, spec.propensity_l2);
  return UpliftModel::x_learner(std::move(m.f0), std::move(m.f1), std::move(tau0), std::move(tau1),
                                std::move(e), spec.x_weighting);
}

double dr_pseudo_outcome(double y, int a, double f0, double f1, double e) {
  return f1 - f0 + a * (y - f1) / e - (1 - a) * (y - f0) / (1.0 - e);
}

UpliftModel fit_dr_learner(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> a,
                           const UpliftSpec& spec) {
  OutcomeModels m = fit_outcome_models(X, y, a, spec);
  PropensityModel e = PropensityModel::fit(X, a, spec.propensity_l2);
  Eigen::VectorXd phi(X.rows());
  std::size_t clipped = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Eigen::VectorXd x = X.row(i).transpose();
    const double raw = e.predict_raw(x);
    if (raw < kPropensityClip || raw > 1.0 - kPropensityClip) ++clipped;
    phi(i) = dr_pseudo_outcome(y(i), a[static_cast<std::size_t>(i)], m.f0.predict(x), m.f1.predict(x),
                               e.predict(x));
  }
  if (clipped > 0)
    warn("DR learner clipped {} propensities into [{}, {}]", clipped, kPropensityClip,
         1.0 - kPropensityClip);
  BaseRegressor final_model = BaseRegressor::fit(X, phi, spec.base);
  return UpliftModel::dr_learner(std::move(m.f0), std::move(m.f1), std::move(e), std::move(final_model),
                                 clipped);
}

UpliftModel fit_uplift(LearnerKind kind, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       std::span<const int> a, const UpliftSpec& spec) {
  switch (kind) {
    case LearnerKind::S: return fit_s_learner(X, y, a, spec);
    case LearnerKind::T: return fit_t_learner(X, y, a, spec);
    case LearnerKind::X: return fit_x_learner(X, y, a, spec);
    case LearnerKind::DR: return fit_dr_learner(X, y, a, spec);
  }
  throw InvalidArgument("unknown learner");
}

// ---------------------------------------------------------------------------
// Deciles

std::vector<int> decile_membership(std::span<const double> scores) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });
  std::vector<int> decile(n);
  for (std::size_t rank = 0; rank < n; ++rank)
    decile[order[rank]] = static_cast<int>(rank * 10 / n);
  return decile;
}

std::vector<DecileRow> uplift_deciles(std::span<const double> scores, std::span<const double> y,
                                      std::span<const int> a) {
  if (scores.size() != y.size() || y.size() != a.size())
    throw InvalidArgument("scores, y and a sizes differ");
  if (std::none_of(a.begin(), a.end(), [](int v) { return v == 1; }) ||
      std::none_of(a.begin(), a.end(), [](int v) { return v == 0; }))
    throw InsufficientData("decile table needs both arms in the population");
  const std::vector<int> decile = decile_membership(scores);
  std::vector<DecileRow> rows(10);
  std::vector<double> sum_t(10, 0.0), sum_c(10, 0.0), sum_s(10, 0.0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    auto& r = rows[static_cast<std::size_t>(decile[i])];
    ++r.n;
    sum_s[static_cast<std::size_t>(decile[i])] += scores[i];
    if (a[i] == 1) {
      ++r.n_treated;
      sum_t[static_cast<std::size_t>(decile[i])] += y[i];
    } else {
      ++r.n_control;
      sum_c[static_cast<std::size_t>(decile[i])] += y[i];
    }
  }
  for (std::size_t k = 0; k < 10; ++k) {
    rows[k].decile = static_cast<int>(k);
    if (rows[k].n > 0) rows[k].mean_score = sum_s[k] / static_cast<double>(rows[k].n);
    if (rows[k].n_treated > 0 && rows[k].n_control > 0)
      rows[k].uplift = sum_t[k] / static_cast<double>(rows[k].n_treated) -
                       sum_c[k] / static_cast<double>(rows[k].n_control);
  }
  return rows;
}

}  // namespace salesopt
