#include "doctest.h"

#include <cmath>
#include <numeric>

#include "salesopt/datagen.hpp"
#include "salesopt/errors.hpp"
#include "salesopt/uplift.hpp"

using namespace salesopt;

namespace {

struct Data {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<int> a;
  Eigen::VectorXd tau;
};

/// y = 2 + x.b + a * (1 + 1.5 x0 - x1 + 0.5 x2) + noise
Data linear_data(int n, double noise, double share, std::uint64_t seed, double confounding = 0.0) {
  Rng r(seed);
  Data d;
  d.X.resize(n, 4);
  d.y.resize(n);
  d.tau.resize(n);
  d.a.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 4; ++j) d.X(i, j) = r.normal();
    d.tau[i] = 1.0 + 1.5 * d.X(i, 0) - d.X(i, 1) + 0.5 * d.X(i, 2);
    const double p = confounding == 0.0 ? share : 1.0 / (1.0 + std::exp(-confounding * d.X(i, 1)));
    d.a[static_cast<std::size_t>(i)] = r.bernoulli(p) ? 1 : 0;
    d.y[i] = 2.0 + d.X(i, 0) - 0.5 * d.X(i, 1) + 0.3 * d.X(i, 3) + d.a[static_cast<std::size_t>(i)] * d.tau[i] +
             noise * r.normal();
  }
  return d;
}

}  // namespace

TEST_CASE("every learner recovers a noiseless linear effect") {
  const Data d = linear_data(1000, 0.0, 0.5, 1);
  for (LearnerKind k : {LearnerKind::S, LearnerKind::T, LearnerKind::X, LearnerKind::DR}) {
    const UpliftModel m = fit_uplift(k, d.X, d.y, d.a);
    CHECK(m.kind() == k);
    CHECK((m.predict_ite_rows(d.X) - d.tau).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("learner names") {
  CHECK(to_string(LearnerKind::DR) == "DR");
  CHECK(learner_from_string("X") == LearnerKind::X);
  CHECK_THROWS_AS(learner_from_string("Q"), InvalidArgument);
}

TEST_CASE("DR pseudo-outcome by hand") {
  // f1 - f0 + a (y - f1)/e - (1-a)(y - f0)/(1-e)
  CHECK(dr_pseudo_outcome(5.0, 1, 1.0, 3.0, 0.4) == doctest::Approx(2.0 + 2.0 / 0.4));
  CHECK(dr_pseudo_outcome(5.0, 0, 1.0, 3.0, 0.4) == doctest::Approx(2.0 - 4.0 / 0.6));
}

TEST_CASE("propensity model follows a logistic truth and clips") {
  const Data d = linear_data(20000, 1.0, 0.5, 2, 1.2);
  const PropensityModel e = PropensityModel::fit(d.X, d.a, 1.0);
  // truth: logit = 1.2 x1, so the slope on x1 should dominate
  CHECK(e.weights()[1] == doctest::Approx(1.2).epsilon(0.08));
  CHECK(std::abs(e.weights()[0]) < 0.08);
  Eigen::Vector4d far(0, 50, 0, 0);
  CHECK(e.predict(far) == doctest::Approx(0.99));
  CHECK(e.predict_raw(far) > 0.999);
  Eigen::Vector4d low(0, -50, 0, 0);
  CHECK(e.predict(low) == doctest::Approx(0.01));
}

TEST_CASE("learners need both arms") {
  Data d = linear_data(100, 1.0, 0.5, 3);
  std::fill(d.a.begin(), d.a.end(), 1);
  for (LearnerKind k : {LearnerKind::S, LearnerKind::T, LearnerKind::X, LearnerKind::DR})
    CHECK_THROWS_AS(fit_uplift(k, d.X, d.y, d.a), InsufficientData);
  d.a[0] = 2;
  CHECK_THROWS_AS(fit_uplift(LearnerKind::T, d.X, d.y, d.a), InvalidArgument);
}

TEST_CASE("decile membership by hand") {
  // 20 scores in descending order: the last two rows are the lowest decile.
  std::vector<double> s(20);
  for (int i = 0; i < 20; ++i) s[static_cast<std::size_t>(i)] = 20.0 - i;
  const auto dec = decile_membership(s);
  CHECK(dec[19] == 0);
  CHECK(dec[18] == 0);
  CHECK(dec[0] == 9);
  CHECK(dec[10] == 4);
  // ties keep input order
  const std::vector<double> tied(10, 1.0);
  const auto t = decile_membership(tied);
  for (int i = 0; i < 10; ++i) CHECK(t[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("decile uplift table by hand") {
  std::vector<double> s, y;
  std::vector<int> a;
  for (int k = 0; k < 10; ++k) {
    // two treated and two control rows per decile; treated y = k+3, control y = 1
    for (int r = 0; r < 4; ++r) {
      s.push_back(k + 0.1 * r);
      a.push_back(r < 2 ? 1 : 0);
      y.push_back(r < 2 ? k + 3.0 : 1.0);
    }
  }
  const auto rows = uplift_deciles(s, y, a);
  REQUIRE(rows.size() == 10);
  for (int k = 0; k < 10; ++k) {
    CHECK(rows[static_cast<std::size_t>(k)].n == 4);
    CHECK(*rows[static_cast<std::size_t>(k)].uplift == doctest::Approx(k + 2.0));
    CHECK(rows[static_cast<std::size_t>(k)].mean_score == doctest::Approx(k + 0.15));
  }
  // decile 0 without a control row has no uplift
  a[2] = a[3] = 1;
  CHECK_FALSE(uplift_deciles(s, y, a)[0].uplift.has_value());
  std::vector<int> all_treated(a.size(), 1);
  CHECK_THROWS_AS(uplift_deciles(s, y, all_treated), InsufficientData);
}

TEST_CASE("X-learner fixed-half weighting and boosted bases") {
  const Data d = linear_data(3000, 0.5, 0.5, 4);
  UpliftSpec spec;
  spec.x_weighting = XWeighting::Half;
  const UpliftModel x = fit_x_learner(d.X, d.y, d.a, spec);
  CHECK_FALSE(x.propensity().has_value());
  const double rmse = std::sqrt((x.predict_ite_rows(d.X) - d.tau).squaredNorm() / 3000.0);
  CHECK(rmse < 0.15);

  UpliftSpec boosted;
  boosted.base = {RegressorKind::BoostedStumps, 0.0, 150, 0.1};
  const UpliftModel t = fit_t_learner(d.X, d.y, d.a, boosted);
  const Eigen::VectorXd pred = t.predict_ite_rows(d.X);
  double num = 0, dx = 0, dy = 0;
  const double mp = pred.mean(), mt = d.tau.mean();
  for (int i = 0; i < 3000; ++i) {
    num += (pred[i] - mp) * (d.tau[i] - mt);
    dx += (pred[i] - mp) * (pred[i] - mp);
    dy += (d.tau[i] - mt) * (d.tau[i] - mt);
  }
  CHECK(num / std::sqrt(dx * dy) > 0.8);
}
