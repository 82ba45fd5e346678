#include "doctest.h"

#include <cmath>

#include "salesopt/errors.hpp"
#include "salesopt/forecast.hpp"
#include "salesopt/rng.hpp"

using namespace salesopt;

TEST_CASE("targets and ranges") {
  CHECK(to_string(EngagementTarget::pu) == "pu");
  CHECK(to_string(EngagementTarget::pa) == "pa");
  CHECK(target_range(EngagementTarget::pu) == std::pair{0.0, 100.0});
  CHECK(target_range(EngagementTarget::pa) == std::pair{0.0, 1.0});
  CHECK(target_for_metric(0) == EngagementTarget::pu);
  CHECK(target_for_metric(1) == EngagementTarget::pa);
  CHECK(target_for_metric(2) == EngagementTarget::pu);
}

TEST_CASE("error metrics by hand") {
  const std::vector<double> p{1, 2, 3}, a{2, 2, 5};
  const ForecastErrors e = forecast_errors(p, a);
  CHECK(e.mae == doctest::Approx(1.0));
  CHECK(e.rmse == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK_THROWS_AS(forecast_errors(std::vector<double>{}, std::vector<double>{}), InvalidArgument);
  CHECK_THROWS_AS(forecast_errors(p, std::vector<double>{1.0}), InvalidArgument);
}

TEST_CASE("forecaster output is clamped to the target range") {
  const Forecaster f = Forecaster::from_base(EngagementTarget::pa, BaseRegressor::linear(0.5, Eigen::Vector2d(1, 0)));
  CHECK(f.predict(Eigen::Vector2d(0.2, 0)) == doctest::Approx(0.7));
  CHECK(f.predict(Eigen::Vector2d(3, 0)) == 1.0);
  CHECK(f.predict_raw(Eigen::Vector2d(3, 0)) == doctest::Approx(3.5));
  CHECK(f.predict(Eigen::Vector2d(-3, 0)) == 0.0);
  const Eigen::VectorXd rows = f.predict_rows(Eigen::MatrixXd{{3, 0}, {0, 0}});
  CHECK(rows[0] == 1.0);
  CHECK(rows[1] == doctest::Approx(0.5));
}

TEST_CASE("fit recovers a linear trend and rejects out-of-range labels") {
  Rng r(1);
  Eigen::MatrixXd X(200, 2);
  Eigen::VectorXd y(200);
  for (int i = 0; i < 200; ++i) {
    X(i, 0) = r.normal();
    X(i, 1) = r.normal();
    y[i] = 50.0 + 5.0 * X(i, 0) - 2.0 * X(i, 1);
  }
  const Forecaster f = Forecaster::fit(X, y, EngagementTarget::pu);
  const ForecastErrors e = evaluate(f, X, y);
  CHECK(e.mae < 1e-9);
  y[3] = 120.0;
  CHECK_THROWS_AS(Forecaster::fit(X, y, EngagementTarget::pu), InvalidArgument);
}

TEST_CASE("forecast delta is forecast minus current value") {
  Account a;
  a.id = "A1";
  a.x = {0.0, 1.0};
  a.u_index = {0};
  a.e_index = {1};
  a.engagement_now = {60.0, 0.4};
  std::vector<Forecaster> fs{
      Forecaster::from_base(EngagementTarget::pu, BaseRegressor::linear(50.0, Eigen::VectorXd::Constant(1, 2.0))),
      Forecaster::from_base(EngagementTarget::pa, BaseRegressor::linear(0.3, Eigen::VectorXd::Constant(1, 0.2)))};
  const FeatureVector d = forecast_delta(fs, a);
  REQUIRE(d.size() == 2);
  CHECK(d[0] == doctest::Approx(-8.0));
  CHECK(d[1] == doctest::Approx(0.1));
  a.engagement_now.resize(1);
  CHECK_THROWS_AS(forecast_delta(fs, a), InvalidArgument);
}
