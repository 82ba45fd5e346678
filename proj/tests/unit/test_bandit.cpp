#include "doctest.h"

#include <cmath>

#include "salesopt/bandit.hpp"
#include "salesopt/errors.hpp"

using namespace salesopt;

namespace {

FeatureVector random_context(Rng& r, std::size_t n) {
  FeatureVector x(n);
  for (double& v : x) v = r.normal();
  return x;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b)); }

}  // namespace

TEST_CASE("network shape and parameter round trip") {
  Rng r(1);
  RewardNet net = RewardNet::init(16, 32, r);
  CHECK(net.context_dims() == 16);
  CHECK(net.input_dims() == 19);
  CHECK(net.parameter_count() == 673);
  const Eigen::VectorXd theta = net.parameters();
  REQUIRE(theta.size() == 673);
  Eigen::VectorXd shifted = theta.array() + 0.25;
  net.set_parameters(shifted);
  CHECK(net.parameters() == shifted);
  CHECK(net.finite());
  CHECK_THROWS_AS(net.set_parameters(Eigen::VectorXd::Zero(5)), InvalidArgument);
}

TEST_CASE("one-hot action block") {
  const Eigen::VectorXd in = net_input({2.0, 3.0}, ActionType::PreventChurn);
  CHECK(in.size() == 5);
  CHECK(in[0] == 2.0);
  CHECK(in[3] == 1.0);
  CHECK(in[2] + in[4] == 0.0);
}

TEST_CASE("analytic gradients match central differences") {
  Rng r(2);
  RewardNet net = RewardNet::init(6, 8, r);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd in = net_input(random_context(r, 6), kAllActions[static_cast<std::size_t>(trial % 3)]);
    const Eigen::VectorXd g = net.parameter_gradient(in);
    const Eigen::VectorXd theta = net.parameters();
    const double h = 1e-6;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp[k] += h;
      tm[k] -= h;
      net.set_parameters(tp);
      const double fp = net.forward(in);
      net.set_parameters(tm);
      const double fm = net.forward(in);
      const double fd = (fp - fm) / (2 * h);
      if (std::abs(fd) > 1e-6 || std::abs(g[k]) > 1e-6) CHECK(rel_err(g[k], fd) < 1e-4);
    }
    net.set_parameters(theta);
    const Eigen::VectorXd gi = net.input_gradient(in);
    for (Eigen::Index k = 0; k < in.size(); ++k) {
      Eigen::VectorXd ip = in, im = in;
      ip[k] += h;
      im[k] -= h;
      const double fd = (net.forward(ip) - net.forward(im)) / (2 * h);
      if (std::abs(fd) > 1e-6 || std::abs(gi[k]) > 1e-6) CHECK(rel_err(gi[k], fd) < 1e-4);
    }
  }
}

TEST_CASE("uncertainty state matches an explicit inverse") {
  Rng r(3);
  UncertaintyState s(5, 2.0);
  Eigen::MatrixXd H = 2.0 * Eigen::MatrixXd::Identity(5, 5);
  for (int k = 0; k < 12; ++k) {
    Eigen::VectorXd g(5);
    for (int i = 0; i < 5; ++i) g[i] = r.normal();
    s.add(g);
    H += g * g.transpose();
  }
  CHECK(s.updates() == 12);
  CHECK((s.matrix() - H).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::VectorXd probe(5);
  probe << 1, -2, 0.5, 0, 3;
  const double oracle = std::sqrt(probe.dot(H.inverse() * probe));
  CHECK(s.sigma(probe) == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("greedy ties go to the earlier action and UCB without bonus is greedy") {
  BanditPolicyParams params;
  BanditPolicy p = BanditPolicy::create(4, params, 1);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(p.net.parameter_count());
  p.net.set_parameters(zero);
  const FeatureVector x{0.1, 0.2, 0.3, 0.4};
  CHECK(greedy_action(p, x) == ActionType::BoostEngagement);

  Rng r(4);
  BanditPolicy q = BanditPolicy::create(4, params, 9);
  q.params.mode = ExplorationMode::UCB;
  q.params.gamma = 0.0;
  for (int i = 0; i < 20; ++i) {
    const FeatureVector c = random_context(r, 4);
    CHECK(select_action(q, c, r) == greedy_action(q, c));
  }
}

TEST_CASE("UCB adds gamma sigma per action") {
  BanditPolicyParams params;
  params.mode = ExplorationMode::UCB;
  params.gamma = 5.0;
  BanditPolicy p = BanditPolicy::create(3, params, 2);
  const FeatureVector x{0.5, -0.5, 1.0};
  ActionType best = ActionType::BoostEngagement;
  double best_score = -INFINITY;
  for (ActionType a : kAllActions) {
    const Prediction pr = predict(p, x, a);
    const double g_sigma =
        p.state.sigma(uncertainty_gradient(p.net, x, a, GradientTarget::Parameters));
    CHECK(pr.sigma == doctest::Approx(g_sigma));
    const double score = pr.y_hat + 5.0 * pr.sigma;
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  Rng r(1);
  CHECK(select_action(p, x, r) == best);
}

TEST_CASE("Thompson sampling always consumes three normals") {
  BanditPolicyParams params;
  BanditPolicy p = BanditPolicy::create(3, params, 2);
  Rng a(10), b(10);
  select_action(p, {0.0, 1.0, 2.0}, a);
  for (int i = 0; i < 3; ++i) b.normal();
  CHECK(a.normal() == b.normal());
  CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("update lowers the loss and adds one rank-one term at the new parameters") {
  BanditPolicyParams params;
  params.learning_rate = 0.05;
  BanditPolicy p = BanditPolicy::create(4, params, 3);
  const FeatureVector x{1.0, 0.0, -1.0, 0.5};
  const Eigen::MatrixXd before = p.state.matrix();
  const UpdateResult u = update(p, x, ActionType::PromoteUpsell, 1);
  CHECK(u.loss_after < u.loss_before);
  CHECK(u.rejected_steps == 0);
  CHECK(p.updates == 1);
  const Eigen::VectorXd g = uncertainty_gradient(p.net, x, ActionType::PromoteUpsell, GradientTarget::Parameters);
  CHECK((p.state.matrix() - before - g * g.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  for (int i = 0; i < 200; ++i) update(p, x, ActionType::PromoteUpsell, 1);
  CHECK(predict(p, x, ActionType::PromoteUpsell).y_hat == doctest::Approx(1.0).epsilon(0.05));
  CHECK_THROWS_AS(update(p, x, ActionType::PromoteUpsell, 2), InvalidArgument);
  CHECK_THROWS_AS(update(p, {1.0}, ActionType::PromoteUpsell, 1), InvalidArgument);
}

TEST_CASE("input-gradient target uses the context block") {
  BanditPolicyParams params;
  params.gradient_target = GradientTarget::Inputs;
  BanditPolicy p = BanditPolicy::create(4, params, 3);
  CHECK(p.state.dims() == 4);
  const FeatureVector x{1.0, 0.0, -1.0, 0.5};
  const Eigen::VectorXd g = uncertainty_gradient(p.net, x, ActionType::BoostEngagement, GradientTarget::Inputs);
  CHECK(g == p.net.input_gradient(net_input(x, ActionType::BoostEngagement)).head(4));
  update(p, x, ActionType::BoostEngagement, -1);
  CHECK(p.state.updates() == 1);
}

TEST_CASE("parameter validation and mode names") {
  BanditPolicyParams bad;
  bad.beta = -1;
  CHECK_THROWS_AS(validate_params(bad), InvalidArgument);
  bad = {};
  bad.lambda = 0;
  CHECK_THROWS_AS(BanditPolicy::create(3, bad, 1), InvalidArgument);
  CHECK(exploration_from_string("ucb") == ExplorationMode::UCB);
  CHECK(to_string(ExplorationMode::ThompsonSampling) == "ts");
  CHECK(gradient_target_from_string("inputs") == GradientTarget::Inputs);
  CHECK(reward_from_feedback(make_feedback("R", "A", ActionType::PreventChurn, FeedbackKind::DeepLinkClicked, 0)) == 1);
}

TEST_CASE("simulation is deterministic and learns a dominant action") {
  const BanditEnvSpec env = dominant_action_env(ActionType::PreventChurn);
  BanditPolicyParams params;
  const SimulationTrace a = run_simulation(env, params, 1500, 5);
  const SimulationTrace b = run_simulation(env, params, 1500, 5);
  REQUIRE(a.rows.size() == 1500);
  CHECK(a.cumulative_reward() == b.cumulative_reward());
  CHECK(a.policy.net.parameters() == b.policy.net.parameters());
  CHECK(a.selection_share(ActionType::PreventChurn, 1200, 1500) > 0.8);
  const auto& last = a.rows.back();
  CHECK(last.share[0] + last.share[1] + last.share[2] == doctest::Approx(1.0));
  CHECK(last.best_expected_reward == 1.0);
}
