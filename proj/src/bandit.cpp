#include "salesopt/bandit.hpp"

#include <cmath>
#include <map>

#include <fmt/format.h>

#include "salesopt/errors.hpp"
#include "salesopt/log.hpp"

namespace salesopt {

RewardNet RewardNet::init(Eigen::Index context_dims, Eigen::Index hidden, Rng& rng) {
  if (context_dims < 1 || hidden < 1) throw InvalidArgument("reward net needs positive dimensions");
  RewardNet net;
  const Eigen::Index in = context_dims + static_cast<Eigen::Index>(kNumActions);
  net.w1_.resize(hidden, in);
  const double s1 = std::sqrt(2.0 / static_cast<double>(in));
  for (Eigen::Index r = 0; r < hidden; ++r)
    for (Eigen::Index c = 0; c < in; ++c) net.w1_(r, c) = s1 * rng.normal();
  net.b1_ = Eigen::VectorXd::Zero(hidden);
  net.w2_.resize(hidden);
  const double s2 = std::sqrt(1.0 / static_cast<double>(hidden));
  for (Eigen::Index r = 0; r < hidden; ++r) net.w2_(r) = s2 * rng.normal();
  net.b2_ = 0.0;
  return net;
}

double RewardNet::forward(const Eigen::VectorXd& input) const {
  const Eigen::VectorXd h = (w1_ * input + b1_).cwiseMax(0.0);
  return w2_.dot(h) + b2_;
}

Eigen::VectorXd RewardNet::parameter_gradient(const Eigen::VectorXd& input) const {
  const Eigen::VectorXd pre = w1_ * input + b1_;
  const Eigen::Index m = hidden();
  const Eigen::Index in = input_dims();
  Eigen::VectorXd g(parameter_count());
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < m; ++r) {
    const double gate = pre(r) > 0.0 ? w2_(r) : 0.0;
    for (Eigen::Index c = 0; c < in; ++c) g(k++) = gate * input(c);
  }
  for (Eigen::Index r = 0; r < m; ++r) g(k++) = pre(r) > 0.0 ? w2_(r) : 0.0;
  for (Eigen::Index r = 0; r < m; ++r) g(k++) = std::max(pre(r), 0.0);
  g(k) = 1.0;
  return g;
}

Eigen::VectorXd RewardNet::input_gradient(const Eigen::VectorXd& input) const {
  const Eigen::VectorXd pre = w1_ * input + b1_;
  Eigen::VectorXd gate(hidden());
  for (Eigen::Index r = 0; r < hidden(); ++r) gate(r) = pre(r) > 0.0 ? w2_(r) : 0.0;
  return w1_.transpose() * gate;
}

Eigen::VectorXd RewardNet::parameters() const {
  Eigen::VectorXd theta(parameter_count());
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < w1_.rows(); ++r)
    for (Eigen::Index c = 0; c < w1_.cols(); ++c) theta(k++) = w1_(r, c);
  theta.segment(k, hidden()) = b1_;
  k += hidden();
  theta.segment(k, hidden()) = w2_;
  k += hidden();
  theta(k) = b2_;
  return theta;
}

void RewardNet::set_parameters(const Eigen::VectorXd& theta) {
  if (theta.size() != parameter_count())
    throw InvalidArgument(fmt::format("expected {} parameters, got {}", parameter_count(), theta.size()));
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < w1_.rows(); ++r)
    for (Eigen::Index c = 0; c < w1_.cols(); ++c) w1_(r, c) = theta(k++);
  b1_ = theta.segment(k, hidden());
  k += hidden();
  w2_ = theta.segment(k, hidden());
  k += hidden();
  b2_ = theta(k);
}

bool RewardNet::finite() const {
  return w1_.allFinite() && b1_.allFinite() && w2_.allFinite() && std::isfinite(b2_);
}

Eigen::VectorXd net_input(const FeatureVector& x, ActionType action) {
  Eigen::VectorXd in = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(x.size() + kNumActions));
  for (std::size_t i = 0; i < x.size(); ++i) in(static_cast<Eigen::Index>(i)) = x[i];
  in(static_cast<Eigen::Index>(x.size() + static_cast<std::size_t>(action))) = 1.0;
  return in;
}

UncertaintyState::UncertaintyState(Eigen::Index dims, double lambda) : lambda_(lambda) {
  if (!(lambda > 0.0)) throw InvalidArgument("lambda must be > 0");
  if (dims < 1) throw InvalidArgument("uncertainty state needs a positive dimension");
  h_ = lambda * Eigen::MatrixXd::Identity(dims, dims);
  llt_.compute(h_);
}

void UncertaintyState::add(const Eigen::VectorXd& g) {
  if (g.size() != h_.rows()) throw InvalidArgument("gradient size does not match H");
  h_.selfadjointView<Eigen::Lower>().rankUpdate(g);
  h_.triangularView<Eigen::StrictlyUpper>() = h_.transpose();
  llt_.rankUpdate(g, 1.0);
  ++updates_;
}

double UncertaintyState::sigma(const Eigen::VectorXd& g) const {
  if (g.size() != h_.rows()) throw InvalidArgument("gradient size does not match H");
  const Eigen::VectorXd z = llt_.matrixL().solve(g);
  return z.norm();
}

std::string_view to_string(ExplorationMode m) {
  return m == ExplorationMode::ThompsonSampling ? "ts" : "ucb";
}

std::string_view to_string(GradientTarget g) {
  return g == GradientTarget::Parameters ? "parameters" : "inputs";
}

ExplorationMode exploration_from_string(std::string_view s) {
  if (s == "ts" || s == "thompson") return ExplorationMode::ThompsonSampling;
  if (s == "ucb") return ExplorationMode::UCB;
  throw InvalidArgument(fmt::format("unknown exploration mode '{}'", s));
}

GradientTarget gradient_target_from_string(std::string_view s) {
  if (s == "parameters") return GradientTarget::Parameters;
  if (s == "inputs") return GradientTarget::Inputs;
  throw InvalidArgument(fmt::format("unknown gradient target '{}'", s));
}

void validate_params(const BanditPolicyParams& p) {
  if (!(p.beta >= 0.0) || !(p.gamma >= 0.0)) throw InvalidArgument("beta and gamma must be >= 0");
  if (!(p.learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
  if (p.sgd_steps < 1) throw InvalidArgument("sgd_steps must be >= 1");
  if (!(p.lambda > 0.0)) throw InvalidArgument("lambda must be > 0");
  if (p.hidden < 1) throw InvalidArgument("hidden width must be >= 1");
}

BanditPolicy BanditPolicy::create(Eigen::Index context_dims, const BanditPolicyParams& params,
                                  std::uint64_t seed) {
  validate_params(params);
  Rng rng(seed, 0x6e6574);
  BanditPolicy p;
  p.params = params;
  p.net = RewardNet::init(context_dims, params.hidden, rng);
  const Eigen::Index dims =
      params.gradient_target == GradientTarget::Parameters ? p.net.parameter_count() : context_dims;
  p.state = UncertaintyState(dims, params.lambda);
  p.learning_rate = params.learning_rate;
  return p;
}

Eigen::VectorXd uncertainty_gradient(const RewardNet& net, const FeatureVector& x, ActionType action,
                                     GradientTarget target) {
  if (static_cast<Eigen::Index>(x.size()) != net.context_dims())
    throw InvalidArgument(fmt::format("context has {} features, net expects {}", x.size(), net.context_dims()));
  const Eigen::VectorXd in = net_input(x, action);
  if (target == GradientTarget::Parameters) return net.parameter_gradient(in);
  return net.input_gradient(in).head(net.context_dims());
}

Prediction predict(const BanditPolicy& policy, const FeatureVector& x, ActionType action) {
  const Eigen::VectorXd g = uncertainty_gradient(policy.net, x, action, policy.params.gradient_target);
  return {policy.net.forward(net_input(x, action)), policy.state.sigma(g)};
}

ActionType greedy_action(const BanditPolicy& policy, const FeatureVector& x) {
  ActionType best = kAllActions[0];
  double best_score = -std::numeric_limits<double>::infinity();
  for (ActionType a : kAllActions) {
    const double y = policy.net.forward(net_input(x, a));
    if (y > best_score) {
      best_score = y;
      best = a;
    }
  }
  return best;
}

ActionType select_action(const BanditPolicy& policy, const FeatureVector& x, Rng& rng) {
  ActionType best = kAllActions[0];
  double best_score = -std::numeric_limits<double>::infinity();
  for (ActionType a : kAllActions) {
    const Prediction p = predict(policy, x, a);
    double score = p.y_hat;
    if (policy.params.mode == ExplorationMode::ThompsonSampling)
      score += policy.params.beta * p.sigma * rng.normal();
    else
      score += policy.params.gamma * p.sigma;
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  return best;
}

int reward_from_feedback(const FeedbackEvent& event) { return reward_for(event.feedback); }

UpdateResult update(BanditPolicy& policy, const FeatureVector& x, ActionType action, int reward) {
  if (reward < -1 || reward > 1) throw InvalidArgument(fmt::format("reward {} is not in {{-1, 0, 1}}", reward));
  if (static_cast<Eigen::Index>(x.size()) != policy.net.context_dims())
    throw InvalidArgument(fmt::format("context has {} features, net expects {}", x.size(),
                                      policy.net.context_dims()));
  const Eigen::VectorXd in = net_input(x, action);
  UpdateResult result;
  const double r = static_cast<double>(reward);
  for (int step = 0; step < policy.params.sgd_steps; ++step) {
    const double y = policy.net.forward(in);
    const double loss = 0.5 * (y - r) * (y - r);
    if (step == 0) result.loss_before = loss;
    const Eigen::VectorXd theta = policy.net.parameters();
    Eigen::VectorXd next = theta;
    if (std::isfinite(loss)) next -= policy.learning_rate * (y - r) * policy.net.parameter_gradient(in);
    const bool ok = std::isfinite(loss) && next.allFinite();
    if (!ok) {
      ++result.rejected_steps;
      policy.learning_rate *= 0.5;
      warn("bandit step rejected (non-finite loss), learning rate halved to {}", policy.learning_rate);
      continue;
    }
    policy.net.set_parameters(next);
  }
  const double y = policy.net.forward(in);
  result.loss_after = 0.5 * (y - r) * (y - r);
  policy.state.add(uncertainty_gradient(policy.net, x, action, policy.params.gradient_target));
  ++policy.updates;
  return result;
}

double SimulationTrace::selection_share(ActionType action, std::size_t begin, std::size_t end) const {
  end = std::min(end, rows.size());
  if (begin >= end) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = begin; i < end; ++i) hits += rows[i].action == action;
  return static_cast<double>(hits) / static_cast<double>(end - begin);
}

double SimulationTrace::greedy_share(std::size_t begin, std::size_t end) const {
  end = std::min(end, rows.size());
  if (begin >= end) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = begin; i < end; ++i) hits += rows[i].action == rows[i].greedy;
  return static_cast<double>(hits) / static_cast<double>(end - begin);
}

SimulationTrace run_simulation(const BanditEnvSpec& env, const BanditPolicyParams& params, int rounds,
                               std::uint64_t seed, const SimulationOptions& options) {
  if (rounds < 0) throw InvalidArgument("rounds must be >= 0");
  GenConfig gen;
  gen.n_accounts = options.n_accounts;
  gen.n_reps = options.n_reps;
  gen.seed = seed;
  const Population pop = generate_population(gen);
  const auto context_dims =
      static_cast<Eigen::Index>(kBanditAccountDims + gen.rep_dims + kAlertHistoryDims);

  SimulationTrace trace;
  trace.policy = BanditPolicy::create(context_dims, params, seed);
  trace.rows.reserve(static_cast<std::size_t>(rounds));
  Rng pick(seed, 0x70696b);
  Rng explore(seed, 0x657870);
  Rng feedback(seed, 0x666462);
  std::vector<AlertHistory> history(pop.accounts.size());
  std::array<std::size_t, kNumActions> counts{};
  long cumulative = 0;
  const int per_day = static_cast<int>(std::max<std::size_t>(1, options.n_reps));

  for (int t = 0; t < rounds; ++t) {
    const Day today = t / per_day;
    const auto ai = static_cast<std::size_t>(pick.below(pop.accounts.size()));
    const auto ri = static_cast<std::size_t>(pick.below(pop.reps.size()));
    const BanditContext ctx = make_context(pop.accounts[ai], pop.reps[ri], history[ai], today);
    const FeatureVector x = ctx.concat();

    TraceRow row;
    row.round = t;
    row.greedy = greedy_action(trace.policy, x);
    row.action = select_action(trace.policy, x, explore);
    const FeedbackEvent ev =
        simulate_feedback(env, ctx, row.action, feedback, pop.reps[ri].id, pop.accounts[ai].id, today);
    row.feedback = ev.feedback;
    row.reward = reward_from_feedback(ev);
    cumulative += row.reward;
    row.cumulative_reward = cumulative;
    row.expected_reward = expected_reward(env, x, row.action);
    row.best_expected_reward = -std::numeric_limits<double>::infinity();
    for (ActionType a : kAllActions)
      row.best_expected_reward = std::max(row.best_expected_reward, expected_reward(env, x, a));
    ++counts[static_cast<std::size_t>(row.action)];
    for (std::size_t k = 0; k < kNumActions; ++k)
      row.share[k] = static_cast<double>(counts[k]) / static_cast<double>(t + 1);

    update(trace.policy, x, row.action, row.reward);
    AlertHistory& h = history[ai];
    h.last_alert_day = today;
    ++h.previous_alert_count;
    h.last_feedback = ev.feedback;
    h.last_category = row.action;
    trace.rows.push_back(row);
  }
  return trace;
}

}  // namespace salesopt
