#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "salesopt/datagen.hpp"
#include "salesopt/domain.hpp"
#include "salesopt/rng.hpp"

namespace salesopt {

/// One hidden ReLU layer over [x_t, onehot(action)], scalar output.
/// Flat parameter order: W1 row-major (hidden x input), b1, w2, b2.
class RewardNet {
 public:
  RewardNet() = default;
  /// He-normal first layer, N(0, 1/hidden) output layer, zero biases.
  static RewardNet init(Eigen::Index context_dims, Eigen::Index hidden, Rng& rng);

  Eigen::Index context_dims() const { return input_dims() - kNumActions; }
  Eigen::Index input_dims() const { return w1_.cols(); }
  Eigen::Index hidden() const { return w1_.rows(); }
  /// (input_dims + 1) * hidden + hidden + 1
  Eigen::Index parameter_count() const { return (input_dims() + 1) * hidden() + hidden() + 1; }

  double forward(const Eigen::VectorXd& input) const;
  /// d output / d theta in flat parameter order.
  Eigen::VectorXd parameter_gradient(const Eigen::VectorXd& input) const;
  /// d output / d input (full input including the action one-hot).
  Eigen::VectorXd input_gradient(const Eigen::VectorXd& input) const;

  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& theta);
  bool finite() const;

 private:
  Eigen::MatrixXd w1_;
  Eigen::VectorXd b1_;
  Eigen::VectorXd w2_;
  double b2_ = 0.0;
};

/// [x, onehot(action)]
Eigen::VectorXd net_input(const FeatureVector& x, ActionType action);

/// H = lambda I + sum g g^T, with its Cholesky factor kept current by rank-one
/// updates so sigma costs one triangular solve.
class UncertaintyState {
 public:
  UncertaintyState() = default;
  UncertaintyState(Eigen::Index dims, double lambda);

  void add(const Eigen::VectorXd& g);
  /// sqrt(g^T H^{-1} g)
  double sigma(const Eigen::VectorXd& g) const;

  const Eigen::MatrixXd& matrix() const { return h_; }
  double lambda() const { return lambda_; }
  Eigen::Index dims() const { return h_.rows(); }
  std::size_t updates() const { return updates_; }

 private:
  double lambda_ = 1.0;
  Eigen::MatrixXd h_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  std::size_t updates_ = 0;
};

enum class ExplorationMode { ThompsonSampling, UCB };
enum class GradientTarget { Parameters, Inputs };
std::string_view to_string(ExplorationMode m);
std::string_view to_string(GradientTarget g);
ExplorationMode exploration_from_string(std::string_view s);
GradientTarget gradient_target_from_string(std::string_view s);

struct BanditPolicyParams {
  ExplorationMode mode = ExplorationMode::ThompsonSampling;
  double beta = 0.1;
  double gamma = 0.1;
  double learning_rate = 0.01;
  int sgd_steps = 1;
  double lambda = 1.0;
  Eigen::Index hidden = 32;
  GradientTarget gradient_target = GradientTarget::Parameters;
};

void validate_params(const BanditPolicyParams& p);

struct BanditPolicy {
  RewardNet net;
  UncertaintyState state;
  BanditPolicyParams params;
  /// Current step size; halved whenever a step is rejected.
  double learning_rate = 0.01;
  std::size_t updates = 0;

  static BanditPolicy create(Eigen::Index context_dims, const BanditPolicyParams& params,
                             std::uint64_t seed);
};

struct Prediction {
  double y_hat = 0.0;
  double sigma = 0.0;
};

/// Gradient used for sigma and H: parameters or the x_t block of the input.
Eigen::VectorXd uncertainty_gradient(const RewardNet& net, const FeatureVector& x, ActionType action,
                                     GradientTarget target);

Prediction predict(const BanditPolicy& policy, const FeatureVector& x, ActionType action);

/// argmax of y_hat; ties go to the earlier action.
ActionType greedy_action(const BanditPolicy& policy, const FeatureVector& x);

/// TS adds N(0, beta^2 sigma^2) per action (three draws, always), UCB adds gamma*sigma.
/// Ties go to the earlier action.
ActionType select_action(const BanditPolicy& policy, const FeatureVector& x, Rng& rng);

int reward_from_feedback(const FeedbackEvent& event);

struct UpdateResult {
  double loss_before = 0.0;
  double loss_after = 0.0;
  int rejected_steps = 0;
};

/// sgd_steps steps on 0.5 (y_hat - reward)^2, then H += g g^T at the new parameters.
UpdateResult update(BanditPolicy& policy, const FeatureVector& x, ActionType action, int reward);

struct TraceRow {
  int round = 0;
  ActionType action = ActionType::BoostEngagement;
  ActionType greedy = ActionType::BoostEngagement;
  FeedbackKind feedback = FeedbackKind::NoClick;
  int reward = 0;
  long cumulative_reward = 0;
  /// Oracle mean reward of the chosen and of the best action.
  double expected_reward = 0.0;
  double best_expected_reward = 0.0;
  /// Cumulative selection share per action after this round.
  std::array<double, kNumActions> share{};
};

struct SimulationOptions {
  std::size_t n_accounts = 200;
  std::size_t n_reps = 10;
};

struct SimulationTrace {
  std::vector<TraceRow> rows;
  BanditPolicy policy;

  long cumulative_reward() const { return rows.empty() ? 0 : rows.back().cumulative_reward; }
  /// Share of `action` among rounds [begin, end).
  double selection_share(ActionType action, std::size_t begin, std::size_t end) const;
  /// Share of rounds in [begin, end) whose choice equals the greedy action.
  double greedy_share(std::size_t begin, std::size_t end) const;
};

/// Each round draws a random (account, rep) pair from a generated pool, builds its
/// context from the pair's alert history, selects, samples feedback from `env`,
/// and updates. Deterministic given `seed`.
SimulationTrace run_simulation(const BanditEnvSpec& env, const BanditPolicyParams& params, int rounds,
                               std::uint64_t seed, const SimulationOptions& options = {});

}  // namespace salesopt
