#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace salesopt {

/// Dense standardized feature values. Categorical inputs are one-hot encoded
/// before they reach any of these types.
using FeatureVector = std::vector<double>;

/// Integer day index within a run. Never wall-clock.
using Day = int;

enum class ActionType { BoostEngagement, PreventChurn, PromoteUpsell };
inline constexpr std::array<ActionType, 3> kAllActions{
    ActionType::BoostEngagement, ActionType::PreventChurn, ActionType::PromoteUpsell};
inline constexpr std::size_t kNumActions = kAllActions.size();

std::string_view to_string(ActionType a);
ActionType action_from_string(std::string_view s);
/// Human-facing label, e.g. "Promote Upsell".
std::string_view display_name(ActionType a);

enum class FeedbackKind { DeepLinkClicked, NotificationDismissed, NoClick };
inline constexpr std::array<FeedbackKind, 3> kAllFeedbackKinds{
    FeedbackKind::DeepLinkClicked, FeedbackKind::NotificationDismissed, FeedbackKind::NoClick};

std::string_view to_string(FeedbackKind f);
FeedbackKind feedback_from_string(std::string_view s);

/// +1 for a click, -1 for a dismissal, 0 when the alert was ignored.
int reward_for(FeedbackKind f);

struct Account {
  std::string id;
  FeatureVector x;
  /// Positions of the pre-treatment covariates inside x.
  std::vector<std::size_t> u_index;
  /// Positions of the engagement features inside x.
  std::vector<std::size_t> e_index;
  /// Current value of each engagement metric (pu on 0-100, pa on 0-1, ...).
  FeatureVector engagement_now;
  /// Days until the renewal target close date.
  int d = 0;
  /// Structural treatment effect; only set by the synthetic generator.
  std::optional<double> true_ite;

  FeatureVector x_u() const;
  FeatureVector x_e() const;
};

struct Rep {
  std::string id;
  FeatureVector s;
};

struct ScoredAccount {
  std::string account_id;
  int d = 0;
  double y_u_raw = 0.0;
  FeatureVector delta_e;
  double y_e_raw = 0.0;
  double y_u = 0.0;  // normalized to [0, 100]
  double y_e = 0.0;  // normalized to [0, 100]
};

struct AssignmentMatrix {
  Eigen::MatrixXd entries;  // accounts x reps
  std::vector<std::string> account_index;
  std::vector<std::string> rep_index;
};

struct Recommendation {
  std::string account_id;
  std::string rep_id;
  ActionType action = ActionType::PromoteUpsell;
  int g_rank = 0;
  int r_rank = 0;
  double a_value = 0.0;
  std::string explanation;
  Day created_at = 0;
};

struct FeedbackEvent {
  std::string rep_id;
  std::string account_id;
  ActionType action = ActionType::PromoteUpsell;
  FeedbackKind feedback = FeedbackKind::NoClick;
  int reward = 0;
  Day t = 0;
};

FeedbackEvent make_feedback(std::string rep_id, std::string account_id, ActionType action,
                            FeedbackKind feedback, Day t);

/// Alert history of one account as seen by the bandit.
struct AlertHistory {
  std::optional<Day> last_alert_day;
  int previous_alert_count = 0;
  std::optional<FeedbackKind> last_feedback;
  std::optional<ActionType> last_category;
};

/// Layout: [days since last alert / 30 (capped at 12, 12 if never),
///          previous alert count / 10,
///          one-hot last feedback {none, click, dismiss, no-click},
///          one-hot last category {none, boost, churn, upsell}]
inline constexpr std::size_t kAlertHistoryDims = 10;
FeatureVector encode_alert_history(const AlertHistory& h, Day today);

struct BanditContext {
  FeatureVector x_a;
  FeatureVector x_s;
  FeatureVector x_r;

  /// [x_a, x_s, x_r]
  FeatureVector concat() const;
  std::size_t size() const { return x_a.size() + x_s.size() + x_r.size(); }
};

enum class Group { Treat, Ctrl };
enum class Period { Pre, Post };
std::string_view to_string(Group g);
std::string_view to_string(Period p);
Group group_from_string(std::string_view s);
Period period_from_string(std::string_view s);

struct PanelObservation {
  std::string unit_id;
  Group group = Group::Ctrl;
  Period period = Period::Pre;
  /// Time point; panels with a single pre and post period use 0 and 1.
  int t = 0;
  double outcome = 0.0;
  FeatureVector covariates;
};

struct Violation {
  std::string path;
  std::string message;
  bool operator==(const Violation&) const = default;
};
using Violations = std::vector<Violation>;

Violations validate(const Account& a);
Violations validate(const Rep& r);
Violations validate(const std::vector<Rep>& reps);
Violations validate(const ScoredAccount& s);
Violations validate(const AssignmentMatrix& m);
Violations validate(const Recommendation& r);
Violations validate(const std::vector<Recommendation>& recs);
Violations validate(const FeedbackEvent& e);
Violations validate(const BanditContext& c, std::size_t expected_size);
Violations validate(const std::vector<PanelObservation>& panel);

}  // namespace salesopt
