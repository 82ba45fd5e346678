#include "salesopt/domain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <cstdlib>
#include <set>

#include <fmt/format.h>

#include "salesopt/errors.hpp"
#include "salesopt/log.hpp"

namespace salesopt {

namespace {

constexpr double kAssignmentTol = 1e-6;

bool all_finite(const FeatureVector& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

std::string_view to_string(ActionType a) {
  switch (a) {
    case ActionType::BoostEngagement: return "BoostEngagement";
    case ActionType::PreventChurn: return "PreventChurn";
    case ActionType::PromoteUpsell: return "PromoteUpsell";
  }
  return "?";
}

ActionType action_from_string(std::string_view s) {
  for (ActionType a : kAllActions)
    if (to_string(a) == s) return a;
  throw InvalidArgument(fmt::format("unknown action '{}'", s));
}

std::string_view display_name(ActionType a) {
  switch (a) {
    case ActionType::BoostEngagement: return "Boost Engagement";
    case ActionType::PreventChurn: return "Prevent Churn";
    case ActionType::PromoteUpsell: return "Promote Upsell";
  }
  return "?";
}

std::string_view to_string(FeedbackKind f) {
  switch (f) {
    case FeedbackKind::DeepLinkClicked: return "DeepLinkClicked";
    case FeedbackKind::NotificationDismissed: return "NotificationDismissed";
    case FeedbackKind::NoClick: return "NoClick";
  }
  return "?";
}

FeedbackKind feedback_from_string(std::string_view s) {
  for (FeedbackKind f : kAllFeedbackKinds)
    if (to_string(f) == s) return f;
  throw InvalidArgument(fmt::format("unknown feedback kind '{}'", s));
}

int reward_for(FeedbackKind f) {
  switch (f) {
    case FeedbackKind::DeepLinkClicked: return 1;
    case FeedbackKind::NotificationDismissed: return -1;
    case FeedbackKind::NoClick: return 0;
  }
  return 0;
}

std::string_view to_string(Group g) { return g == Group::Treat ? "Treat" : "Ctrl"; }
std::string_view to_string(Period p) { return p == Period::Pre ? "Pre" : "Post"; }

Group group_from_string(std::string_view s) {
  if (s == "Treat") return Group::Treat;
  if (s == "Ctrl") return Group::Ctrl;
  throw InvalidArgument(fmt::format("unknown group '{}'", s));
}

Period period_from_string(std::string_view s) {
  if (s == "Pre") return Period::Pre;
  if (s == "Post") return Period::Post;
  throw InvalidArgument(fmt::format("unknown period '{}'", s));
}

FeatureVector Account::x_u() const {
  FeatureVector out;
  out.reserve(u_index.size());
  for (std::size_t i : u_index) out.push_back(x.at(i));
  return out;
}

FeatureVector Account::x_e() const {
  FeatureVector out;
  out.reserve(e_index.size());
  for (std::size_t i : e_index) out.push_back(x.at(i));
  return out;
}

FeedbackEvent make_feedback(std::string rep_id, std::string account_id, ActionType action,
                            FeedbackKind feedback, Day t) {
  return FeedbackEvent{std::move(rep_id), std::move(account_id), action, feedback,
                       reward_for(feedback), t};
}

FeatureVector encode_alert_history(const AlertHistory& h, Day today) {
  FeatureVector out(kAlertHistoryDims, 0.0);
  const double days = h.last_alert_day ? static_cast<double>(today - *h.last_alert_day) : 360.0;
  out[0] = std::min(days, 360.0) / 30.0;
  out[1] = h.previous_alert_count / 10.0;
  out[2 + (h.last_feedback ? 1 + static_cast<std::size_t>(*h.last_feedback) : 0)] = 1.0;
  out[6 + (h.last_category ? 1 + static_cast<std::size_t>(*h.last_category) : 0)] = 1.0;
  return out;
}

FeatureVector BanditContext::concat() const {
  FeatureVector out;
  out.reserve(size());
  out.insert(out.end(), x_a.begin(), x_a.end());
  out.insert(out.end(), x_s.begin(), x_s.end());
  out.insert(out.end(), x_r.begin(), x_r.end());
  return out;
}

Violations validate(const Account& a) {
  Violations v;
  if (a.id.empty()) v.push_back({"id", "id must be non-empty"});
  if (a.d < 0) v.push_back({"d", "d >= 0"});
  if (!all_finite(a.x)) v.push_back({"x", "features must be finite"});
  for (std::size_t i = 0; i < a.u_index.size(); ++i)
    if (a.u_index[i] >= a.x.size())
      v.push_back({fmt::format("u_index[{}]", i), "x_u must be a projection of x"});
  for (std::size_t i = 0; i < a.e_index.size(); ++i)
    if (a.e_index[i] >= a.x.size())
      v.push_back({fmt::format("e_index[{}]", i), "x_e must be a projection of x"});
  if (!all_finite(a.engagement_now)) v.push_back({"engagement_now", "values must be finite"});
  if (a.true_ite && !std::isfinite(*a.true_ite)) v.push_back({"true_ite", "must be finite"});
  return v;
}

Violations validate(const Rep& r) {
  Violations v;
  if (r.id.empty()) v.push_back({"id", "id must be non-empty"});
  if (!all_finite(r.s)) v.push_back({"s", "features must be finite"});
  return v;
}

Violations validate(const std::vector<Rep>& reps) {
  Violations v;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    for (auto& e : validate(reps[i])) v.push_back({fmt::format("[{}].{}", i, e.path), e.message});
    if (reps[i].s.size() != reps.front().s.size())
      v.push_back({fmt::format("[{}].s", i), "rep feature length fixed across reps"});
  }
  return v;
}

Violations validate(const ScoredAccount& s) {
  Violations v;
  if (!(s.y_u >= 0.0 && s.y_u <= 100.0)) v.push_back({"y_u", "y_u in [0,100]"});
  if (!(s.y_e >= 0.0 && s.y_e <= 100.0)) v.push_back({"y_e", "y_e in [0,100]"});
  if (s.delta_e.empty()) {
    v.push_back({"delta_e", "at least one engagement metric"});
  } else {
    double mx = 0.0;
    for (double d : s.delta_e) mx = std::max(mx, std::abs(d));
    if (std::abs(mx - s.y_e_raw) > 1e-12 * std::max(1.0, mx))
      v.push_back({"y_e_raw", "y_e_raw = max |delta_e|"});
  }
  return v;
}

Violations validate(const AssignmentMatrix& m) {
  Violations v;
  if (static_cast<std::size_t>(m.entries.rows()) != m.account_index.size() ||
      static_cast<std::size_t>(m.entries.cols()) != m.rep_index.size())
    v.push_back({"entries", "shape must match account/rep index"});
  for (Eigen::Index i = 0; i < m.entries.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.entries.cols(); ++j) {
      const double a = m.entries(i, j);
      if (!(a >= -kAssignmentTol && a <= 1.0 + kAssignmentTol))
        v.push_back({fmt::format("entries[{}][{}]", i, j), "entry in [0,1]"});
    }
    if (m.entries.row(i).sum() > 1.0 + kAssignmentTol)
      v.push_back({fmt::format("entries[{}]", i), "row sum <= 1"});
  }
  return v;
}

Violations validate(const Recommendation& r) {
  Violations v;
  if (r.g_rank < 1) v.push_back({"g_rank", "g_rank positive"});
  if (r.r_rank < 1) v.push_back({"r_rank", "r_rank positive"});
  if (r.a_value < 0.5) v.push_back({"a_value", "a_value >= 0.5"});
  return v;
}

Violations validate(const std::vector<Recommendation>& recs) {
  Violations v;
  std::vector<int> g;
  std::map<std::string, std::vector<int>> per_rep;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    for (auto& e : validate(recs[i])) v.push_back({fmt::format("[{}].{}", i, e.path), e.message});
    g.push_back(recs[i].g_rank);
    per_rep[recs[i].rep_id].push_back(recs[i].r_rank);
  }
  auto contiguous = [](std::vector<int> ranks) {
    std::sort(ranks.begin(), ranks.end());
    for (std::size_t i = 0; i < ranks.size(); ++i)
      if (ranks[i] != static_cast<int>(i) + 1) return false;
    return true;
  };
  if (!contiguous(g)) v.push_back({"g_rank", "g_rank is 1..N contiguous"});
  for (auto& [rep, ranks] : per_rep)
    if (!contiguous(ranks)) v.push_back({fmt::format("r_rank[{}]", rep), "r_rank is 1..n contiguous"});
  return v;
}

Violations validate(const FeedbackEvent& e) {
  Violations v;
  if (e.rep_id.empty()) v.push_back({"rep_id", "must not be empty"});
  if (e.account_id.empty()) v.push_back({"account_id", "must not be empty"});
  if (e.t < 0) v.push_back({"t", "must be >= 0"});
  if (e.reward != reward_for(e.feedback))
    v.push_back({"reward", "reward must match feedback kind"});
  return v;
}

Violations validate(const BanditContext& c, std::size_t expected_size) {
  Violations v;
  if (c.size() != expected_size)
    v.push_back({"x_t", fmt::format("context length {} != {}", c.size(), expected_size)});
  if (c.x_r.size() != kAlertHistoryDims) v.push_back({"x_r", "alert-history layout is fixed"});
  if (!all_finite(c.x_a) || !all_finite(c.x_s) || !all_finite(c.x_r))
    v.push_back({"x_t", "features must be finite"});
  return v;
}

Violations validate(const std::vector<PanelObservation>& panel) {
  Violations v;
  std::set<std::pair<std::string, int>> seen;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    if (!seen.insert({panel[i].unit_id, panel[i].t}).second)
      v.push_back({fmt::format("[{}]", i), "each (unit, period) appears at most once"});
    if (!std::isfinite(panel[i].outcome))
      v.push_back({fmt::format("[{}].outcome", i), "outcome must be finite"});
  }
  return v;
}

}  // namespace salesopt

namespace salesopt {

bool warnings_enabled() {
  static const bool enabled = std::getenv("SALESOPT_QUIET") == nullptr;
  return enabled;
}

}  // namespace salesopt
