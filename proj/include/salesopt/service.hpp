#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include "salesopt/bandit.hpp"
#include "salesopt/config.hpp"
#include "salesopt/event_log.hpp"
#include "salesopt/pipeline.hpp"

namespace salesopt {

/// A recommendation as served, with the bandit context it was chosen under.
struct ServedRecommendation {
  Recommendation rec;
  /// Action from the optimizer's cold-start rule before the bandit had its say.
  ActionType cold_start_action = ActionType::PromoteUpsell;
  bool bandit_chosen = false;
  FeatureVector context;
};

struct RunManifest {
  int run_id = 0;
  Day day = 0;
  std::uint64_t seed = 0;
  Json config;
  std::size_t eligible = 0;
  double objective = 0.0;
  std::vector<ServedRecommendation> served;
  std::filesystem::path log_path;
};

struct FeedbackAck {
  std::uint64_t seq = 0;
  int reward = 0;
  /// False when the (rep, account, day) key was already applied to the bandit.
  bool queued = true;
  std::size_t pending = 0;
};

struct DaySeries {
  Day day = 0;
  std::size_t served = 0;
  std::array<std::size_t, kNumActions> actions{};
  std::array<std::size_t, kAllFeedbackKinds.size()> feedback{};
  long reward = 0;
};

struct MetricsSnapshot {
  std::size_t runs = 0;
  std::size_t served = 0;
  std::array<std::size_t, kNumActions> action_counts{};
  std::array<double, kNumActions> action_share{};
  /// Effective feedback per kind after last-wins deduplication, in FeedbackKind order.
  std::array<std::size_t, kAllFeedbackKinds.size()> feedback_counts{};
  long cumulative_reward = 0;
  std::size_t bandit_updates = 0;
  std::size_t pending_updates = 0;
  std::vector<DaySeries> per_day;
};

/// Pipeline orchestration over an event log. Writers (runs, feedback, flushes)
/// are exclusive; readers share the lock.
class Service {
 public:
  /// Opens `log_path`, replaying it when present. An existing log keeps the
  /// settings it was created with; a fresh log records `settings`.
  static std::unique_ptr<Service> open(const Settings& settings, const std::filesystem::path& log_path);

  /// Drains queued feedback, then plans and commits the next day.
  RunManifest run_day();
  /// Latest committed recommendations of `rep_id` in r_rank order.
  std::vector<ServedRecommendation> recommendations_for(const std::string& rep_id) const;
  FeedbackAck ingest_feedback(const FeedbackEvent& event);
  /// Applies queued feedback to the bandit in (rep, account, day) order. Returns the count.
  std::size_t flush_updates();

  MetricsSnapshot metrics() const;
  RunManifest run(int run_id) const;
  std::vector<int> run_ids() const;
  BanditPolicy policy() const;
  Settings settings() const;
  /// Day the next run will plan.
  Day next_day() const;
  /// Writes a policy snapshot record.
  void snapshot();
  const std::filesystem::path& log_path() const;

 private:
  Service(const Settings& settings, std::unique_ptr<EventLog> log);
  void replay();
  void apply_commit(const RunManifest& m);
  void apply_update(const FeedbackEvent& e, const FeatureVector& x);
  RunManifest plan_locked();
  std::size_t flush_locked();

  using Key = std::tuple<std::string, std::string, Day>;
  struct Served {
    int run_id = 0;
    std::size_t index = 0;
  };

  mutable std::shared_mutex mutex_;
  Settings settings_;
  std::unique_ptr<EventLog> log_;
  Population population_;
  std::map<std::string, std::size_t> account_pos_;
  std::map<std::string, std::size_t> rep_pos_;
  std::vector<ScoredAccount> scores_;
  BanditPolicy policy_;
  std::vector<AlertHistory> alerts_;
  std::vector<Recommendation> history_;
  std::map<int, RunManifest> runs_;
  int next_run_id_ = 1;
  Day next_day_ = 0;
  std::map<Key, Served> served_;
  std::map<Key, FeedbackEvent> pending_;
  std::map<Key, FeedbackEvent> effective_;
  std::map<Key, bool> applied_;
};

Json to_json(const ServedRecommendation& s);
Json to_json(const RunManifest& m, bool include_recommendations = true);
Json to_json(const FeedbackAck& a);
Json to_json(const MetricsSnapshot& m);

}  // namespace salesopt
