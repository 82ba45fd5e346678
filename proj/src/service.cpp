#include "salesopt/service.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "salesopt/errors.hpp"
#include "salesopt/explain.hpp"
#include "salesopt/log.hpp"

namespace salesopt {

namespace {

constexpr std::uint64_t kRunStream = 0x72756e0000000000ULL;

Json settings_json(const Settings& s) {
  Json j = Json::object();
  for (const auto& [k, v] : dump_config(s)) j[k] = v;
  return j;
}

Settings settings_from_json(const Json& j, const Settings& runtime) {
  std::map<std::string, std::string> values;
  for (const auto& [k, v] : j.items()) values[k] = v.get<std::string>();
  Settings s = apply_config(values);
  // Host, port and text-generation endpoint describe this process, not the log.
  s.service.host = runtime.service.host;
  s.service.port = runtime.service.port;
  s.textgen = runtime.textgen;
  s.textgen_client = runtime.textgen_client;
  return s;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

std::unique_ptr<Service> Service::open(const Settings& settings, const std::filesystem::path& log_path) {
  auto log = std::make_unique<EventLog>(log_path);
  Settings effective = settings;
  if (!log->records().empty()) {
    const EventRecord& first = log->records().front();
    if (first.kind != "init")
      throw InvalidArgument(fmt::format("{}: first record must be 'init', found '{}'", log_path.string(), first.kind));
    effective = settings_from_json(first.payload.at("settings"), settings);
  } else {
    try {
      validate_config(settings.gen);
      validate_params(settings.optimizer);
      validate_params(settings.bandit);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    log->append("init", 0, Json{{"settings", settings_json(settings)}});
  }
  std::unique_ptr<Service> s(new Service(effective, std::move(log)));
  s->replay();
  return s;
}

Service::Service(const Settings& settings, std::unique_ptr<EventLog> log)
    : settings_(settings), log_(std::move(log)) {
  population_ = generate_population(settings_.gen);
  for (std::size_t i = 0; i < population_.accounts.size(); ++i) account_pos_[population_.accounts[i].id] = i;
  for (std::size_t i = 0; i < population_.reps.size(); ++i) rep_pos_[population_.reps[i].id] = i;
  const PredictionModels models = train_models(settings_.gen, population_, settings_.training);
  scores_ = score_accounts(models, population_.accounts);
  const auto dims = static_cast<Eigen::Index>(kBanditAccountDims + settings_.gen.rep_dims + kAlertHistoryDims);
  policy_ = BanditPolicy::create(dims, settings_.bandit, settings_.gen.seed);
  alerts_.assign(population_.accounts.size(), AlertHistory{});
}

void Service::replay() {
  std::optional<RunManifest> open_run;
  for (const EventRecord& r : log_->records()) {
    if (r.kind == "init") continue;
    if (r.kind == "run_begin") {
      if (open_run) warn("run {} has no commit record; ignoring it", open_run->run_id);
      open_run = RunManifest{};
      open_run->run_id = r.payload.at("run_id").get<int>();
      open_run->day = r.day;
      next_run_id_ = std::max(next_run_id_, open_run->run_id + 1);
    } else if (r.kind == "recommendation") {
      if (!open_run || r.payload.at("run_id").get<int>() != open_run->run_id)
        throw InvalidArgument(fmt::format("record {}: recommendation outside its run", r.seq));
      const Json& p = r.payload;
      ServedRecommendation s;
      s.rec = p.at("recommendation").get<Recommendation>();
      s.cold_start_action = action_from_string(p.at("cold_start_action").get<std::string>());
      s.bandit_chosen = p.at("bandit_chosen").get<bool>();
      s.context = p.at("context").get<FeatureVector>();
      open_run->served.push_back(std::move(s));
    } else if (r.kind == "run_commit") {
      if (!open_run || r.payload.at("run_id").get<int>() != open_run->run_id)
        throw InvalidArgument(fmt::format("record {}: commit without a matching run", r.seq));
      open_run->eligible = r.payload.at("eligible").get<std::size_t>();
      open_run->objective = r.payload.at("objective").get<double>();
      if (r.payload.at("count").get<std::size_t>() != open_run->served.size())
        throw InvalidArgument(fmt::format("record {}: commit count does not match its recommendations", r.seq));
      apply_commit(*open_run);
      open_run.reset();
    } else if (r.kind == "feedback") {
      const auto ev = r.payload.get<FeedbackEvent>();
      const Key key{ev.rep_id, ev.account_id, ev.t};
      effective_[key] = ev;
      if (!applied_.count(key)) pending_[key] = ev;
    } else if (r.kind == "update") {
      const auto ev = r.payload.at("event").get<FeedbackEvent>();
      const Key key{ev.rep_id, ev.account_id, ev.t};
      apply_update(ev, r.payload.at("context").get<FeatureVector>());
      applied_[key] = true;
      pending_.erase(key);
    } else if (r.kind == "snapshot") {
      const auto theta = r.payload.at("theta").get<std::vector<double>>();
      const Eigen::VectorXd live = policy_.net.parameters();
      double diff = static_cast<std::size_t>(live.size()) == theta.size() ? 0.0 : INFINITY;
      for (Eigen::Index i = 0; std::isfinite(diff) && i < live.size(); ++i)
        diff = std::max(diff, std::abs(live[i] - theta[static_cast<std::size_t>(i)]));
      if (diff > 1e-10) warn("record {}: replayed parameters differ from snapshot by {}", r.seq, diff);
    } else {
      throw InvalidArgument(fmt::format("record {}: unknown kind '{}'", r.seq, r.kind));
    }
  }
  if (open_run) warn("run {} has no commit record; ignoring it", open_run->run_id);
}

void Service::apply_commit(const RunManifest& m) {
  RunManifest stored = m;
  stored.seed = settings_.gen.seed;
  stored.config = settings_json(settings_);
  stored.log_path = log_->path();
  for (std::size_t i = 0; i < m.served.size(); ++i) {
    const Recommendation& rec = m.served[i].rec;
    history_.push_back(rec);
    AlertHistory& h = alerts_.at(account_pos_.at(rec.account_id));
    h.last_alert_day = m.day;
    ++h.previous_alert_count;
    h.last_category = rec.action;
    served_[Key{rec.rep_id, rec.account_id, m.day}] = Served{m.run_id, i};
  }
  runs_[m.run_id] = std::move(stored);
  next_run_id_ = std::max(next_run_id_, m.run_id + 1);
  next_day_ = m.day + 1;
}

void Service::apply_update(const FeedbackEvent& e, const FeatureVector& x) {
  update(policy_, x, e.action, reward_for(e.feedback));
  alerts_.at(account_pos_.at(e.account_id)).last_feedback = e.feedback;
}

RunManifest Service::plan_locked() {
  RunManifest m;
  m.run_id = next_run_id_;
  m.day = next_day_;
  const DailyPlan plan = plan_day(scores_, population_.reps, history_, settings_.optimizer, m.day);
  m.eligible = plan.pool.size();
  m.objective = plan.objective;

  std::map<std::string, const ScoredAccount*> by_id;
  for (const auto& s : scores_) by_id[s.account_id] = &s;
  const bool use_bandit = policy_.updates >= static_cast<std::size_t>(settings_.service.warmup_updates);
  Rng rng(settings_.gen.seed, kRunStream + static_cast<std::uint64_t>(m.day));

  for (const Recommendation& base : plan.recommendations) {
    ServedRecommendation s;
    s.rec = base;
    s.rec.created_at = m.day;
    s.cold_start_action = base.action;
    const Account& acct = population_.accounts.at(account_pos_.at(base.account_id));
    const Rep& rep = population_.reps.at(rep_pos_.at(base.rep_id));
    s.context = make_context(acct, rep, alerts_.at(account_pos_.at(base.account_id)), m.day).concat();
    if (use_bandit) {
      s.rec.action = select_action(policy_, s.context, rng);
      s.bandit_chosen = true;
    }
    const ScoredAccount& sc = *by_id.at(base.account_id);
    TemplateSlots slots;
    slots.d = std::max(0, acct.d - m.day);
    slots.product = settings_.service.product;
    slots.y = acct.engagement_now.empty() ? 0.0 : round2(acct.engagement_now[0]);
    if (s.rec.action == ActionType::BoostEngagement)
      slots.delta_y = sc.delta_e.empty() ? 0.0 : round2(acct.engagement_now[0] + sc.delta_e[0]);
    else
      slots.delta_y = round2(sc.y_u_raw);
    s.rec.explanation = render_template(alert_kind_for(s.rec.action), slots);
    m.served.push_back(std::move(s));
  }
  return m;
}

RunManifest Service::run_day() {
  std::unique_lock lock(mutex_);
  flush_locked();
  RunManifest m = plan_locked();
  std::vector<EventRecord> batch;
  batch.push_back({0, "run_begin", m.day, Json{{"run_id", m.run_id}}});
  for (const auto& s : m.served)
    batch.push_back({0, "recommendation", m.day,
                     Json{{"run_id", m.run_id},
                          {"recommendation", s.rec},
                          {"cold_start_action", std::string(to_string(s.cold_start_action))},
                          {"bandit_chosen", s.bandit_chosen},
                          {"context", s.context}}});
  batch.push_back({0, "run_commit", m.day,
                   Json{{"run_id", m.run_id}, {"eligible", m.eligible}, {"objective", m.objective},
                        {"count", m.served.size()}}});
  log_->append(std::move(batch));
  apply_commit(m);
  const int every = settings_.service.snapshot_every;
  if (every > 0 && m.run_id % every == 0) log_->append("snapshot", m.day, policy_to_json(policy_));
  return runs_.at(m.run_id);
}

std::vector<ServedRecommendation> Service::recommendations_for(const std::string& rep_id) const {
  std::shared_lock lock(mutex_);
  if (!rep_pos_.count(rep_id)) throw NotFound(fmt::format("unknown rep '{}'", rep_id));
  std::vector<ServedRecommendation> out;
  if (runs_.empty()) return out;
  for (const auto& s : runs_.rbegin()->second.served)
    if (s.rec.rep_id == rep_id) out.push_back(s);
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.rec.r_rank < b.rec.r_rank; });
  return out;
}

FeedbackAck Service::ingest_feedback(const FeedbackEvent& event) {
  const Violations v = validate(event);
  if (!v.empty()) throw InvalidArgument(fmt::format("{}: {}", v.front().path, v.front().message));
  std::unique_lock lock(mutex_);
  const Key key{event.rep_id, event.account_id, event.t};
  const auto it = served_.find(key);
  if (it == served_.end())
    throw NotFound(fmt::format("no recommendation served to rep '{}' for account '{}' on day {}", event.rep_id,
                               event.account_id, event.t));
  const ActionType served_action = runs_.at(it->second.run_id).served.at(it->second.index).rec.action;
  if (served_action != event.action)
    throw NotFound(fmt::format("account '{}' was served {} on day {}, not {}", event.account_id,
                               to_string(served_action), event.t, to_string(event.action)));
  FeedbackEvent ev = event;
  ev.reward = reward_for(ev.feedback);
  const EventRecord rec = log_->append("feedback", ev.t, Json(ev));
  effective_[key] = ev;
  FeedbackAck ack;
  ack.seq = rec.seq;
  ack.reward = ev.reward;
  ack.queued = !applied_.count(key);
  if (ack.queued) pending_[key] = ev;
  ack.pending = pending_.size();
  return ack;
}

std::size_t Service::flush_updates() {
  std::unique_lock lock(mutex_);
  return flush_locked();
}

std::size_t Service::flush_locked() {
  if (pending_.empty()) return 0;
  std::vector<EventRecord> batch;
  std::vector<std::pair<FeedbackEvent, const FeatureVector*>> work;
  for (const auto& [key, ev] : pending_) {
    const Served& s = served_.at(key);
    const FeatureVector& x = runs_.at(s.run_id).served.at(s.index).context;
    batch.push_back({0, "update", ev.t, Json{{"event", ev}, {"context", x}}});
    work.emplace_back(ev, &x);
  }
  log_->append(std::move(batch));
  for (const auto& [ev, x] : work) {
    apply_update(ev, *x);
    applied_[Key{ev.rep_id, ev.account_id, ev.t}] = true;
  }
  const std::size_t n = pending_.size();
  pending_.clear();
  return n;
}

MetricsSnapshot Service::metrics() const {
  std::shared_lock lock(mutex_);
  MetricsSnapshot m;
  m.runs = runs_.size();
  std::map<Day, DaySeries> days;
  for (const auto& [id, run] : runs_) {
    DaySeries& d = days[run.day];
    d.day = run.day;
    for (const auto& s : run.served) {
      const auto a = static_cast<std::size_t>(s.rec.action);
      ++d.actions[a];
      ++d.served;
      ++m.action_counts[a];
      ++m.served;
    }
  }
  for (const auto& [key, ev] : effective_) {
    const auto f = static_cast<std::size_t>(ev.feedback);
    ++m.feedback_counts[f];
    m.cumulative_reward += ev.reward;
    DaySeries& d = days[ev.t];
    d.day = ev.t;
    ++d.feedback[f];
    d.reward += ev.reward;
  }
  for (std::size_t a = 0; a < kNumActions; ++a)
    m.action_share[a] = m.served ? static_cast<double>(m.action_counts[a]) / static_cast<double>(m.served) : 0.0;
  m.bandit_updates = policy_.updates;
  m.pending_updates = pending_.size();
  for (auto& [day, d] : days) m.per_day.push_back(d);
  return m;
}

RunManifest Service::run(int run_id) const {
  std::shared_lock lock(mutex_);
  const auto it = runs_.find(run_id);
  if (it == runs_.end()) throw NotFound(fmt::format("unknown run {}", run_id));
  return it->second;
}

std::vector<int> Service::run_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<int> out;
  for (const auto& [id, run] : runs_) out.push_back(id);
  return out;
}

BanditPolicy Service::policy() const {
  std::shared_lock lock(mutex_);
  return policy_;
}

Settings Service::settings() const {
  std::shared_lock lock(mutex_);
  return settings_;
}

Day Service::next_day() const {
  std::shared_lock lock(mutex_);
  return next_day_;
}

void Service::snapshot() {
  std::unique_lock lock(mutex_);
  log_->append("snapshot", next_day_, policy_to_json(policy_));
}

const std::filesystem::path& Service::log_path() const { return log_->path(); }

Json to_json(const ServedRecommendation& s) {
  Json j = s.rec;
  j["cold_start_action"] = std::string(to_string(s.cold_start_action));
  j["bandit_chosen"] = s.bandit_chosen;
  return j;
}

Json to_json(const RunManifest& m, bool include_recommendations) {
  Json j{{"run_id", m.run_id},     {"day", m.day},
         {"seed", m.seed},         {"config", m.config},
         {"eligible", m.eligible}, {"objective", m.objective},
         {"count", m.served.size()}, {"log_path", m.log_path.string()}};
  if (include_recommendations) {
    Json recs = Json::array();
    for (const auto& s : m.served) recs.push_back(to_json(s));
    j["recommendations"] = std::move(recs);
  }
  return j;
}

Json to_json(const FeedbackAck& a) {
  return Json{{"seq", a.seq}, {"reward", a.reward}, {"queued", a.queued}, {"pending", a.pending}};
}

namespace {

Json action_map(const auto& values) {
  Json j = Json::object();
  for (ActionType a : kAllActions) j[std::string(to_string(a))] = values[static_cast<std::size_t>(a)];
  return j;
}

Json feedback_map(const auto& values) {
  Json j = Json::object();
  for (FeedbackKind f : kAllFeedbackKinds) j[std::string(to_string(f))] = values[static_cast<std::size_t>(f)];
  return j;
}

}  // namespace

Json to_json(const MetricsSnapshot& m) {
  Json days = Json::array();
  for (const auto& d : m.per_day) {
    std::array<double, kNumActions> share{};
    for (std::size_t a = 0; a < kNumActions; ++a)
      share[a] = d.served ? static_cast<double>(d.actions[a]) / static_cast<double>(d.served) : 0.0;
    days.push_back(Json{{"day", d.day},
                        {"served", d.served},
                        {"action_counts", action_map(d.actions)},
                        {"action_share", action_map(share)},
                        {"feedback_counts", feedback_map(d.feedback)},
                        {"reward", d.reward}});
  }
  return Json{{"runs", m.runs},
              {"served", m.served},
              {"action_counts", action_map(m.action_counts)},
              {"action_share", action_map(m.action_share)},
              {"feedback_counts", feedback_map(m.feedback_counts)},
              {"cumulative_reward", m.cumulative_reward},
              {"bandit_updates", m.bandit_updates},
              {"pending_updates", m.pending_updates},
              {"per_day", std::move(days)}};
}

}  // namespace salesopt
