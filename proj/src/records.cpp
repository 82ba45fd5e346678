#include "salesopt/records.hpp"

#include <fstream>

#include <fmt/format.h>

#include "salesopt/errors.hpp"

namespace salesopt {

namespace {

template <typename T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

template <typename T>
std::optional<T> get_opt(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

Json vec(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace

void to_json(Json& j, const Account& v) {
  j = Json{{"id", v.id},         {"x", v.x},
           {"u_index", v.u_index}, {"e_index", v.e_index},
           {"engagement_now", v.engagement_now}, {"d", v.d},
           {"true_ite", opt(v.true_ite)}};
}

void from_json(const Json& j, Account& v) {
  v.id = j.at("id").get<std::string>();
  v.x = j.at("x").get<FeatureVector>();
  v.u_index = j.at("u_index").get<std::vector<std::size_t>>();
  v.e_index = j.at("e_index").get<std::vector<std::size_t>>();
  v.engagement_now = j.value("engagement_now", FeatureVector{});
  v.d = j.at("d").get<int>();
  v.true_ite = get_opt<double>(j, "true_ite");
}

void to_json(Json& j, const Rep& v) { j = Json{{"id", v.id}, {"s", v.s}}; }

void from_json(const Json& j, Rep& v) {
  v.id = j.at("id").get<std::string>();
  v.s = j.at("s").get<FeatureVector>();
}

void to_json(Json& j, const ScoredAccount& v) {
  j = Json{{"account_id", v.account_id}, {"d", v.d},          {"y_u_raw", v.y_u_raw}, {"delta_e", v.delta_e},
           {"y_e_raw", v.y_e_raw},       {"y_u", v.y_u},      {"y_e", v.y_e}};
}

void from_json(const Json& j, ScoredAccount& v) {
  v.account_id = j.at("account_id").get<std::string>();
  v.d = j.at("d").get<int>();
  v.y_u_raw = j.at("y_u_raw").get<double>();
  v.delta_e = j.at("delta_e").get<FeatureVector>();
  v.y_e_raw = j.at("y_e_raw").get<double>();
  v.y_u = j.at("y_u").get<double>();
  v.y_e = j.at("y_e").get<double>();
}

void to_json(Json& j, const AssignmentMatrix& v) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < v.entries.rows(); ++i) rows.push_back(vec(v.entries.row(i).transpose()));
  j = Json{{"account_index", v.account_index}, {"rep_index", v.rep_index}, {"entries", rows}};
}

void from_json(const Json& j, AssignmentMatrix& v) {
  v.account_index = j.at("account_index").get<std::vector<std::string>>();
  v.rep_index = j.at("rep_index").get<std::vector<std::string>>();
  const auto& rows = j.at("entries");
  v.entries.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(v.rep_index.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i].get<std::vector<double>>();
    if (r.size() != v.rep_index.size()) throw InvalidArgument("assignment row length does not match rep_index");
    for (std::size_t k = 0; k < r.size(); ++k)
      v.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = r[k];
  }
}

void to_json(Json& j, const Recommendation& v) {
  j = Json{{"account_id", v.account_id},
           {"rep_id", v.rep_id},
           {"action", std::string(to_string(v.action))},
           {"g_rank", v.g_rank},
           {"r_rank", v.r_rank},
           {"a_value", v.a_value},
           {"explanation", v.explanation},
           {"created_at", v.created_at}};
}

void from_json(const Json& j, Recommendation& v) {
  v.account_id = j.at("account_id").get<std::string>();
  v.rep_id = j.at("rep_id").get<std::string>();
  v.action = action_from_string(j.at("action").get<std::string>());
  v.g_rank = j.at("g_rank").get<int>();
  v.r_rank = j.at("r_rank").get<int>();
  v.a_value = j.at("a_value").get<double>();
  v.explanation = j.value("explanation", std::string{});
  v.created_at = j.at("created_at").get<Day>();
}

void to_json(Json& j, const FeedbackEvent& v) {
  j = Json{{"rep_id", v.rep_id},
           {"account_id", v.account_id},
           {"action", std::string(to_string(v.action))},
           {"feedback", std::string(to_string(v.feedback))},
           {"reward", v.reward},
           {"t", v.t}};
}

void from_json(const Json& j, FeedbackEvent& v) {
  v = make_feedback(j.at("rep_id").get<std::string>(), j.at("account_id").get<std::string>(),
                    action_from_string(j.at("action").get<std::string>()),
                    feedback_from_string(j.at("feedback").get<std::string>()), j.at("t").get<Day>());
  if (j.contains("reward") && !j.at("reward").is_null() && j.at("reward").get<int>() != v.reward)
    throw InvalidArgument(fmt::format("reward {} does not match feedback {}", j.at("reward").get<int>(),
                                      to_string(v.feedback)));
}

void to_json(Json& j, const AlertHistory& v) {
  j = Json{{"last_alert_day", opt(v.last_alert_day)},
           {"previous_alert_count", v.previous_alert_count},
           {"last_feedback", v.last_feedback ? Json(std::string(to_string(*v.last_feedback))) : Json(nullptr)},
           {"last_category", v.last_category ? Json(std::string(to_string(*v.last_category))) : Json(nullptr)}};
}

void from_json(const Json& j, AlertHistory& v) {
  v.last_alert_day = get_opt<Day>(j, "last_alert_day");
  v.previous_alert_count = j.at("previous_alert_count").get<int>();
  const auto fb = get_opt<std::string>(j, "last_feedback");
  v.last_feedback = fb ? std::optional(feedback_from_string(*fb)) : std::nullopt;
  const auto cat = get_opt<std::string>(j, "last_category");
  v.last_category = cat ? std::optional(action_from_string(*cat)) : std::nullopt;
}

void to_json(Json& j, const BanditContext& v) { j = Json{{"x_a", v.x_a}, {"x_s", v.x_s}, {"x_r", v.x_r}}; }

void from_json(const Json& j, BanditContext& v) {
  v.x_a = j.at("x_a").get<FeatureVector>();
  v.x_s = j.at("x_s").get<FeatureVector>();
  v.x_r = j.at("x_r").get<FeatureVector>();
}

void to_json(Json& j, const PanelObservation& v) {
  j = Json{{"unit_id", v.unit_id},
           {"group", std::string(to_string(v.group))},
           {"period", std::string(to_string(v.period))},
           {"t", v.t},
           {"outcome", v.outcome},
           {"covariates", v.covariates}};
}

void from_json(const Json& j, PanelObservation& v) {
  v.unit_id = j.at("unit_id").get<std::string>();
  v.group = group_from_string(j.at("group").get<std::string>());
  v.period = period_from_string(j.at("period").get<std::string>());
  v.t = j.at("t").get<int>();
  v.outcome = j.at("outcome").get<double>();
  v.covariates = j.value("covariates", FeatureVector{});
}

void to_json(Json& j, const BaseRegressor& v) {
  if (v.kind() == RegressorKind::Ridge) {
    j = Json{{"kind", "ridge"}, {"intercept", v.intercept()}, {"coefficients", vec(v.coefficients())}};
    return;
  }
  Json stumps = Json::array();
  for (const auto& s : v.stumps())
    stumps.push_back({{"feature", s.feature}, {"threshold", s.threshold}, {"left", s.left}, {"right", s.right}});
  j = Json{{"kind", "boosted_stumps"},
           {"intercept", v.intercept()},
           {"learning_rate", v.learning_rate()},
           {"dims", v.dims()},
           {"stumps", stumps}};
}

void to_json(Json& j, const PropensityModel& v) {
  j = Json{{"intercept", v.intercept()},
           {"weights", vec(v.weights())},
           {"centre", vec(v.centre().transpose())},
           {"iterations", v.iterations()}};
}

void to_json(Json& j, const UpliftModel& v) {
  j = Json{{"kind", std::string(to_string(v.kind()))}, {"dims", v.dims()}};
  auto put = [&](const char* key, const std::optional<BaseRegressor>& r) {
    if (r) j[key] = *r;
  };
  put("single", v.single());
  put("control_model", v.control_model());
  put("treated_model", v.treated_model());
  put("tau_control", v.tau_control());
  put("tau_treated", v.tau_treated());
  put("final_model", v.final_model());
  if (v.propensity()) j["propensity"] = *v.propensity();
  if (v.kind() == LearnerKind::S) j["s_interactions"] = v.s_interactions();
  if (v.kind() == LearnerKind::X) j["x_weighting"] = v.x_weighting() == XWeighting::Half ? "half" : "propensity";
  if (v.kind() == LearnerKind::DR) j["clipped_propensities"] = v.clipped_propensities();
}

void to_json(Json& j, const Forecaster& v) {
  j = Json{{"target", std::string(to_string(v.target()))}, {"base", v.base()}};
}

void to_json(Json& j, const DecileRow& v) {
  j = Json{{"decile", v.decile},       {"n", v.n},
           {"n_treated", v.n_treated}, {"n_control", v.n_control},
           {"mean_score", v.mean_score}, {"uplift", opt(v.uplift)}};
}

void to_json(Json& j, const MatchedPair& v) {
  j = Json{{"account_id", v.account_id}, {"rep_id", v.rep_id}, {"a_value", v.a_value},
           {"coefficient", v.coefficient}, {"g_rank", v.g_rank}, {"r_rank", v.r_rank}};
}

void to_json(Json& j, const TraceRow& v) {
  Json share = Json::object();
  for (std::size_t k = 0; k < kNumActions; ++k) share[std::string(to_string(kAllActions[k]))] = v.share[k];
  j = Json{{"round", v.round},
           {"action", std::string(to_string(v.action))},
           {"greedy", std::string(to_string(v.greedy))},
           {"feedback", std::string(to_string(v.feedback))},
           {"reward", v.reward},
           {"cumulative_reward", v.cumulative_reward},
           {"expected_reward", v.expected_reward},
           {"best_expected_reward", v.best_expected_reward},
           {"share", share}};
}

void to_json(Json& j, const DidResult& v) {
  auto num = [](double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); };
  j = Json{{"tau_hat", v.tau_hat},       {"rte", opt(v.rte)},         {"treat_pre", v.treat_pre},
           {"treat_post", v.treat_post}, {"ctrl_pre", v.ctrl_pre},   {"ctrl_post", v.ctrl_post},
           {"std_error", num(v.std_error)}, {"t_stat", num(v.t_stat)}, {"p_value", num(v.p_value)},
           {"ci_low", num(v.ci_low)},    {"ci_high", num(v.ci_high)}, {"n", v.n}};
}

void to_json(Json& j, const CemResult& v) {
  j = Json{{"matched_treat", v.matched_treat.size()},
           {"matched_ctrl", v.matched_ctrl.size()},
           {"strata", v.strata},
           {"dropped_treat", v.dropped_treat},
           {"dropped_ctrl", v.dropped_ctrl},
           {"empty", v.empty},
           {"weights", v.weights}};
}

void to_json(Json& j, const PlaceboResult& v) {
  j = Json{{"cuts", v.cuts},
           {"results", v.results},
           {"alpha", v.alpha},
           {"corrected_alpha", v.corrected_alpha},
           {"parallel_trends_plausible", v.parallel_trends_plausible}};
}

void to_json(Json& j, const PrecisionMetrics& v) {
  j = Json{{"p_ups", opt(v.p_ups)},         {"p_ch", opt(v.p_ch)},
           {"p_rec", opt(v.p_rec)},         {"p_low", opt(v.p_low)},
           {"upsell_recs", v.upsell_recs},  {"churn_recs", v.churn_recs},
           {"low_recs", v.low_recs}};
}

void to_json(Json& j, const VariantReport& v) {
  Json actions = Json::object();
  for (std::size_t k = 0; k < kNumActions; ++k) actions[std::string(to_string(kAllActions[k]))] = v.action_counts[k];
  j = Json{{"variant", std::string(to_string(v.variant))},
           {"metrics", v.metrics},
           {"bookings", v.bookings},
           {"bookings_rank", v.bookings_rank},
           {"constraints_met", v.constraints_met},
           {"capacity_ratio", v.capacity_ratio},
           {"matched", v.matched},
           {"actions", actions}};
}

void to_json(Json& j, const AblationReport& v) { j = Json{{"seed", v.seed}, {"variants", v.variants}}; }

Json policy_to_json(const BanditPolicy& p) {
  const Eigen::MatrixXd& h = p.state.matrix();
  return Json{{"mode", std::string(to_string(p.params.mode))},
              {"gradient_target", std::string(to_string(p.params.gradient_target))},
              {"hidden", p.net.hidden()},
              {"context_dims", p.net.context_dims()},
              {"learning_rate", p.learning_rate},
              {"updates", p.updates},
              {"theta", vec(p.net.parameters())},
              {"h_trace", h.trace()},
              {"h_frobenius", h.norm()}};
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io_error", fmt::format("cannot write {}", path.string()));
  for (const auto& r : records) out << r.dump() << '\n';
  if (!out) throw Error("io_error", fmt::format("write to {} failed", path.string()));
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound(fmt::format("cannot read {}", path.string()));
  std::vector<Json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw InvalidArgument(fmt::format("{}:{}: malformed record ({})", path.string(), n, e.what()));
    }
  }
  return out;
}

}  // namespace salesopt
