#include "salesopt/explain.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include "json.hpp"

#include "salesopt/errors.hpp"
#include "salesopt/log.hpp"
#include "salesopt/regression.hpp"
#include "salesopt/rng.hpp"

namespace salesopt {

using nlohmann::json;

std::string_view to_string(AlertKind k) {
  switch (k) {
    case AlertKind::LowEngagement: return "LowEngagement";
    case AlertKind::UpsellFlag: return "UpsellFlag";
    case AlertKind::ChurnFlag: return "ChurnFlag";
  }
  return "?";
}

AlertKind alert_kind_for(ActionType action) {
  switch (action) {
    case ActionType::BoostEngagement: return AlertKind::LowEngagement;
    case ActionType::PromoteUpsell: return AlertKind::UpsellFlag;
    case ActionType::PreventChurn: return AlertKind::ChurnFlag;
  }
  return AlertKind::ChurnFlag;
}

std::string format_value(double v) {
  if (v == 0.0) return "0";
  return fmt::format("{}", v);
}

namespace {

template <typename T>
const T& require_slot(const std::optional<T>& slot, std::string_view name, AlertKind kind) {
  if (!slot) throw InvalidArgument(fmt::format("{} template needs slot '{}'", to_string(kind), name));
  return *slot;
}

}  // namespace

std::string render_template(AlertKind kind, const TemplateSlots& s) {
  const int d = require_slot(s.d, "d", kind);
  switch (kind) {
    case AlertKind::LowEngagement: {
      const std::string& product = require_slot(s.product, "product", kind);
      const double y = require_slot(s.y, "y", kind);
      const double dy = require_slot(s.delta_y, "delta_y", kind);
      return fmt::format(
          "RTCD = {}. We recommend reaching out to the client to understand the low engagement in {}. "
          "The current usage is {} and we are predicting a drop to {} over the next month.",
          d, product, format_value(y), format_value(dy));
    }
    case AlertKind::UpsellFlag: {
      const double dy = require_slot(s.delta_y, "delta_y", kind);
      return fmt::format(
          "RTCD = {}. We recommend exploring add-on opportunities with this customer as we predict a "
          "near-term upsell opportunity worth {}.",
          d, format_value(dy));
    }
    case AlertKind::ChurnFlag:
      return fmt::format("RTCD = {}. We recommend connecting with customers to assess churn risks.", d);
  }
  throw InvalidArgument("unknown alert kind");
}

FeatureMapping::FeatureMapping(std::vector<FeatureMappingRow> rows) : rows_(std::move(rows)) {
  for (std::size_t i = 0; i < rows_.size(); ++i)
    if (!index_.emplace(rows_[i].feature_name, i).second)
      throw ConfigError(fmt::format("feature '{}' is mapped twice", rows_[i].feature_name));
}

std::string FeatureMapping::expression(const std::string& feature) const {
  const auto it = index_.find(feature);
  return it == index_.end() ? feature : rows_[it->second].expression;
}

std::string_view to_string(ModelKind m) {
  switch (m) {
    case ModelKind::TreatmentModel: return "Treatment Model";
    case ModelKind::ControlModel: return "Control Model";
    case ModelKind::Forecaster: return "Forecaster";
  }
  return "?";
}

std::string_view to_string(Comparator c) {
  switch (c) {
    case Comparator::Less: return "<";
    case Comparator::Greater: return ">";
    case Comparator::LessEqual: return "<=";
    case Comparator::GreaterEqual: return ">=";
  }
  return "?";
}

ModelKind model_kind_from_string(std::string_view s) {
  for (ModelKind m : {ModelKind::TreatmentModel, ModelKind::ControlModel, ModelKind::Forecaster})
    if (s == to_string(m)) return m;
  if (s == "treatment") return ModelKind::TreatmentModel;
  if (s == "control") return ModelKind::ControlModel;
  if (s == "forecaster") return ModelKind::Forecaster;
  throw ConfigError(fmt::format("unknown model '{}'", s));
}

Comparator comparator_from_string(std::string_view s) {
  if (s == "<") return Comparator::Less;
  if (s == ">") return Comparator::Greater;
  if (s == "<=" || s == "≤") return Comparator::LessEqual;
  if (s == ">=" || s == "≥") return Comparator::GreaterEqual;
  throw ConfigError(fmt::format("unknown comparator '{}'", s));
}

void validate_rules(std::span<const ThresholdRule> rules, std::span<const std::string> known_features) {
  const std::set<std::string> known(known_features.begin(), known_features.end());
  for (const auto& r : rules)
    if (!known.contains(r.feature_name))
      throw ConfigError(fmt::format("threshold rule names unknown feature '{}'", r.feature_name));
}

namespace {

bool holds(Comparator c, double v, double bound) {
  switch (c) {
    case Comparator::Less: return v < bound;
    case Comparator::Greater: return v > bound;
    case Comparator::LessEqual: return v <= bound;
    case Comparator::GreaterEqual: return v >= bound;
  }
  return false;
}

}  // namespace

std::vector<ThresholdRule> apply_thresholds(std::span<const ThresholdRule> rules,
                                            std::span<const ModelOutput> outputs) {
  std::map<std::pair<std::string, ModelKind>, double> by_key;
  for (const auto& o : outputs) by_key[{o.feature_name, o.model}] = o.value;
  std::vector<ThresholdRule> fired;
  for (const auto& r : rules) {
    const auto it = by_key.find({r.feature_name, r.model});
    if (it == by_key.end())
      throw ConfigError(fmt::format("no {} output for feature '{}'", to_string(r.model), r.feature_name));
    if (holds(r.comparator, it->second, r.bound)) fired.push_back(r);
  }
  return fired;
}

std::string render_explanation(ActionType action, const TemplateSlots& slots,
                               std::span<const ThresholdRule> fired, const FeatureMapping& mapping) {
  std::string out = render_template(alert_kind_for(action), slots);
  for (const auto& r : fired)
    out += fmt::format("\n- {} ({} {} {})", mapping.expression(r.feature_name), to_string(r.model),
                       to_string(r.comparator), format_value(r.bound));
  return out;
}

std::string expand_metric_name(std::string_view metric) {
  std::string out;
  for (std::size_t i = 0; i < metric.size(); ++i) {
    const char c = metric[i];
    if (c == '_') {
      if (!out.empty() && out.back() != ' ') out += ' ';
      continue;
    }
    if (i > 0 && std::isupper(static_cast<unsigned char>(c))) {
      const char prev = metric[i - 1];
      if (std::islower(static_cast<unsigned char>(prev)) || std::isdigit(static_cast<unsigned char>(prev)))
        out += ' ';
    }
    out += c;
  }
  return out;
}

namespace {

/// n for a token of the form l<n>m, else nothing.
std::optional<int> window_months(std::string_view token) {
  if (token.size() < 3 || token.front() != 'l' || token.back() != 'm') return std::nullopt;
  const std::string_view digits = token.substr(1, token.size() - 2);
  int n = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || n <= 0) return std::nullopt;
  return n;
}

}  // namespace

FeatureGroup group_feature(const std::string& feature_name,
                           const std::map<std::string, std::string>& expansions) {
  std::vector<std::string_view> tokens;
  std::string_view rest = feature_name;
  while (true) {
    const auto pos = rest.find('_');
    tokens.push_back(rest.substr(0, pos));
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
  }
  std::size_t first_suffix = tokens.size();
  while (first_suffix > 1 && window_months(tokens[first_suffix - 1])) --first_suffix;
  if (first_suffix == tokens.size()) {
    warn("feature '{}' has no l<n>m suffix; left ungrouped", feature_name);
    return {feature_name, feature_name, feature_name, false};
  }
  const int months = *window_months(tokens.back());
  std::string metric;
  for (std::size_t i = 0; i < first_suffix; ++i) {
    if (i) metric += '_';
    metric += tokens[i];
  }
  const auto it = expansions.find(metric);
  const std::string meaning = it != expansions.end() ? it->second : expand_metric_name(metric);
  const std::string super = months == 1 ? fmt::format("{} in the last month", meaning)
                                        : fmt::format("{} in the last {} months", meaning, months);
  return {feature_name, super, meaning, true};
}

std::vector<FeatureGroup> group_features(std::span<const std::string> feature_names,
                                         const std::map<std::string, std::string>& expansions) {
  std::vector<FeatureGroup> out;
  out.reserve(feature_names.size());
  for (const auto& f : feature_names) out.push_back(group_feature(f, expansions));
  return out;
}

std::vector<ImportanceRecord> instance_importance(const Predictor& model, const Eigen::VectorXd& x,
                                                  std::span<const std::string> feature_names,
                                                  const ImportanceConfig& config,
                                                  const std::string& account_id) {
  const Eigen::Index p = x.size();
  if (static_cast<Eigen::Index>(feature_names.size()) != p)
    throw InvalidArgument("feature_names must match the instance length");
  if (config.samples < 2) throw InvalidArgument("importance needs at least 2 samples");
  const Eigen::VectorXd scale = config.scale.size() ? config.scale : Eigen::VectorXd::Ones(p);
  const Eigen::VectorXd mean = config.mean.size() ? config.mean : Eigen::VectorXd::Zero(p);
  if (scale.size() != p || mean.size() != p) throw InvalidArgument("scale and mean must match the instance length");
  if ((scale.array() <= 0.0).any()) throw InvalidArgument("perturbation scale must be > 0");
  const double width = config.kernel_width > 0.0 ? config.kernel_width : 0.75 * std::sqrt(static_cast<double>(p));

  Rng rng(config.seed, 0x6c696d65);
  const Eigen::Index n = config.samples;
  Eigen::MatrixXd Z(n, p);
  Eigen::VectorXd f(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double dist2 = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double e = rng.normal();
      Z(i, j) = x(j) + scale(j) * e;
      dist2 += e * e;
    }
    f(i) = model(Z.row(i).transpose());
    w(i) = std::exp(-dist2 / (width * width));
  }

  std::vector<ImportanceRecord> out;
  out.reserve(static_cast<std::size_t>(p));
  const double spread = f.maxCoeff() - f.minCoeff();
  const bool constant = !(spread > 1e-12 * std::max(1.0, f.cwiseAbs().maxCoeff()));
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(p);
  if (!constant) {
    RegressorSpec spec;
    spec.lambda = config.ridge_lambda;
    coef = BaseRegressor::fit_weighted(Z, f, w, spec).coefficients();
  }
  for (Eigen::Index j = 0; j < p; ++j)
    out.push_back({feature_names[static_cast<std::size_t>(j)], coef(j) * (x(j) - mean(j)), x(j), account_id});
  return out;
}

// ---- narrative ----

std::string format_percent_change(const ValueChange& v) {
  if (!v.previous || *v.previous == 0.0) return {};
  const double pct = 100.0 * (v.current - *v.previous) / std::abs(*v.previous);
  const long r = std::lround(pct);
  return fmt::format("{:+d}%", r);
}

namespace {

std::string describe_change(const std::string& subject, const std::optional<double>& previous,
                            double current) {
  if (!previous) return fmt::format("{} is {}", subject, format_value(current));
  const std::string pct = format_percent_change({previous, current});
  const std::string tail = pct.empty() ? std::string{} : fmt::format(" ({})", pct);
  if (current > *previous)
    return fmt::format("{} increased from {} to {}{}", subject, format_value(*previous), format_value(current), tail);
  if (current < *previous)
    return fmt::format("{} decreased from {} to {}{}", subject, format_value(*previous), format_value(current), tail);
  return fmt::format("{} was unchanged at {}", subject, format_value(current));
}

std::string render_from_data(const json& data) {
  std::string out = fmt::format("This account is likely a good candidate to {}. Its likelihood is driven by:",
                                data.at("action_label").get<std::string>());
  int n = 0;
  for (const json& insight : data.at("insights")) {
    std::vector<std::string> clauses;
    for (const json& m : insight.at("members")) {
      std::optional<double> prev;
      if (m.contains("previous") && !m.at("previous").is_null()) prev = m.at("previous").get<double>();
      if (m.contains("current") && !m.at("current").is_null())
        clauses.push_back(describe_change(m.at("super_name").get<std::string>(), prev, m.at("current").get<double>()));
      else
        clauses.push_back(m.at("super_name").get<std::string>());
    }
    std::string body;
    if (clauses.size() == 1) {
      body = clauses.front();
    } else {
      body = insight.at("ultra_name").get<std::string>() + ": ";
      for (std::size_t i = 0; i < clauses.size(); ++i) body += (i ? "; " : "") + clauses[i];
    }
    if (insight.at("low_confidence").get<bool>()) body += " (low confidence)";
    out += fmt::format("\n{}. {}.", ++n, body);
  }
  return out;
}

json data_block_from_prompt(const std::string& prompt) {
  const auto pos = prompt.find(kPromptDataMarker);
  if (pos == std::string::npos) throw InvalidArgument("prompt has no data block");
  return json::parse(prompt.substr(pos + kPromptDataMarker.size()));
}

}  // namespace

std::string DeterministicMock::generate(const std::string& prompt) {
  return render_from_data(data_block_from_prompt(prompt));
}

Narrative generate_narrative(std::span<const ImportanceRecord> importances,
                             std::span<const FeatureGroup> groups,
                             const std::map<std::string, ValueChange>& values, ActionType action,
                             TextGenClient& client) {
  std::map<std::string, const FeatureGroup*> group_of;
  for (const auto& g : groups) group_of[g.feature_name] = &g;

  struct Member {
    const ImportanceRecord* record;
    const FeatureGroup* group;
  };
  std::map<std::string, std::vector<Member>> by_ultra;
  for (const auto& r : importances) {
    if (!std::isfinite(r.weight)) throw InvalidArgument(fmt::format("weight of '{}' is not finite", r.feature_name));
    const auto it = group_of.find(r.feature_name);
    if (it == group_of.end()) throw InvalidArgument(fmt::format("feature '{}' has no group", r.feature_name));
    by_ultra[it->second->ultra_name].push_back({&r, it->second});
  }

  std::vector<Insight> insights;
  std::map<std::string, std::vector<Member>*> members_of;
  for (auto& [ultra, members] : by_ultra) {
    std::stable_sort(members.begin(), members.end(), [](const Member& a, const Member& b) {
      return std::abs(a.record->weight) > std::abs(b.record->weight);
    });
    Insight ins;
    ins.ultra_name = ultra;
    for (const auto& m : members) {
      ins.aggregate_weight += std::abs(m.record->weight);
      ins.features.push_back(m.record->feature_name);
    }
    ins.low_confidence = ins.aggregate_weight == 0.0;
    insights.push_back(std::move(ins));
    members_of[ultra] = &members;
  }
  std::stable_sort(insights.begin(), insights.end(), [](const Insight& a, const Insight& b) {
    if (a.low_confidence != b.low_confidence) return !a.low_confidence;
    if (a.aggregate_weight != b.aggregate_weight) return a.aggregate_weight > b.aggregate_weight;
    return a.ultra_name < b.ultra_name;
  });

  json data;
  data["action"] = std::string(to_string(action));
  data["action_label"] = std::string(display_name(action));
  data["insights"] = json::array();
  for (const auto& ins : insights) {
    json entry{{"ultra_name", ins.ultra_name},
               {"aggregate_weight", ins.aggregate_weight},
               {"low_confidence", ins.low_confidence},
               {"members", json::array()}};
    for (const auto& m : *members_of.at(ins.ultra_name)) {
      json member{{"feature_name", m.record->feature_name},
                  {"super_name", m.group->super_name},
                  {"weight", m.record->weight}};
      const auto v = values.find(m.record->feature_name);
      if (v != values.end()) {
        member["current"] = v->second.current;
        member["previous"] = v->second.previous ? json(*v->second.previous) : json(nullptr);
      } else {
        member["current"] = m.record->value;
        member["previous"] = nullptr;
      }
      entry["members"].push_back(std::move(member));
    }
    data["insights"].push_back(std::move(entry));
  }

  Narrative out;
  out.insights = std::move(insights);
  out.prompt = fmt::format(
      "You explain sales recommendations to account executives.\n"
      "Write one numbered insight per ultra_name below, in the order given.\n"
      "Combine related metrics that share an ultra_name into a single insight.\n"
      "For each metric state how it changed and the signed percent change, rounded to a whole percent.\n"
      "Open with: \"This account is likely a good candidate to {}. Its likelihood is driven by:\"\n"
      "{}\n{}\n",
      display_name(action), kPromptDataMarker, data.dump(2));
  out.client = client.name();
  try {
    out.text = client.generate(out.prompt);
  } catch (const std::exception& e) {
    warn("text generation via {} failed ({}); using the mock", client.name(), e.what());
    DeterministicMock mock;
    out.text = mock.generate(out.prompt);
    out.client = mock.name();
    out.fallback = true;
    out.fallback_reason = e.what();
  }
  return out;
}

}  // namespace salesopt
