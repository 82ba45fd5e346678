#include "salesopt/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>

#include "salesopt/errors.hpp"

namespace salesopt {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(fmt::format("{}: '{}' is not a number", key, v));
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError(fmt::format("{}: '{}' is not an integer", key, v));
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, v));
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(key, item));
  }
  return out;
}

std::string num(double v) { return fmt::format("{}", v); }

std::string list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + num(v[i]);
  return out;
}

struct Field {
  std::function<std::string(const Settings&)> get;
  std::function<void(Settings&, const std::string& key, const std::string& value)> set;
};

template <typename T>
Field real(T Settings::*section, double T::*member) {
  return {[=](const Settings& s) { return num(s.*section.*member); },
          [=](Settings& s, const std::string& k, const std::string& v) { s.*section.*member = parse_double(k, v); }};
}

template <typename T, typename I>
Field integer(T Settings::*section, I T::*member) {
  return {[=](const Settings& s) { return fmt::format("{}", s.*section.*member); },
          [=](Settings& s, const std::string& k, const std::string& v) {
            const long long x = parse_int(k, v);
            if constexpr (std::is_unsigned_v<I>)
              if (x < 0) throw ConfigError(fmt::format("{}: must be >= 0", k));
            s.*section.*member = static_cast<I>(x);
          }};
}

template <typename T>
Field boolean(T Settings::*section, bool T::*member) {
  return {[=](const Settings& s) { return std::string(s.*section.*member ? "true" : "false"); },
          [=](Settings& s, const std::string& k, const std::string& v) { s.*section.*member = parse_bool(k, v); }};
}

template <typename T>
Field text(T Settings::*section, std::string T::*member) {
  return {[=](const Settings& s) { return s.*section.*member; },
          [=](Settings& s, const std::string&, const std::string& v) { s.*section.*member = v; }};
}

const std::map<std::string, Field>& registry() {
  static const std::map<std::string, Field> fields = [] {
    std::map<std::string, Field> f;
    f["gen.n_accounts"] = integer(&Settings::gen, &GenConfig::n_accounts);
    f["gen.n_reps"] = integer(&Settings::gen, &GenConfig::n_reps);
    f["gen.account_dims"] = integer(&Settings::gen, &GenConfig::account_dims);
    f["gen.rep_dims"] = integer(&Settings::gen, &GenConfig::rep_dims);
    f["gen.engagement_dims"] = integer(&Settings::gen, &GenConfig::engagement_dims);
    f["gen.engagement_metrics"] = integer(&Settings::gen, &GenConfig::engagement_metrics);
    f["gen.seed"] = integer(&Settings::gen, &GenConfig::seed);
    f["gen.treatment_share"] = real(&Settings::gen, &GenConfig::treatment_share);
    f["gen.confounding"] = real(&Settings::gen, &GenConfig::confounding);
    f["gen.noise_sd"] = real(&Settings::gen, &GenConfig::noise_sd);
    f["gen.max_days_to_rtcd"] = integer(&Settings::gen, &GenConfig::max_days_to_rtcd);
    f["gen.effect_intercept"] = {
        [](const Settings& s) { return num(s.gen.effect.intercept); },
        [](Settings& s, const std::string& k, const std::string& v) { s.gen.effect.intercept = parse_double(k, v); }};
    f["gen.effect_coef"] = {
        [](const Settings& s) { return list({s.gen.effect.coef.begin(), s.gen.effect.coef.end()}); },
        [](Settings& s, const std::string& k, const std::string& v) {
          const auto c = parse_list(k, v);
          if (c.size() != 3) throw ConfigError(fmt::format("{}: expected 3 values", k));
          std::copy(c.begin(), c.end(), s.gen.effect.coef.begin());
        }};
    f["gen.baseline_nonlinearity"] = {
        [](const Settings& s) { return num(s.gen.baseline.nonlinearity); },
        [](Settings& s, const std::string& k, const std::string& v) { s.gen.baseline.nonlinearity = parse_double(k, v); }};

    f["optimizer.k"] = real(&Settings::optimizer, &OptimizerParams::k);
    f["optimizer.d0"] = real(&Settings::optimizer, &OptimizerParams::d0);
    f["optimizer.n_min"] = integer(&Settings::optimizer, &OptimizerParams::n_min);
    f["optimizer.n_max"] = integer(&Settings::optimizer, &OptimizerParams::n_max);
    f["optimizer.t_u"] = real(&Settings::optimizer, &OptimizerParams::t_u);
    f["optimizer.t_e"] = real(&Settings::optimizer, &OptimizerParams::t_e);
    f["optimizer.cooldown_days"] = integer(&Settings::optimizer, &OptimizerParams::cooldown_days);
    f["optimizer.capacity_rows"] = boolean(&Settings::optimizer, &OptimizerParams::capacity_rows);
    f["optimizer.combiner"] = {
        [](const Settings& s) { return std::string(s.optimizer.combiner == EligibilityCombiner::Or ? "or" : "and"); },
        [](Settings& s, const std::string& k, const std::string& v) {
          if (v == "or") s.optimizer.combiner = EligibilityCombiner::Or;
          else if (v == "and") s.optimizer.combiner = EligibilityCombiner::And;
          else throw ConfigError(fmt::format("{}: expected or|and", k));
        }};
    f["optimizer.assignment"] = {
        [](const Settings& s) {
          return std::string(s.optimizer.mode == AssignmentMode::AtMostOne ? "at_most_one" : "exactly_one");
        },
        [](Settings& s, const std::string& k, const std::string& v) {
          if (v == "at_most_one") s.optimizer.mode = AssignmentMode::AtMostOne;
          else if (v == "exactly_one") s.optimizer.mode = AssignmentMode::ExactlyOne;
          else throw ConfigError(fmt::format("{}: expected at_most_one|exactly_one", k));
        }};

    f["bandit.mode"] = {
        [](const Settings& s) { return std::string(to_string(s.bandit.mode)); },
        [](Settings& s, const std::string& k, const std::string& v) {
          try {
            s.bandit.mode = exploration_from_string(v);
          } catch (const Error&) {
            throw ConfigError(fmt::format("{}: expected ts|ucb", k));
          }
        }};
    f["bandit.beta"] = real(&Settings::bandit, &BanditPolicyParams::beta);
    f["bandit.gamma"] = real(&Settings::bandit, &BanditPolicyParams::gamma);
    f["bandit.learning_rate"] = real(&Settings::bandit, &BanditPolicyParams::learning_rate);
    f["bandit.sgd_steps"] = integer(&Settings::bandit, &BanditPolicyParams::sgd_steps);
    f["bandit.lambda"] = real(&Settings::bandit, &BanditPolicyParams::lambda);
    f["bandit.hidden"] = integer(&Settings::bandit, &BanditPolicyParams::hidden);
    f["bandit.gradient_target"] = {
        [](const Settings& s) { return std::string(to_string(s.bandit.gradient_target)); },
        [](Settings& s, const std::string& k, const std::string& v) {
          try {
            s.bandit.gradient_target = gradient_target_from_string(v);
          } catch (const Error&) {
            throw ConfigError(fmt::format("{}: expected parameters|inputs", k));
          }
        }};

    f["training.learner"] = {
        [](const Settings& s) { return std::string(to_string(s.training.learner)); },
        [](Settings& s, const std::string& k, const std::string& v) {
          try {
            s.training.learner = learner_from_string(v);
          } catch (const Error&) {
            throw ConfigError(fmt::format("{}: expected S|T|X|DR", k));
          }
        }};
    f["training.base"] = {
        [](const Settings& s) {
          return std::string(s.training.uplift.base.kind == RegressorKind::Ridge ? "ridge" : "boosted_stumps");
        },
        [](Settings& s, const std::string& k, const std::string& v) {
          if (v == "ridge") s.training.uplift.base.kind = RegressorKind::Ridge;
          else if (v == "boosted_stumps") s.training.uplift.base.kind = RegressorKind::BoostedStumps;
          else throw ConfigError(fmt::format("{}: expected ridge|boosted_stumps", k));
        }};
    f["training.lambda"] = {
        [](const Settings& s) { return num(s.training.uplift.base.lambda); },
        [](Settings& s, const std::string& k, const std::string& v) {
          s.training.uplift.base.lambda = parse_double(k, v);
          s.training.forecast.lambda = s.training.uplift.base.lambda;
        }};
    f["training.rounds"] = {
        [](const Settings& s) { return fmt::format("{}", s.training.uplift.base.rounds); },
        [](Settings& s, const std::string& k, const std::string& v) {
          s.training.uplift.base.rounds = static_cast<int>(parse_int(k, v));
        }};

    f["panel.n_treat"] = integer(&Settings::panel, &PanelConfig::n_treat);
    f["panel.n_ctrl"] = integer(&Settings::panel, &PanelConfig::n_ctrl);
    f["panel.n_pre_periods"] = integer(&Settings::panel, &PanelConfig::n_pre_periods);
    f["panel.n_post_periods"] = integer(&Settings::panel, &PanelConfig::n_post_periods);
    f["panel.base_level"] = real(&Settings::panel, &PanelConfig::base_level);
    f["panel.unit_sd"] = real(&Settings::panel, &PanelConfig::unit_sd);
    f["panel.noise_sd"] = real(&Settings::panel, &PanelConfig::noise_sd);
    f["panel.time_trend"] = real(&Settings::panel, &PanelConfig::time_trend);
    f["panel.treated_trend_divergence"] = real(&Settings::panel, &PanelConfig::treated_trend_divergence);
    f["panel.covariate_shift"] = real(&Settings::panel, &PanelConfig::covariate_shift);

    f["world.window_days"] = integer(&Settings::world, &OutcomeWorldSpec::window_days);
    f["world.churn_intercept"] = real(&Settings::world, &OutcomeWorldSpec::churn_intercept);
    f["world.retain_if_positive_effect"] = real(&Settings::world, &OutcomeWorldSpec::retain_if_positive_effect);
    f["world.retain_if_nonpositive_effect"] = real(&Settings::world, &OutcomeWorldSpec::retain_if_nonpositive_effect);

    f["service.warmup_updates"] = integer(&Settings::service, &ServiceSettings::warmup_updates);
    f["service.snapshot_every"] = integer(&Settings::service, &ServiceSettings::snapshot_every);
    f["service.product"] = text(&Settings::service, &ServiceSettings::product);
    f["service.host"] = text(&Settings::service, &ServiceSettings::host);
    f["service.port"] = integer(&Settings::service, &ServiceSettings::port);

    f["textgen.client"] = {
        [](const Settings& s) { return s.textgen_client; },
        [](Settings& s, const std::string& k, const std::string& v) {
          if (v != "mock" && v != "http") throw ConfigError(fmt::format("{}: expected mock|http", k));
          s.textgen_client = v;
        }};
    f["textgen.url"] = text(&Settings::textgen, &ExternalHttpConfig::url);
    f["textgen.auth_token"] = text(&Settings::textgen, &ExternalHttpConfig::auth_token);
    f["textgen.timeout_ms"] = integer(&Settings::textgen, &ExternalHttpConfig::timeout_ms);
    return f;
  }();
  return fields;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string line;
  int n = 0;
  while (std::getline(ss, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected 'section.key = value'", n));
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    const auto dot = key.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == key.size() || key.find('.', dot + 1) != std::string::npos)
      throw ConfigError(fmt::format("line {}: key '{}' must look like section.key", n, key));
    if (!out.emplace(key, value).second) throw ConfigError(fmt::format("line {}: key '{}' repeated", n, key));
  }
  return out;
}

std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

Settings apply_config(const std::map<std::string, std::string>& values, Settings base) {
  const auto& reg = registry();
  for (const auto& [key, value] : values) {
    const auto it = reg.find(key);
    if (it == reg.end()) throw ConfigError(fmt::format("unknown config key '{}'", key));
    it->second.set(base, key, value);
  }
  try {
    validate_config(base.gen);
    validate_params(base.optimizer);
    validate_params(base.bandit);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (base.service.warmup_updates < 0) throw ConfigError("service.warmup_updates must be >= 0");
  return base;
}

std::map<std::string, std::string> dump_config(const Settings& s) {
  std::map<std::string, std::string> out;
  for (const auto& [key, field] : registry())
    if (key != "textgen.auth_token") out[key] = field.get(s);
  return out;
}

std::string format_config(const std::map<std::string, std::string>& values) {
  std::string out;
  for (const auto& [k, v] : values) out += fmt::format("{} = {}\n", k, v);
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [key, field] : registry()) out.push_back(key);
  return out;
}

}  // namespace salesopt
