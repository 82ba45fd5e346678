#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "salesopt/config.hpp"
#include "salesopt/errors.hpp"
#include "salesopt/evalharness.hpp"
#include "salesopt/http_api.hpp"
#include "salesopt/pipeline.hpp"
#include "salesopt/records.hpp"
#include "salesopt/service.hpp"

namespace fs = std::filesystem;
using namespace salesopt;

namespace {

constexpr std::uint64_t kEvalCampaignStream = 21;
constexpr std::uint64_t kEvalEngagementStream = 22;

/// Column-aligned text table: text left-aligned, everything else right-aligned.
class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
  void row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }

  std::string str() const {
    std::vector<std::size_t> width(header_.size(), 0);
    std::vector<bool> numeric(header_.size(), true);
    for (std::size_t c = 0; c < header_.size(); ++c) width[c] = header_[c].size();
    for (const auto& r : rows_)
      for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) {
        width[c] = std::max(width[c], r[c].size());
        if (!r[c].empty() && !looks_numeric(r[c])) numeric[c] = false;
      }
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t c = 0; c < width.size(); ++c) {
        const std::string& v = c < cells.size() ? cells[c] : std::string{};
        if (c) out += "  ";
        out += numeric[c] ? fmt::format("{:>{}}", v, width[c]) : fmt::format("{:<{}}", v, width[c]);
      }
      while (!out.empty() && out.back() == ' ') out.pop_back();
      out += '\n';
    };
    line(header_);
    std::vector<std::string> rule;
    for (std::size_t w : width) rule.emplace_back(w, '-');
    line(rule);
    for (const auto& r : rows_) line(r);
    return out;
  }

 private:
  static bool looks_numeric(const std::string& s) {
    return s.find_first_not_of("0123456789.-+e%na") == std::string::npos;
  }
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string num(double v, int digits = 4) {
  if (!std::isfinite(v)) return "nan";
  return fmt::format("{:.{}f}", v, digits);
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out = "out";
  std::vector<std::string> set;

  Settings settings(Settings base = {}) const {
    std::map<std::string, std::string> values;
    if (!config.empty()) values = parse_config_file(config);
    for (const auto& kv : set) {
      const auto parsed = parse_config_text(kv);
      for (const auto& [k, v] : parsed) values[k] = v;
    }
    Settings s = apply_config(values, std::move(base));
    if (seed) {
      s.gen.seed = *seed;
      s.panel.seed = *seed;
    }
    return s;
  }

  fs::path dir() const {
    fs::create_directories(out);
    return fs::path(out);
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Seed for every random stream (overrides gen.seed and panel.seed)");
  cmd->add_option("--config", c.config, "Config file of 'section.key = value' lines")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--set", c.set, "Inline config override 'section.key=value' (repeatable)");
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("io_error", fmt::format("cannot write {}", path.string()));
  out << j.dump(2) << '\n';
}

Eigen::MatrixXd rows(const std::vector<Account>& accounts, bool engagement, std::size_t begin, std::size_t end) {
  const std::size_t cols = engagement ? accounts.front().e_index.size() : accounts.front().u_index.size();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(end - begin), static_cast<Eigen::Index>(cols));
  for (std::size_t i = begin; i < end; ++i) {
    const FeatureVector v = engagement ? accounts[i].x_e() : accounts[i].x_u();
    for (std::size_t j = 0; j < cols; ++j) X(static_cast<Eigen::Index>(i - begin), static_cast<Eigen::Index>(j)) = v[j];
  }
  return X;
}

// ---- gen ----

int cmd_gen(const Common& c, double effect) {
  const Settings s = c.settings();
  const Population pop = generate_population(s.gen);
  const auto panel = generate_panel(s.panel, effect);
  const fs::path dir = c.dir();
  write_jsonl(dir / "accounts.jsonl", to_records(pop.accounts));
  write_jsonl(dir / "reps.jsonl", to_records(pop.reps));
  write_jsonl(dir / "panel.jsonl", to_records(panel));
  Table t({"records", "count", "file"});
  t.row({"accounts", std::to_string(pop.accounts.size()), (dir / "accounts.jsonl").string()});
  t.row({"reps", std::to_string(pop.reps.size()), (dir / "reps.jsonl").string()});
  t.row({"panel", std::to_string(panel.size()), (dir / "panel.jsonl").string()});
  std::cout << t.str();
  return 0;
}

// ---- train ----

int cmd_train(const Common& c) {
  const Settings s = c.settings();
  const Population pop = generate_population(s.gen);
  const PredictionModels models = train_models(s.gen, pop, s.training);
  const auto scores = score_accounts(models, pop.accounts);
  const fs::path dir = c.dir();
  write_json(dir / "models.json", Json{{"uplift", models.uplift}, {"forecasters", models.forecasters}});
  write_jsonl(dir / "scores.jsonl", to_records(scores));

  double sq = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double e = scores[i].y_u_raw - pop.accounts[i].true_ite.value_or(0.0);
    sq += e * e;
  }
  Table t({"model", "target", "rows", "ite_rmse"});
  t.row({fmt::format("{}-learner", to_string(models.uplift.kind())), "uplift", std::to_string(scores.size()),
         num(std::sqrt(sq / static_cast<double>(scores.size())))});
  for (const auto& f : models.forecasters)
    t.row({"forecaster", std::string(to_string(f.target())), std::to_string(scores.size()), ""});
  std::cout << t.str();
  return 0;
}

// ---- optimize ----

int cmd_optimize(const Common& c, Day day, bool simplified) {
  const Settings s = c.settings();
  const Population pop = generate_population(s.gen);
  const PredictionModels models = train_models(s.gen, pop, s.training);
  const auto scores = score_accounts(models, pop.accounts);
  const DailyPlan plan = plan_day(scores, pop.reps, {}, s.optimizer, day,
                                  simplified ? ActionRule::UpliftSignOnly : ActionRule::Algorithm1);
  const fs::path dir = c.dir();
  write_jsonl(dir / "recommendations.jsonl", to_records(plan.recommendations));
  write_json(dir / "assignment.json", Json{{"objective", plan.objective}, {"eligible", plan.pool.size()},
                                           {"assignment", plan.assignment}});
  Table t({"g_rank", "r_rank", "rep", "account", "action", "a"});
  for (const auto& r : plan.recommendations)
    t.row({std::to_string(r.g_rank), std::to_string(r.r_rank), r.rep_id, r.account_id,
           std::string(to_string(r.action)), num(r.a_value)});
  std::cout << t.str();
  std::cout << fmt::format("eligible={} matched={} objective={}\n", plan.pool.size(), plan.recommendations.size(),
                           num(plan.objective));
  return 0;
}

// ---- simulate-bandit ----

int cmd_simulate(const Common& c, int rounds, const std::string& env_name, int every) {
  const Settings s = c.settings();
  BanditEnvSpec env;
  const std::size_t dims = kBanditAccountDims + s.gen.rep_dims + kAlertHistoryDims;
  if (env_name == "default") {
    env = default_bandit_env(dims);
  } else if (env_name.rfind("dominant:", 0) == 0) {
    env = dominant_action_env(action_from_string(env_name.substr(9)));
  } else {
    throw InvalidArgument(fmt::format("unknown env '{}' (default | dominant:<ActionType>)", env_name));
  }
  SimulationOptions opts;
  opts.n_accounts = s.gen.n_accounts;
  opts.n_reps = s.gen.n_reps;
  const SimulationTrace trace = run_simulation(env, s.bandit, rounds, s.gen.seed, opts);
  const fs::path dir = c.dir();
  write_jsonl(dir / "bandit_trace.jsonl", to_records(trace.rows));
  write_json(dir / "bandit_policy.json", policy_to_json(trace.policy));

  Table t({"round", "cum_reward", "regret", "BoostEngagement", "PreventChurn", "PromoteUpsell"});
  double regret = 0.0;
  for (const auto& r : trace.rows) {
    regret += r.best_expected_reward - r.expected_reward;
    if ((r.round + 1) % every == 0 || r.round + 1 == rounds)
      t.row({std::to_string(r.round + 1), std::to_string(r.cumulative_reward), num(regret, 2), num(r.share[0], 3),
             num(r.share[1], 3), num(r.share[2], 3)});
  }
  std::cout << t.str();
  return 0;
}

// ---- evaluate ----

struct EvalFlags {
  bool deciles = false, forecast = false, did = false, placebo = false, cem = false;
  double effect = 0.0;
  int cem_bins = 5;
};

int cmd_evaluate(const Common& c, EvalFlags f) {
  if (!f.deciles && !f.forecast && !f.did && !f.placebo && !f.cem)
    f.deciles = f.forecast = f.did = f.placebo = f.cem = true;
  const Settings s = c.settings();
  Json report = Json::object();

  if (f.deciles || f.forecast) {
    const Population pop = generate_population(s.gen);
    const auto& acc = pop.accounts;
    const std::size_t n = acc.size();
    const std::size_t split = n * 7 / 10;
    if (split < 2 || n - split < 10) throw InsufficientData("evaluate needs at least 34 accounts");
    if (f.deciles) {
      Rng campaign(s.gen.seed, kEvalCampaignStream);
      const auto a = assign_treatment(s.gen, acc, campaign);
      const auto y = simulate_outcomes(s.gen, acc, a, campaign);
      const Eigen::MatrixXd Xtr = rows(acc, false, 0, split);
      const Eigen::VectorXd ytr = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(split));
      const UpliftModel model = fit_uplift(s.training.learner, Xtr, ytr, std::span(a).first(split), s.training.uplift);
      const Eigen::VectorXd score = model.predict_ite_rows(rows(acc, false, split, n));
      std::vector<double> sc(score.data(), score.data() + score.size());
      const auto table = uplift_deciles(sc, std::span(y).subspan(split), std::span(a).subspan(split));
      double sq = 0.0;
      for (std::size_t i = split; i < n; ++i) {
        const double e = sc[i - split] - acc[i].true_ite.value_or(0.0);
        sq += e * e;
      }
      const double rmse = std::sqrt(sq / static_cast<double>(n - split));
      report["deciles"] = table;
      report["ite_rmse"] = rmse;
      Table t({"decile", "n", "n_treated", "n_control", "mean_score", "uplift"});
      for (const auto& r : table)
        t.row({std::to_string(r.decile), std::to_string(r.n), std::to_string(r.n_treated),
               std::to_string(r.n_control), num(r.mean_score), r.uplift ? num(*r.uplift) : "n/a"});
      std::cout << fmt::format("uplift deciles ({}-learner, holdout n={}, ite_rmse={})\n",
                               to_string(s.training.learner), n - split, num(rmse));
      std::cout << t.str() << '\n';
    }
    if (f.forecast) {
      Rng history(s.gen.seed, kEvalEngagementStream);
      const Eigen::MatrixXd next = simulate_engagement_next(s.gen, acc, history);
      const Eigen::MatrixXd Xtr = rows(acc, true, 0, split);
      const Eigen::MatrixXd Xte = rows(acc, true, split, n);
      Json rows_json = Json::array();
      Table t({"target", "mae", "rmse"});
      for (Eigen::Index j = 0; j < next.cols(); ++j) {
        const auto target = target_for_metric(static_cast<std::size_t>(j));
        const Forecaster fc = Forecaster::fit(Xtr, next.col(j).head(static_cast<Eigen::Index>(split)), target,
                                              s.training.forecast);
        const ForecastErrors e = evaluate(fc, Xte, next.col(j).tail(static_cast<Eigen::Index>(n - split)));
        rows_json.push_back(Json{{"target", to_string(target)}, {"mae", e.mae}, {"rmse", e.rmse}});
        t.row({std::string(to_string(target)), num(e.mae), num(e.rmse)});
      }
      report["forecast"] = rows_json;
      std::cout << "engagement forecast (holdout)\n" << t.str() << '\n';
    }
  }

  if (f.did || f.placebo || f.cem) {
    const auto panel = generate_panel(s.panel, f.effect);
    DidOptions opts;
    opts.require_rte = false;
    Table t({"estimate", "tau_hat", "rte", "std_error", "p_value", "ci_low", "ci_high", "n"});
    auto add = [&](const std::string& name, const DidResult& r) {
      t.row({name, num(r.tau_hat, 6), r.rte ? num(*r.rte, 6) : "n/a", num(r.std_error, 6), num(r.p_value, 6),
             num(r.ci_low, 6), num(r.ci_high, 6), std::to_string(r.n)});
    };
    if (f.did) {
      const DidResult r = did_estimate(panel, opts);
      report["did"] = r;
      add("did", r);
    }
    if (f.cem) {
      const auto units = cem_units(panel);
      Coarsening bins;
      if (!units.empty()) {
        const std::size_t k = units.front().covariates.size();
        bins.resize(k);
        for (std::size_t j = 0; j < k; ++j) {
          double lo = INFINITY, hi = -INFINITY;
          for (const auto& u : units) {
            lo = std::min(lo, u.covariates[j]);
            hi = std::max(hi, u.covariates[j]);
          }
          for (int b = 1; b < f.cem_bins; ++b) bins[j].push_back(lo + (hi - lo) * b / f.cem_bins);
        }
      }
      const CemResult m = cem_match(units, bins);
      report["cem"] = m;
      if (!m.empty) {
        const DidResult r = did_estimate(panel, opts, &m.weights);
        report["did_cem"] = r;
        add("did_cem", r);
      }
      const auto before = standardized_mean_difference(units);
      const auto after = standardized_mean_difference(units, m.empty ? nullptr : &m.weights);
      report["smd_before"] = before;
      report["smd_after"] = after;
    }
    if (f.placebo) {
      if (s.panel.n_pre_periods < 2) {
        report["placebo"] = nullptr;
      } else {
        const PlaceboResult p = placebo_pretest(panel);
        report["placebo"] = p;
        for (std::size_t i = 0; i < p.cuts.size(); ++i) add(fmt::format("placebo@{}", p.cuts[i]), p.results[i]);
      }
    }
    std::cout << fmt::format("difference-in-differences (injected effect {})\n", f.effect) << t.str();
    if (report.contains("placebo") && !report["placebo"].is_null())
      std::cout << fmt::format("parallel trends plausible: {}\n",
                               report["placebo"]["parallel_trends_plausible"].get<bool>() ? "yes" : "no");
  }
  write_json(c.dir() / "evaluation.json", report);
  return 0;
}

// ---- ablate ----

int cmd_ablate(const Common& c, int seeds) {
  AblationConfig cfg;
  Settings base;
  base.gen = cfg.population;
  const Settings s = c.settings(base);
  cfg.population = s.gen;
  cfg.optimizer = s.optimizer;
  cfg.world = s.world;
  cfg.training = s.training;
  std::vector<Json> out;
  for (int k = 0; k < seeds; ++k) {
    AblationConfig run = cfg;
    run.population.seed = cfg.population.seed + static_cast<std::uint64_t>(k);
    const AblationReport r = run_ablation(run);
    out.emplace_back(r);
    if (seeds > 1) std::cout << fmt::format("seed {}\n", run.population.seed);
    std::cout << format_ablation_table(r);
    if (k + 1 < seeds) std::cout << '\n';
  }
  write_jsonl(c.dir() / "ablation.jsonl", out);
  return 0;
}

// ---- serve / replay ----

int cmd_serve(const Common& c, std::string log, std::optional<int> port, std::optional<std::string> host) {
  Settings s = c.settings();
  if (port) s.service.port = *port;
  if (host) s.service.host = *host;
  if (log.empty()) log = (c.dir() / "events.jsonl").string();
  auto service = Service::open(s, log);
  HttpApi api(*service);
  fmt::print("serving on http://{}:{} (log {})\n", s.service.host, s.service.port, log);
  std::fflush(stdout);
  api.listen(s.service.host, s.service.port);
  return 0;
}

int cmd_replay(const Common& c, const std::string& log) {
  if (!fs::exists(log)) throw NotFound(fmt::format("event log {} does not exist", log));
  const auto records = read_event_log(log);
  auto service = Service::open(c.settings(), log);
  const BanditPolicy p = service->policy();
  const MetricsSnapshot m = service->metrics();

  std::optional<double> snapshot_diff;
  for (auto it = records.rbegin(); it != records.rend(); ++it)
    if (it->kind == "snapshot") {
      const auto theta = it->payload.at("theta").get<std::vector<double>>();
      if (it->payload.at("updates").get<std::size_t>() != p.updates) break;
      double d = 0.0;
      const Eigen::VectorXd live = p.net.parameters();
      for (Eigen::Index i = 0; i < live.size(); ++i)
        d = std::max(d, std::abs(live[i] - theta.at(static_cast<std::size_t>(i))));
      snapshot_diff = d;
      break;
    }
  Json state = policy_to_json(p);
  state["metrics"] = to_json(m);
  write_json(c.dir() / "replayed_state.json", state);

  Table t({"field", "value"});
  t.row({"records", std::to_string(records.size())});
  t.row({"runs", std::to_string(m.runs)});
  t.row({"served", std::to_string(m.served)});
  t.row({"bandit_updates", std::to_string(p.updates)});
  t.row({"pending_updates", std::to_string(m.pending_updates)});
  t.row({"cumulative_reward", std::to_string(m.cumulative_reward)});
  t.row({"h_trace", num(p.state.matrix().trace(), 6)});
  t.row({"snapshot_max_diff", snapshot_diff ? fmt::format("{:.3e}", *snapshot_diff) : "n/a"});
  std::cout << t.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sales recommendation optimizer: data generation, training, planning, bandit, evaluation, service"};
  app.require_subcommand(1);
  std::string keys = "Config keys:\n";
  for (const auto& k : config_keys()) keys += "  " + k + "\n";
  app.footer(keys);

  Common common;
  int exit_code = 0;

  auto* gen = app.add_subcommand("gen", "Generate a population and a DiD panel");
  add_common(gen, common);
  double gen_effect = 0.0;
  gen->add_option("--effect", gen_effect, "Treatment effect injected into the panel");
  gen->callback([&] { exit_code = cmd_gen(common, gen_effect); });

  auto* train = app.add_subcommand("train", "Train uplift and engagement models");
  add_common(train, common);
  train->callback([&] { exit_code = cmd_train(common); });

  auto* optimize = app.add_subcommand("optimize", "Run one pipeline day");
  add_common(optimize, common);
  int day = 0;
  bool simplified = false;
  optimize->add_option("--day", day, "Day index");
  optimize->add_flag("--simplified-rules", simplified, "Use the uplift-sign action rule");
  optimize->callback([&] { exit_code = cmd_optimize(common, day, simplified); });

  auto* sim = app.add_subcommand("simulate-bandit", "Run the bandit against a simulated environment");
  add_common(sim, common);
  int rounds = 5000, every = 500;
  std::string env = "default";
  sim->add_option("--rounds", rounds, "Rounds")->capture_default_str()->check(CLI::NonNegativeNumber);
  sim->add_option("--env", env, "default | dominant:<ActionType>")->capture_default_str();
  sim->add_option("--every", every, "Table row interval")->capture_default_str()->check(CLI::PositiveNumber);
  sim->callback([&] { exit_code = cmd_simulate(common, rounds, env, every); });

  auto* eval = app.add_subcommand("evaluate", "Uplift deciles, forecast errors, DiD, placebo and CEM");
  add_common(eval, common);
  EvalFlags ef;
  eval->add_flag("--deciles", ef.deciles, "Uplift decile table");
  eval->add_flag("--forecast", ef.forecast, "Forecast MAE/RMSE");
  eval->add_flag("--did", ef.did, "DiD on a generated panel");
  eval->add_flag("--placebo", ef.placebo, "Placebo pre-test (needs panel.n_pre_periods >= 2)");
  eval->add_flag("--cem", ef.cem, "CEM-weighted DiD");
  eval->add_option("--effect", ef.effect, "Effect injected into the panel");
  eval->add_option("--cem-bins", ef.cem_bins, "Equal-width bins per covariate")->check(CLI::PositiveNumber);
  eval->callback([&] { exit_code = cmd_evaluate(common, ef); });

  auto* ablate = app.add_subcommand("ablate", "Ablation report for the Full, A, B and C variants");
  add_common(ablate, common);
  int seeds = 1;
  ablate->add_option("--seeds", seeds, "Consecutive seeds to run")->check(CLI::PositiveNumber);
  ablate->callback([&] { exit_code = cmd_ablate(common, seeds); });

  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  add_common(serve, common);
  std::string serve_log;
  std::optional<int> port;
  std::optional<std::string> host;
  serve->add_option("--log", serve_log, "Event log (default <out>/events.jsonl)");
  serve->add_option("--port", port, "Port (default service.port)");
  serve->add_option("--host", host, "Host (default service.host)");
  serve->callback([&] { exit_code = cmd_serve(common, serve_log, port, host); });

  auto* replay = app.add_subcommand("replay", "Rebuild service state from an event log");
  add_common(replay, common);
  std::string replay_log;
  replay->add_option("--log", replay_log, "Event log")->required();
  replay->callback([&] { exit_code = cmd_replay(common, replay_log); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << fmt::format("error: code=usage message={}\n", one_line(e.what()));
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  } catch (const Error& e) {
    std::cerr << fmt::format("error: code={} message={}\n", e.code(), one_line(e.what()));
    return 1;
  } catch (const std::exception& e) {
    std::cerr << fmt::format("error: code=internal message={}\n", one_line(e.what()));
    return 1;
  }
  return exit_code;
}
