#include "salesopt/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "salesopt/errors.hpp"

namespace salesopt {

double net_ratio(double renewal_plus_addon_bookings, double renewal_target) {
  if (!(renewal_target > 0.0)) throw InvalidArgument(fmt::format("renewal target must be > 0, got {}", renewal_target));
  return renewal_plus_addon_bookings / renewal_target;
}

DidResult did_estimate(std::span<const PanelObservation> panel, const DidOptions& options,
                       const std::map<std::string, double>* weights) {
  if (!(options.confidence > 0.0 && options.confidence < 1.0)) throw InvalidArgument("confidence must lie in (0,1)");
  std::array<double, 4> sum_w{}, sum_wy{};
  auto cell = [](const PanelObservation& o) {
    return (o.group == Group::Treat ? 2 : 0) + (o.period == Period::Post ? 1 : 0);
  };
  std::vector<const PanelObservation*> used;
  std::vector<double> w;
  for (const auto& o : panel) {
    double wi = 1.0;
    if (weights) {
      const auto it = weights->find(o.unit_id);
      if (it == weights->end()) continue;
      wi = it->second;
    }
    if (!(wi >= 0.0) || !std::isfinite(o.outcome)) throw InvalidArgument(fmt::format("bad observation for unit {}", o.unit_id));
    if (wi == 0.0) continue;
    const int c = cell(o);
    sum_w[c] += wi;
    sum_wy[c] += wi * o.outcome;
    used.push_back(&o);
    w.push_back(wi);
  }
  static constexpr std::array<const char*, 4> kCellNames{"ctrl/pre", "ctrl/post", "treat/pre", "treat/post"};
  for (int c = 0; c < 4; ++c)
    if (sum_w[c] == 0.0) throw InsufficientData(fmt::format("DiD cell {} is empty", kCellNames[c]));

  DidResult r;
  r.ctrl_pre = sum_wy[0] / sum_w[0];
  r.ctrl_post = sum_wy[1] / sum_w[1];
  r.treat_pre = sum_wy[2] / sum_w[2];
  r.treat_post = sum_wy[3] / sum_w[3];
  r.tau_hat = (r.treat_post - r.treat_pre) - (r.ctrl_post - r.ctrl_pre);
  const double ctrl_trend = r.ctrl_post - r.ctrl_pre;
  if (ctrl_trend != 0.0)
    r.rte = r.tau_hat / ctrl_trend;
  else if (options.require_rte)
    throw InvalidArgument("control trend is zero; the relative treatment effect is undefined");
  r.n = used.size();

  // Saturated design: the OLS fit of each row is its cell mean.
  const std::array<double, 4> mean{r.ctrl_pre, r.ctrl_post, r.treat_pre, r.treat_post};
  Eigen::Matrix4d xtwx = Eigen::Matrix4d::Zero();
  Eigen::Matrix4d meat = Eigen::Matrix4d::Zero();
  for (std::size_t i = 0; i < used.size(); ++i) {
    const auto& o = *used[i];
    const double g = o.group == Group::Treat ? 1.0 : 0.0;
    const double p = o.period == Period::Post ? 1.0 : 0.0;
    const Eigen::Vector4d x(1.0, g, p, g * p);
    const double e = o.outcome - mean[static_cast<std::size_t>(cell(o))];
    xtwx += w[i] * x * x.transpose();
    meat += (w[i] * w[i] * e * e) * x * x.transpose();
  }
  const auto n = static_cast<double>(r.n);
  const double df = n - 4.0;
  if (df < 1.0) {
    r.std_error = r.t_stat = r.p_value = r.ci_low = r.ci_high = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  const Eigen::Matrix4d bread = xtwx.inverse();
  const Eigen::Matrix4d v = (n / df) * bread * meat * bread;
  r.std_error = std::sqrt(std::max(v(3, 3), 0.0));
  boost::math::students_t dist(df);
  const double q = boost::math::quantile(boost::math::complement(dist, (1.0 - options.confidence) / 2.0));
  if (r.std_error > 0.0) {
    r.t_stat = r.tau_hat / r.std_error;
    r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t_stat)));
  } else {
    r.t_stat = r.tau_hat == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.tau_hat);
    r.p_value = r.tau_hat == 0.0 ? 1.0 : 0.0;
  }
  r.ci_low = r.tau_hat - q * r.std_error;
  r.ci_high = r.tau_hat + q * r.std_error;
  return r;
}

std::vector<CemUnit> cem_units(std::span<const PanelObservation> panel) {
  std::vector<CemUnit> out;
  std::set<std::string> seen;
  for (const auto& o : panel)
    if (seen.insert(o.unit_id).second) out.push_back({o.unit_id, o.group, o.covariates});
  return out;
}

CemResult cem_match(std::span<const CemUnit> units, const Coarsening& coarsening) {
  if (coarsening.empty()) throw InvalidArgument("CEM needs at least one covariate");
  for (const auto& edges : coarsening)
    if (!std::is_sorted(edges.begin(), edges.end())) throw InvalidArgument("CEM bin edges must be sorted");
  struct Stratum {
    std::vector<std::string> treat, ctrl;
  };
  std::map<std::vector<int>, Stratum> strata;
  for (const auto& u : units) {
    if (u.covariates.size() < coarsening.size())
      throw InvalidArgument(fmt::format("unit {} has {} covariates, coarsening needs {}", u.unit_id,
                                        u.covariates.size(), coarsening.size()));
    std::vector<int> sig(coarsening.size());
    for (std::size_t j = 0; j < coarsening.size(); ++j) {
      const auto& edges = coarsening[j];
      sig[j] = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), u.covariates[j]) - edges.begin());
    }
    auto& s = strata[sig];
    (u.group == Group::Treat ? s.treat : s.ctrl).push_back(u.unit_id);
  }
  CemResult r;
  std::size_t m_t = 0, m_c = 0;
  for (const auto& [sig, s] : strata) {
    if (s.treat.empty() || s.ctrl.empty()) {
      r.dropped_treat += s.treat.size();
      r.dropped_ctrl += s.ctrl.size();
      continue;
    }
    ++r.strata;
    m_t += s.treat.size();
    m_c += s.ctrl.size();
  }
  r.empty = r.strata == 0;
  for (const auto& [sig, s] : strata) {
    if (s.treat.empty() || s.ctrl.empty()) continue;
    const double wc = (static_cast<double>(s.treat.size()) / static_cast<double>(m_t)) /
                      (static_cast<double>(s.ctrl.size()) / static_cast<double>(m_c));
    for (const auto& id : s.treat) {
      r.matched_treat.push_back(id);
      r.weights[id] = 1.0;
    }
    for (const auto& id : s.ctrl) {
      r.matched_ctrl.push_back(id);
      r.weights[id] = wc;
    }
  }
  return r;
}

std::vector<double> standardized_mean_difference(std::span<const CemUnit> units,
                                                 const std::map<std::string, double>* weights) {
  if (units.empty()) return {};
  const std::size_t p = units.front().covariates.size();
  std::vector<double> out(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    std::array<double, 2> sw{}, sx{}, sxx{};
    for (const auto& u : units) {
      double w = 1.0;
      if (weights) {
        const auto it = weights->find(u.unit_id);
        if (it == weights->end()) continue;
        w = it->second;
      }
      const int g = u.group == Group::Treat ? 1 : 0;
      sw[g] += w;
      sx[g] += w * u.covariates[j];
      sxx[g] += w * u.covariates[j] * u.covariates[j];
    }
    if (sw[0] == 0.0 || sw[1] == 0.0) {
      out[j] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    std::array<double, 2> mean{}, var{};
    for (int g = 0; g < 2; ++g) {
      mean[g] = sx[g] / sw[g];
      var[g] = std::max(sxx[g] / sw[g] - mean[g] * mean[g], 0.0);
    }
    const double pooled = std::sqrt((var[0] + var[1]) / 2.0);
    const double diff = std::abs(mean[1] - mean[0]);
    out[j] = pooled > 0.0 ? diff / pooled : (diff > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  }
  return out;
}

PlaceboResult placebo_pretest(std::span<const PanelObservation> panel, std::vector<int> cuts, double alpha) {
  std::vector<const PanelObservation*> pre;
  std::set<int> times;
  for (const auto& o : panel)
    if (o.period == Period::Pre) {
      pre.push_back(&o);
      times.insert(o.t);
    }
  if (times.size() < 2)
    throw InsufficientData(fmt::format("placebo test needs >= 2 pre-period time points, got {}", times.size()));
  if (cuts.empty()) cuts.assign(std::next(times.begin()), times.end());
  for (int c : cuts)
    if (c <= *times.begin() || c > *times.rbegin())
      throw InvalidArgument(fmt::format("pseudo cut {} leaves one side of the pre-period empty", c));

  PlaceboResult out;
  out.cuts = cuts;
  out.alpha = alpha;
  out.corrected_alpha = alpha / static_cast<double>(cuts.size());
  for (int c : cuts) {
    struct Acc {
      Group group;
      double sum = 0.0;
      int n = 0;
    };
    std::map<std::pair<std::string, int>, Acc> acc;
    for (const auto* o : pre) {
      auto& a = acc.try_emplace({o->unit_id, o->t >= c ? 1 : 0}, Acc{o->group}).first->second;
      a.sum += o->outcome;
      ++a.n;
    }
    std::vector<PanelObservation> collapsed;
    collapsed.reserve(acc.size());
    for (const auto& [key, a] : acc) {
      PanelObservation o;
      o.unit_id = key.first;
      o.group = a.group;
      o.period = key.second ? Period::Post : Period::Pre;
      o.t = key.second ? c : c - 1;
      o.outcome = a.sum / a.n;
      collapsed.push_back(std::move(o));
    }
    DidOptions opt;
    opt.require_rte = false;
    out.results.push_back(did_estimate(collapsed, opt));
    if (out.results.back().p_value < out.corrected_alpha) out.parallel_trends_plausible = false;
  }
  return out;
}

PrecisionMetrics precision_metrics(std::span<const Recommendation> recommendations,
                                   const std::map<std::string, RealizedOutcome>& outcomes) {
  PrecisionMetrics m;
  std::size_t ups_hit = 0, ch_hit = 0, rec_hit = 0, low_hit = 0;
  for (const auto& r : recommendations) {
    const auto it = outcomes.find(r.account_id);
    if (it == outcomes.end()) continue;
    const RealizedOutcome& o = it->second;
    switch (r.action) {
      case ActionType::PromoteUpsell:
        ++m.upsell_recs;
        ups_hit += o.upsell_closes_with_outreach;
        break;
      case ActionType::PreventChurn:
        ++m.churn_recs;
        ch_hit += o.churns_without_outreach;
        rec_hit += o.outreach_retains;
        break;
      case ActionType::BoostEngagement:
        ++m.low_recs;
        low_hit += o.churns_without_outreach;
        break;
    }
  }
  auto frac = [](std::size_t hit, std::size_t n) -> std::optional<double> {
    if (n == 0) return std::nullopt;
    return static_cast<double>(hit) / static_cast<double>(n);
  };
  m.p_ups = frac(ups_hit, m.upsell_recs);
  m.p_ch = frac(ch_hit, m.churn_recs);
  m.p_rec = frac(rec_hit, m.churn_recs);
  m.p_low = frac(low_hit, m.low_recs);
  return m;
}

double realized_bookings(const Recommendation& rec, const RealizedOutcome& outcome) {
  (void)rec;
  return outcome.bookings_with_outreach + (outcome.outreach_retains ? 1.0 : 0.0);
}

std::string_view to_string(AblationVariant v) {
  switch (v) {
    case AblationVariant::Full: return "Full";
    case AblationVariant::A_NoWeighting: return "A_NoWeighting";
    case AblationVariant::B_NoCapacity: return "B_NoCapacity";
    case AblationVariant::C_SimplifiedRules: return "C_SimplifiedRules";
  }
  return "?";
}

AblationVariant variant_from_string(std::string_view s) {
  for (AblationVariant v : kAllVariants)
    if (s == to_string(v)) return v;
  if (s == "full") return AblationVariant::Full;
  if (s == "A" || s == "a") return AblationVariant::A_NoWeighting;
  if (s == "B" || s == "b") return AblationVariant::B_NoCapacity;
  if (s == "C" || s == "c") return AblationVariant::C_SimplifiedRules;
  throw InvalidArgument(fmt::format("unknown ablation variant '{}'", s));
}

AblationConfig::AblationConfig() {
  population.n_accounts = 400;
  population.n_reps = 5;
}

const VariantReport& AblationReport::at(AblationVariant v) const {
  for (const auto& r : variants)
    if (r.variant == v) return r;
  throw NotFound(fmt::format("variant {} was not run", to_string(v)));
}

double constraints_met(std::span<const Recommendation> recs, std::span<const Rep> reps,
                       const OptimizerParams& params) {
  std::map<std::string, int> load, per_account;
  for (const auto& r : recs) {
    ++load[r.rep_id];
    ++per_account[r.account_id];
  }
  std::size_t total = 0, ok = 0;
  for (const auto& rep : reps) {
    const int l = load.contains(rep.id) ? load.at(rep.id) : 0;
    ++total;
    ok += l <= params.n_max;
    if (params.n_min > 0) {
      ++total;
      ok += l >= params.n_min;
    }
  }
  for (const auto& [id, count] : per_account) {
    ++total;
    ok += count <= 1;
  }
  return total == 0 ? 1.0 : static_cast<double>(ok) / static_cast<double>(total);
}

AblationReport run_ablation(const AblationConfig& config, std::span<const AblationVariant> variants) {
  const Population pop = generate_population(config.population);
  const PredictionModels models = train_models(config.population, pop, config.training);
  const std::vector<ScoredAccount> pool = score_accounts(models, pop.accounts);

  Rng world(config.population.seed, 13);
  const Eigen::MatrixXd next = simulate_engagement_next(config.population, pop.accounts, world);
  const auto realized = simulate_realized_outcomes(config.world, pop.accounts, next, world);
  std::map<std::string, RealizedOutcome> outcomes;
  for (std::size_t i = 0; i < pop.accounts.size(); ++i) outcomes[pop.accounts[i].id] = realized[i];

  AblationReport report;
  report.seed = config.population.seed;
  for (AblationVariant v : variants) {
    OptimizerParams params = config.optimizer;
    ActionRule rule = ActionRule::Algorithm1;
    if (v == AblationVariant::A_NoWeighting) params.weight_override = 0.5;
    if (v == AblationVariant::B_NoCapacity) params.capacity_rows = false;
    if (v == AblationVariant::C_SimplifiedRules) rule = ActionRule::UpliftSignOnly;
    const DailyPlan plan = plan_day(pool, pop.reps, {}, params, config.today, rule);

    VariantReport vr;
    vr.variant = v;
    vr.metrics = precision_metrics(plan.recommendations, outcomes);
    vr.matched = plan.recommendations.size();
    for (const auto& r : plan.recommendations) {
      vr.bookings += realized_bookings(r, outcomes.at(r.account_id));
      ++vr.action_counts[static_cast<std::size_t>(r.action)];
    }
    vr.constraints_met = constraints_met(plan.recommendations, pop.reps, config.optimizer);
    const double capacity = static_cast<double>(pop.reps.size()) * config.optimizer.n_max;
    vr.capacity_ratio = capacity > 0.0 ? static_cast<double>(vr.matched) / capacity : 0.0;
    report.variants.push_back(vr);
  }
  std::vector<std::size_t> order(report.variants.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.variants[a].bookings > report.variants[b].bookings;
  });
  for (std::size_t k = 0; k < order.size(); ++k) report.variants[order[k]].bookings_rank = static_cast<int>(k) + 1;
  return report;
}

namespace {

std::string pct(const std::optional<double>& v) {
  return v ? fmt::format("{:.0f}%", 100.0 * *v) : std::string("n/a");
}

}  // namespace

std::string format_ablation_table(const AblationReport& report) {
  std::string out = fmt::format("{:<18} {:>6} {:>6} {:>6} {:>6} {:>8} {:>12} {:>9} {:>8}\n", "Model", "P_ups",
                                "P_ch", "P_rec", "P_low", "B_rank", "constraints", "capacity", "matched");
  for (const auto& v : report.variants)
    out += fmt::format("{:<18} {:>6} {:>6} {:>6} {:>6} {:>8} {:>11.1f}% {:>8.0f}% {:>8}\n", to_string(v.variant),
                       pct(v.metrics.p_ups), pct(v.metrics.p_ch), pct(v.metrics.p_rec), pct(v.metrics.p_low),
                       v.bookings_rank, 100.0 * v.constraints_met, 100.0 * v.capacity_ratio, v.matched);
  return out;
}

}  // namespace salesopt
