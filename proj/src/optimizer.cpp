#include "salesopt/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "salesopt/errors.hpp"

namespace salesopt {

namespace {

constexpr double kSolutionTol = 1e-6;

}  // namespace

void validate_params(const OptimizerParams& p) {
  if (p.n_min < 0 || p.n_min > p.n_max) throw InvalidArgument("need 0 <= n_min <= n_max");
  if (p.cooldown_days < 0) throw InvalidArgument("cooldown_days must be >= 0");
  if (p.weight_override && !(*p.weight_override >= 0.0 && *p.weight_override <= 1.0))
    throw InvalidArgument("weight override must lie in [0,1]");
}

double weight(double d, double k, double d0) {
  const double s = k * (d - d0);
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

double weight_for(const OptimizerParams& p, double d) {
  return p.weight_override ? *p.weight_override : weight(d, p.k, p.d0);
}

double objective_coefficient(const ScoredAccount& s, const OptimizerParams& p) {
  const double w = weight_for(p, s.d);
  return w * s.y_u + (1.0 - w) * s.y_e;
}

double engagement_diff(std::span<const double> delta_e) {
  if (delta_e.empty()) throw InvalidArgument("engagement difference needs at least one metric");
  double m = 0.0;
  for (double d : delta_e) m = std::max(m, std::abs(d));
  return m;
}

std::vector<ScoredAccount> normalize_scores(std::vector<ScoredAccount> pool) {
  if (pool.empty()) return pool;
  auto rescale = [&](auto raw, auto out) {
    double lo = raw(pool.front()), hi = lo;
    for (const auto& s : pool) {
      lo = std::min(lo, raw(s));
      hi = std::max(hi, raw(s));
    }
    for (auto& s : pool)
      out(s) = hi > lo ? std::clamp(100.0 * (raw(s) - lo) / (hi - lo), 0.0, 100.0) : 50.0;
  };
  rescale([](const ScoredAccount& s) { return s.y_u_raw; }, [](ScoredAccount& s) -> double& { return s.y_u; });
  rescale([](const ScoredAccount& s) { return s.y_e_raw; }, [](ScoredAccount& s) -> double& { return s.y_e; });
  return pool;
}

std::vector<ScoredAccount> eligibility_filter(std::span<const ScoredAccount> pool,
                                              std::span<const Recommendation> history,
                                              const OptimizerParams& params, Day today) {
  std::set<std::string> cooling;
  for (const Recommendation& r : history) {
    if (r.created_at > today)
      throw InvalidArgument(fmt::format("history entry for {} on day {} is after today ({})",
                                        r.account_id, r.created_at, today));
    if (r.created_at >= today - params.cooldown_days && r.created_at <= today - 1)
      cooling.insert(r.account_id);
  }
  std::vector<ScoredAccount> out;
  for (const ScoredAccount& s : pool) {
    const bool u_ok = s.y_u > params.t_u;
    const bool e_ok = s.y_e > params.t_e;
    const bool passes = params.combiner == EligibilityCombiner::Or ? (u_ok || e_ok) : (u_ok && e_ok);
    if (passes && !cooling.contains(s.account_id)) out.push_back(s);
  }
  return out;
}

LpInstance build_lp(std::span<const ScoredAccount> pool, std::span<const Rep> reps,
                    const OptimizerParams& params) {
  validate_params(params);
  if (pool.empty() || reps.empty()) throw InvalidArgument("LP needs a non-empty pool and rep list");
  const std::size_t n = pool.size();
  const std::size_t m = reps.size();
  if (params.capacity_rows) {
    const auto cap_hi = static_cast<std::size_t>(params.n_max) * m;
    const auto cap_lo = static_cast<std::size_t>(params.n_min) * m;
    if (params.mode == AssignmentMode::ExactlyOne && n > cap_hi)
      throw Infeasible(fmt::format("{} accounts cannot each be assigned: {} reps x n_max {} = {}", n, m,
                                   params.n_max, cap_hi));
    if (n < cap_lo)
      throw Infeasible(fmt::format("{} accounts cannot fill {} reps x n_min {} = {}", n, m, params.n_min,
                                   cap_lo));
  }

  LpInstance inst;
  inst.account_ids.reserve(n);
  for (const auto& s : pool) inst.account_ids.push_back(s.account_id);
  for (const auto& r : reps) inst.rep_ids.push_back(r.id);
  const auto vars = static_cast<Eigen::Index>(n * m);
  inst.lp.objective.resize(vars);
  inst.lp.upper = Eigen::VectorXd::Ones(vars);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = objective_coefficient(pool[i], params);
    inst.coefficients.push_back(c);
    for (std::size_t j = 0; j < m; ++j) inst.lp.objective(inst.var(i, j)) = c;
  }
  if (params.capacity_rows) {
    for (std::size_t j = 0; j < m; ++j) {
      LpRow upper{{}, RowSense::LessEqual, static_cast<double>(params.n_max), fmt::format("cap_max[{}]", reps[j].id)};
      for (std::size_t i = 0; i < n; ++i) upper.coeffs.emplace_back(inst.var(i, j), 1.0);
      if (params.n_min > 0) {
        LpRow lower{upper.coeffs, RowSense::GreaterEqual, static_cast<double>(params.n_min),
                    fmt::format("cap_min[{}]", reps[j].id)};
        inst.lp.rows.push_back(std::move(lower));
      }
      inst.lp.rows.push_back(std::move(upper));
    }
  }
  const RowSense assign_sense =
      params.mode == AssignmentMode::AtMostOne ? RowSense::LessEqual : RowSense::Equal;
  for (std::size_t i = 0; i < n; ++i) {
    LpRow row{{}, assign_sense, 1.0, fmt::format("assign[{}]", pool[i].account_id)};
    for (std::size_t j = 0; j < m; ++j) row.coeffs.emplace_back(inst.var(i, j), 1.0);
    inst.lp.rows.push_back(std::move(row));
  }
  return inst;
}

AssignmentMatrix solve_lp(const LpInstance& instance, const SimplexOptions& options) {
  const LpSolution sol = solve_simplex(instance.lp, options);
  const double viol = max_violation(instance.lp, sol.x);
  if (viol > kSolutionTol)
    throw Error("solver_tolerance", fmt::format("LP solution violates constraints by {:.3g}", viol));
  AssignmentMatrix a;
  a.account_index = instance.account_ids;
  a.rep_index = instance.rep_ids;
  const auto n = static_cast<Eigen::Index>(instance.account_ids.size());
  const auto m = static_cast<Eigen::Index>(instance.rep_ids.size());
  a.entries.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      a.entries(i, j) = std::clamp(sol.x(instance.var(static_cast<std::size_t>(i), static_cast<std::size_t>(j))), 0.0, 1.0);
  return a;
}

double assignment_objective(const LpInstance& instance, const AssignmentMatrix& a) {
  double obj = 0.0;
  for (Eigen::Index i = 0; i < a.entries.rows(); ++i)
    obj += instance.coefficients[static_cast<std::size_t>(i)] * a.entries.row(i).sum();
  return obj;
}

std::vector<MatchedPair> match_and_rank(const AssignmentMatrix& assignment,
                                        std::span<const ScoredAccount> pool,
                                        const OptimizerParams& params) {
  std::map<std::string, double> coefficient;
  for (const auto& s : pool) coefficient[s.account_id] = objective_coefficient(s, params);

  std::vector<MatchedPair> matched;
  for (Eigen::Index i = 0; i < assignment.entries.rows(); ++i) {
    for (Eigen::Index j = 0; j < assignment.entries.cols(); ++j) {
      const double a = assignment.entries(i, j);
      if (std::floor(a + 0.5) != 1.0) continue;
      const std::string& id = assignment.account_index[static_cast<std::size_t>(i)];
      const auto it = coefficient.find(id);
      matched.push_back(MatchedPair{id, assignment.rep_index[static_cast<std::size_t>(j)], a,
                                    it == coefficient.end() ? 0.0 : it->second, 0, 0});
    }
  }
  std::stable_sort(matched.begin(), matched.end(), [](const MatchedPair& x, const MatchedPair& y) {
    if (x.a_value != y.a_value) return x.a_value > y.a_value;
    if (x.coefficient != y.coefficient) return x.coefficient > y.coefficient;
    return x.account_id < y.account_id;
  });
  std::map<std::string, int> per_rep;
  for (std::size_t k = 0; k < matched.size(); ++k) {
    matched[k].g_rank = static_cast<int>(k) + 1;
    matched[k].r_rank = ++per_rep[matched[k].rep_id];
  }
  return matched;
}

ActionType recommend_action(const ScoredAccount& account, const OptimizerParams& params) {
  const double w = weight_for(params, account.d);
  const double monetization = w * account.y_u;
  const double engagement = (1.0 - w) * account.y_e;
  if (monetization <= engagement) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (double d : account.delta_e) {
      lo = std::min(lo, std::abs(d));
      hi = std::max(hi, std::abs(d));
    }
    return lo >= hi ? ActionType::BoostEngagement : ActionType::PromoteUpsell;
  }
  return account.y_u_raw > 0.0 ? ActionType::PromoteUpsell : ActionType::PreventChurn;
}

}  // namespace salesopt
