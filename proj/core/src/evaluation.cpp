#include "safear/evaluation.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "safear/error.hpp"

namespace safear {

RolloutRecord rollout(const RecourseMdp& mdp, const PolicyTable& policy, StateIndex initial,
                      CounterRng& rng) {
  RolloutRecord record;
  record.initial = initial;
  record.final_state = initial;

  StateIndex s = initial;
  if (mdp.is_goal(s)) {
    record.succeeded = true;
    record.steps_to_goal = 0;
    return record;
  }

  std::vector<TransitionOutcome> outcomes;
  const int horizon = policy.horizon();
  for (int h = 1; h <= horizon; ++h) {
    std::int32_t action = policy.action_at(h, s);
    if (action == kUnvisitedAction) {
      const auto applicable = mdp.applicable_actions(s);
      action = applicable.empty() ? kDeadEndAction : applicable.front();
    }
    if (action == kDeadEndAction) {
      const double c = mdp.min_action_cost();
      record.trace.push_back({s, action, c, s});
      record.total_cost += c;
      continue;
    }
    mdp.transitions(s, action, outcomes);
    const double u = rng.next_unit();
    double acc = 0.0;
    StateIndex next = outcomes.back().successor;
    for (const auto& o : outcomes) {
      acc += o.probability;
      if (u < acc) {
        next = o.successor;
        break;
      }
    }
    const double cost = outcomes.front().step_cost;
    record.trace.push_back({s, action, cost, next});
    record.total_cost += cost;
    s = next;
    record.final_state = s;
    if (mdp.is_goal(s)) {
      record.succeeded = true;
      record.steps_to_goal = h;
      break;
    }
  }
  return record;
}

double var_alpha(std::span<const double> costs, double alpha) {
  if (costs.empty()) throw std::invalid_argument("var_alpha: empty sample");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("var_alpha: alpha outside (0,1)");
  std::vector<double> sorted(costs.begin(), costs.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  // min { x : F(x) >= alpha } over the empirical CDF.
  const auto k = static_cast<std::size_t>(std::ceil(alpha * n - 1e-12));
  return sorted[std::min(sorted.size() - 1, k == 0 ? 0 : k - 1)];
}

std::optional<double> cvar_alpha(std::span<const double> costs, double alpha) {
  const double var = var_alpha(costs, alpha);
  double sum = 0.0;
  std::size_t count = 0;
  for (double c : costs) {
    if (c > var) {
      sum += c;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

namespace {

RiskReport report_from_rollouts(const RecourseMdp& mdp, const std::vector<RolloutRecord>& runs,
                                std::span<const double> alphas, std::uint64_t seed) {
  RiskReport r;
  r.n_trials = static_cast<int>(runs.size());
  r.seed = seed;

  std::vector<double> costs;
  costs.reserve(runs.size());
  int successes = 0;
  double sparsity_sum = 0.0, proximity_sum = 0.0;
  for (const auto& run : runs) {
    costs.push_back(run.total_cost);
    if (run.succeeded) {
      ++successes;
      const State from = decode_state(mdp.schema(), run.initial);
      const State to = decode_state(mdp.schema(), run.final_state);
      const auto d = feature_distance(mdp.schema(), from, to);
      sparsity_sum += d.sparsity;
      proximity_sum += d.proximity;
    }
  }
  r.rho = static_cast<double>(successes) / static_cast<double>(runs.size());

  double mean = 0.0;
  for (double c : costs) mean += c;
  mean /= static_cast<double>(costs.size());
  double var = 0.0;
  for (double c : costs) var += (c - mean) * (c - mean);
  var /= static_cast<double>(costs.size());  // population variance
  r.mu = mean;
  r.sigma2 = var;

  for (double alpha : alphas) {
    r.var_at[alpha] = var_alpha(costs, alpha);
    r.cvar_at[alpha] = cvar_alpha(costs, alpha);
  }
  if (successes > 0) {
    r.sparsity = sparsity_sum / successes;
    r.proximity = proximity_sum / successes;
  }
  return r;
}

}  // namespace

EvaluationResult evaluate(const RecourseMdp& mdp, const PolicyTable& policy,
                          std::span<const StateIndex> instances, int n_trials,
                          std::span<const double> alphas, std::uint64_t seed, int jobs) {
  if (instances.empty()) throw DataError("evaluate: no instances");
  if (n_trials < 1) throw ConfigError("evaluate: n_trials must be positive");
  for (double alpha : alphas)
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("evaluate: alpha outside (0,1)");

  EvaluationResult result;
  std::vector<StateIndex> active;
  for (StateIndex s : instances) {
    if (s >= mdp.state_count()) throw SchemaError("instance index out of range");
    if (mdp.is_goal(s)) {
      result.skipped.push_back(s);
    } else {
      active.push_back(s);
    }
  }
  if (active.empty()) throw DataError("evaluate: every instance is already favorable");

  result.instances = active;
  result.per_instance.resize(active.size());

  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      // Documented substream contract: per-instance stream is seed + position.
      CounterRng rng(substream_seed(seed, i));
      std::vector<RolloutRecord> runs;
      runs.reserve(n_trials);
      for (int t = 0; t < n_trials; ++t) runs.push_back(rollout(mdp, policy, active[i], rng));
      result.per_instance[i] = report_from_rollouts(mdp, runs, alphas, seed);
    }
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers =
      jobs > 0 ? std::min<unsigned>(jobs, hw) : hw;
  if (workers <= 1 || active.size() < 32) {
    run_range(0, active.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (active.size() + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(begin + chunk, active.size());
      if (begin >= end) break;
      pool.emplace_back(run_range, begin, end);
    }
    for (auto& t : pool) t.join();
  }

  // Unweighted mean across instances. Sparsity/proximity average only the
  // instances that had at least one success; CVaR only where defined.
  RiskReport agg;
  agg.n_trials = n_trials;
  agg.seed = seed;
  const double n = static_cast<double>(active.size());
  std::map<double, std::pair<double, int>> cvar_acc;
  double spars_acc = 0.0, prox_acc = 0.0;
  int spars_n = 0;
  for (const auto& r : result.per_instance) {
    agg.rho += r.rho / n;
    agg.mu += r.mu / n;
    agg.sigma2 += r.sigma2 / n;
    for (const auto& [alpha, v] : r.var_at) agg.var_at[alpha] += v / n;
    for (const auto& [alpha, cv] : r.cvar_at) {
      if (cv) {
        cvar_acc[alpha].first += *cv;
        cvar_acc[alpha].second += 1;
      } else {
        cvar_acc.try_emplace(alpha, 0.0, 0);
      }
    }
    if (!std::isnan(r.sparsity)) {
      spars_acc += r.sparsity;
      prox_acc += r.proximity;
      ++spars_n;
    }
  }
  for (const auto& [alpha, acc] : cvar_acc) {
    if (acc.second > 0)
      agg.cvar_at[alpha] = acc.first / acc.second;
    else
      agg.cvar_at[alpha] = std::nullopt;
  }
  if (spars_n > 0) {
    agg.sparsity = spars_acc / spars_n;
    agg.proximity = prox_acc / spars_n;
  }
  result.aggregate = agg;
  return result;
}

namespace {

void add_measure(DisparityReport& report, const std::string& name, double a, double b,
                 const std::vector<double>& sample_a, const std::vector<double>& sample_b) {
  MeasureDisparity m;
  m.measure = name;
  m.group_a = a;
  m.group_b = b;
  m.delta = std::abs(a - b);
  if (!sample_a.empty() && !sample_b.empty()) {
    const auto test = mann_whitney_u(sample_a, sample_b);
    m.u_statistic = test.u;
    m.p_value = test.p_value;
  }
  report.measures.push_back(std::move(m));
}

}  // namespace

DisparityReport disparity(const EvaluationResult& a, const EvaluationResult& b,
                          const std::string& label_a, const std::string& label_b) {
  // The alpha sets must match exactly.
  {
    auto keys = [](const RiskReport& r) {
      std::vector<double> k;
      for (const auto& [alpha, v] : r.var_at) k.push_back(alpha);
      return k;
    };
    if (keys(a.aggregate) != keys(b.aggregate))
      throw ConfigError("disparity: evaluations use different alpha sets");
  }

  DisparityReport report;
  report.group_a_label = label_a;
  report.group_b_label = label_b;
  report.aggregate_a = a.aggregate;
  report.aggregate_b = b.aggregate;

  auto collect = [](const EvaluationResult& r, auto getter) {
    std::vector<double> out;
    out.reserve(r.per_instance.size());
    for (const auto& p : r.per_instance) {
      const double v = getter(p);
      if (!std::isnan(v)) out.push_back(v);
    }
    return out;
  };

  add_measure(report, "rho", a.aggregate.rho, b.aggregate.rho,
              collect(a, [](const RiskReport& r) { return r.rho; }),
              collect(b, [](const RiskReport& r) { return r.rho; }));
  add_measure(report, "mu_cost", a.aggregate.mu, b.aggregate.mu,
              collect(a, [](const RiskReport& r) { return r.mu; }),
              collect(b, [](const RiskReport& r) { return r.mu; }));
  add_measure(report, "sigma2_cost", a.aggregate.sigma2, b.aggregate.sigma2,
              collect(a, [](const RiskReport& r) { return r.sigma2; }),
              collect(b, [](const RiskReport& r) { return r.sigma2; }));
  for (const auto& [alpha, va] : a.aggregate.var_at) {
    const auto tag = std::to_string(static_cast<int>(std::lround(alpha * 100)));
    add_measure(report, "var_" + tag, va, b.aggregate.var_at.at(alpha),
                collect(a, [alpha](const RiskReport& r) { return r.var_at.at(alpha); }),
                collect(b, [alpha](const RiskReport& r) { return r.var_at.at(alpha); }));
    const auto& ca = a.aggregate.cvar_at.at(alpha);
    const auto& cb = b.aggregate.cvar_at.at(alpha);
    auto cvar_of = [alpha](const RiskReport& r) {
      const auto& c = r.cvar_at.at(alpha);
      return c ? *c : std::numeric_limits<double>::quiet_NaN();
    };
    add_measure(report, "cvar_" + tag, ca.value_or(std::numeric_limits<double>::quiet_NaN()),
                cb.value_or(std::numeric_limits<double>::quiet_NaN()), collect(a, cvar_of),
                collect(b, cvar_of));
  }
  add_measure(report, "sparsity", a.aggregate.sparsity, b.aggregate.sparsity,
              collect(a, [](const RiskReport& r) { return r.sparsity; }),
              collect(b, [](const RiskReport& r) { return r.sparsity; }));
  add_measure(report, "proximity", a.aggregate.proximity, b.aggregate.proximity,
              collect(a, [](const RiskReport& r) { return r.proximity; }),
              collect(b, [](const RiskReport& r) { return r.proximity; }));
  return report;
}

}  // namespace safear
