#include "safear/policy_enum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "safear/error.hpp"

namespace safear {

double CostDistribution::total_probability() const {
  double p = 0.0;
  for (const auto& [c, q] : atoms) p += q;
  return p;
}

double CostDistribution::mean() const {
  double m = 0.0;
  for (const auto& [c, q] : atoms) m += c * q;
  return m;
}

double CostDistribution::variance() const {
  const double m = mean();
  double v = 0.0;
  for (const auto& [c, q] : atoms) v += q * (c - m) * (c - m);
  return v;
}

double CostDistribution::stddev() const { return std::sqrt(variance()); }

namespace {

/// Looks up the step action for a state; resolves sentinels the same way a
/// Monte-Carlo rollout does.
std::int32_t resolve_action(const RecourseMdp& mdp, const PolicyTable& policy, int h,
                            StateIndex s) {
  std::int32_t action = policy.action_at(h, s);
  if (action == kUnvisitedAction) {
    const auto applicable = mdp.applicable_actions(s);
    action = applicable.empty() ? kDeadEndAction : applicable.front();
  }
  return action;
}

struct DistributionCollector {
  std::map<double, double> by_cost;

  void add(double cost, double prob) { by_cost[cost] += prob; }

  CostDistribution take() {
    CostDistribution d;
    d.atoms.assign(by_cost.begin(), by_cost.end());
    return d;
  }
};

template <typename ActionLookup>
void walk(const RecourseMdp& mdp, int horizon, const ActionLookup& action_at, StateIndex s,
          int h, double cost, double prob, DistributionCollector& out) {
  if (mdp.is_goal(s) || h > horizon) {
    out.add(cost, prob);
    return;
  }
  const std::int32_t action = action_at(h, s);
  if (action == kDeadEndAction) {
    // Absorbing dead end: accrues the cheapest action cost for the remaining steps.
    out.add(cost + mdp.min_action_cost() * (horizon - h + 1), prob);
    return;
  }
  for (const auto& o : mdp.transitions(s, action)) {
    walk(mdp, horizon, action_at, o.successor, h + 1, cost + o.step_cost, prob * o.probability,
         out);
  }
}

}  // namespace

CostDistribution exact_cost_distribution(const RecourseMdp& mdp, const PolicyTable& policy,
                                         StateIndex initial, int horizon) {
  const int h_max = horizon > 0 ? horizon : policy.horizon();
  DistributionCollector collector;
  auto lookup = [&](int h, StateIndex s) { return resolve_action(mdp, policy, h, s); };
  walk(mdp, h_max, lookup, initial, 1, 0.0, 1.0, collector);
  return collector.take();
}

namespace {

constexpr std::uint64_t kMaxAssignments = 4'000'000;

struct Enumerator {
  const RecourseMdp& mdp;
  int horizon;
  StateIndex initial;
  double beta;

  // Reachable non-goal, non-dead-end states per step under the current
  // partial assignment, plus the chosen action per slot.
  std::vector<std::vector<StateIndex>> frontier;          // [h-1]
  std::vector<std::map<StateIndex, std::int32_t>> chosen; // [h-1]

  double best_objective = -std::numeric_limits<double>::infinity();
  CostDistribution best_distribution;
  std::vector<std::map<StateIndex, std::int32_t>> best_assignment;
  std::uint64_t evaluated = 0;

  void evaluate_assignment() {
    if (++evaluated > kMaxAssignments)
      throw RefusalError("policy enumeration exceeded the assignment cap");
    DistributionCollector collector;
    auto lookup = [&](int h, StateIndex s) {
      const auto& level = chosen[h - 1];
      auto it = level.find(s);
      return it == level.end() ? kDeadEndAction : it->second;
    };
    walk(mdp, horizon, lookup, initial, 1, 0.0, 1.0, collector);
    auto distribution = collector.take();
    const double objective = distribution.objective(beta);
    if (objective > best_objective) {
      best_objective = objective;
      best_distribution = std::move(distribution);
      best_assignment = chosen;
    }
  }

  /// Successor frontier of step h given that level's chosen actions.
  std::vector<StateIndex> next_frontier(int h) const {
    std::set<StateIndex> next;
    for (const auto& [s, action] : chosen[h - 1]) {
      for (const auto& o : mdp.transitions(s, action)) {
        if (!mdp.is_goal(o.successor) && !mdp.applicable_actions(o.successor).empty())
          next.insert(o.successor);
      }
    }
    return {next.begin(), next.end()};
  }

  void assign_level(int h, std::size_t slot) {
    const auto& states = frontier[h - 1];
    if (slot == states.size()) {
      if (h == horizon) {
        evaluate_assignment();
      } else {
        frontier[h] = next_frontier(h);
        assign_level(h + 1, 0);
      }
      return;
    }
    const StateIndex s = states[slot];
    for (std::int32_t action : mdp.applicable_actions(s)) {
      chosen[h - 1][s] = action;
      assign_level(h, slot + 1);
    }
    chosen[h - 1].erase(s);
  }

  void run() {
    frontier.assign(horizon, {});
    chosen.assign(horizon, {});
    if (mdp.is_goal(initial) || mdp.applicable_actions(initial).empty()) {
      // Nothing to choose; the single (empty) policy is optimal.
      evaluate_assignment();
      return;
    }
    frontier[0] = {initial};
    assign_level(1, 0);
  }
};

}  // namespace

EnumerationResult enumerate_policies_oracle(const RecourseMdp& mdp, int horizon,
                                            StateIndex initial, double beta) {
  const int h_max = horizon > 0 ? horizon : mdp.horizon();
  if (mdp.state_count() > 8) throw RefusalError("enumeration oracle limited to |S| <= 8");
  if (mdp.actions().size() > 3) throw RefusalError("enumeration oracle limited to |A| <= 3");
  if (h_max > 4) throw RefusalError("enumeration oracle limited to H <= 4");
  if (initial >= mdp.state_count()) throw ConfigError("initial state out of range");

  Enumerator e{mdp, h_max, initial, beta, {}, {}, {}, {}, {}, 0};
  e.run();

  EnumerationResult result;
  result.policy = PolicyTable(h_max, mdp.state_count(), kUnvisitedAction);
  if (!e.best_assignment.empty()) {
    for (int h = 1; h <= h_max; ++h)
      for (const auto& [s, action] : e.best_assignment[h - 1])
        result.policy.set_action(h, s, action);
  }
  result.distribution = std::move(e.best_distribution);
  result.objective = e.best_objective;
  result.policies_evaluated = e.evaluated;
  return result;
}

}  // namespace safear
