#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "safear/mdp.hpp"
#include "safear/solver.hpp"

namespace safear {

/// Exact finite-support distribution of the total recourse cost.
struct CostDistribution {
  std::vector<std::pair<double, double>> atoms;  // (cost, probability), cost ascending

  double total_probability() const;
  double mean() const;
  double variance() const;
  double stddev() const;
  /// Internal-convention objective to maximize: -(mean + beta * stddev).
  double objective(double beta) const { return -(mean() + beta * stddev()); }
};

/// Exact total-cost distribution of a fixed policy from one initial state,
/// by depth-limited enumeration of the transition tree. Unvisited policy
/// slots fall back to the lowest applicable action id, matching rollout.
CostDistribution exact_cost_distribution(const RecourseMdp& mdp, const PolicyTable& policy,
                                         StateIndex initial, int horizon = 0);

struct EnumerationResult {
  PolicyTable policy;          // defined on reachable slots, kUnvisitedAction elsewhere
  CostDistribution distribution;
  double objective = 0.0;      // best mean-minus-beta-sigma value at the initial state
  std::uint64_t policies_evaluated = 0;
};

/// Exhaustive search over all per-step action assignments on the slots
/// reachable from the initial state; exact maximizer of the mean-variance
/// objective there. Greedy solvers may tie but never beat it. Refuses inputs
/// beyond |S| <= 8, |A| <= 3, H <= 4 (and an internal assignment-count cap).
EnumerationResult enumerate_policies_oracle(const RecourseMdp& mdp, int horizon,
                                            StateIndex initial, double beta);

}  // namespace safear
