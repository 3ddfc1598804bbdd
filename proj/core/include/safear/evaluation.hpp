#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "safear/mdp.hpp"
#include "safear/rng.hpp"
#include "safear/solver.hpp"
#include "safear/stats.hpp"

namespace safear {

/// One simulated recourse attempt. Cost stops accruing at goal entry.
struct RolloutRecord {
  struct Step {
    StateIndex state;
    std::int32_t action;
    double step_cost;
    StateIndex next;
  };
  StateIndex initial = 0;
  std::vector<Step> trace;
  double total_cost = 0.0;
  bool succeeded = false;
  std::optional<int> steps_to_goal;
  StateIndex final_state = 0;
};

/// Simulates one policy execution from s0, sampling successors from the
/// transition model with the caller's stream. Unvisited policy slots fall
/// back to the lowest applicable action id; dead ends accrue the cheapest
/// action cost and stay put.
RolloutRecord rollout(const RecourseMdp& mdp, const PolicyTable& policy, StateIndex initial,
                      CounterRng& rng);

/// Smallest sample value whose empirical CDF reaches alpha (inclusive
/// quantile per the min-set definition). Throws on an empty sample.
double var_alpha(std::span<const double> costs, double alpha);

/// Mean of the samples strictly above VaR_alpha; absent when none exceed it.
std::optional<double> cvar_alpha(std::span<const double> costs, double alpha);

/// Risk measures of one cost sample (or an across-instance aggregate).
struct RiskReport {
  double rho = 0.0;      // success rate within the horizon
  double mu = 0.0;       // mean rollout cost
  double sigma2 = 0.0;   // population variance of rollout cost
  std::map<double, double> var_at;
  std::map<double, std::optional<double>> cvar_at;
  double sparsity = std::numeric_limits<double>::quiet_NaN();   // successful rollouts only
  double proximity = std::numeric_limits<double>::quiet_NaN();  // successful rollouts only
  int n_trials = 0;
  std::uint64_t seed = 0;
};

struct EvaluationResult {
  std::vector<StateIndex> instances;       // evaluated instances, input order
  std::vector<RiskReport> per_instance;
  RiskReport aggregate;                    // unweighted mean across instances
  std::vector<StateIndex> skipped;         // initially favorable, no recourse needed
};

/// Monte-Carlo evaluation: n_trials rollouts per instance on substream
/// seed + instance position, then an unweighted mean across instances.
/// Failed rollouts contribute their accrued cost to the cost sample but are
/// excluded from sparsity/proximity. Instances already favorable are skipped.
EvaluationResult evaluate(const RecourseMdp& mdp, const PolicyTable& policy,
                          std::span<const StateIndex> instances, int n_trials,
                          std::span<const double> alphas, std::uint64_t seed, int jobs = 1);

struct MeasureDisparity {
  std::string measure;
  double group_a = 0.0;
  double group_b = 0.0;
  double delta = 0.0;      // |group_a - group_b|
  double u_statistic = 0.0;
  double p_value = 1.0;
};

struct DisparityReport {
  std::string group_a_label;
  std::string group_b_label;
  RiskReport aggregate_a;
  RiskReport aggregate_b;
  std::vector<MeasureDisparity> measures;
};

/// Per-measure absolute differences between two group evaluations plus
/// Mann-Whitney U tests over the per-instance values. Both evaluations must
/// use the same alpha set.
DisparityReport disparity(const EvaluationResult& a, const EvaluationResult& b,
                          const std::string& label_a = "group_a",
                          const std::string& label_b = "group_b");

}  // namespace safear
