#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "safear/mdp.hpp"

namespace safear {

/// How the deviation penalty in the risk-sensitive Q-value is computed:
/// full_sigma penalizes the standard deviation over all successor branches,
/// lower_partial only over branches whose value falls below the branch mean.
enum class DeviationMode { full_sigma, lower_partial };

std::string to_string(DeviationMode mode);
DeviationMode deviation_mode_from_string(const std::string& s);

struct SolverConfig {
  double beta = 0.0;  // risk-aversion level; 0 recovers risk-neutral value iteration
  int horizon = 0;    // 0 = use the MDP's horizon
  DeviationMode deviation_mode = DeviationMode::full_sigma;
  int jobs = 1;       // parallel state sweep within one horizon step
};

/// Per-step policy and value tables.
///
/// pi[h][s] holds an action id for h in 1..H (kNoopAction at goals,
/// kDeadEndAction where no action applies, kUnvisitedAction in episodic
/// output). values[h][s] holds the internal reward-convention value
/// (non-positive; step rewards are negated costs) for h in 1..H+1 with
/// values[H+1] identically zero. User-facing reports negate back to costs.
class PolicyTable {
 public:
  PolicyTable() = default;
  PolicyTable(int horizon, std::uint64_t n_states, std::int32_t fill_action = kUnvisitedAction);

  int horizon() const { return horizon_; }
  std::uint64_t state_count() const { return n_states_; }

  std::int32_t action_at(int h, StateIndex s) const { return pi_[slot(h, s)]; }
  void set_action(int h, StateIndex s, std::int32_t a) { pi_[slot(h, s)] = a; }

  double value_at(int h, StateIndex s) const { return values_[vslot(h, s)]; }
  void set_value(int h, StateIndex s, double v) { values_[vslot(h, s)] = v; }

  std::span<const double> values_at_step(int h) const {
    return {values_.data() + vslot(h, 0), static_cast<std::size_t>(n_states_)};
  }

  const std::vector<std::int32_t>& raw_pi() const { return pi_; }
  const std::vector<double>& raw_values() const { return values_; }
  std::vector<std::int32_t>& raw_pi() { return pi_; }
  std::vector<double>& raw_values() { return values_; }

  bool operator==(const PolicyTable& other) const = default;

 private:
  int horizon_ = 0;
  std::uint64_t n_states_ = 0;
  std::vector<std::int32_t> pi_;   // [H][S]
  std::vector<double> values_;     // [H+1][S], last slice all zeros

  std::size_t slot(int h, StateIndex s) const {
    return static_cast<std::size_t>(h - 1) * n_states_ + s;
  }
  std::size_t vslot(int h, StateIndex s) const {
    return static_cast<std::size_t>(h - 1) * n_states_ + s;
  }
};

/// Risk-sensitive Q-value of one (state, action) pair given the values of the
/// next step: mean of branch values minus beta times their (full or lower
/// partial) standard deviation. Branch values are -cost + next value.
double q_value(const RecourseMdp& mdp, StateIndex s, std::int32_t action,
               std::span<const double> next_values, double beta, DeviationMode mode);

struct SolveStats {
  std::uint64_t dead_end_states = 0;
  double wall_seconds = 0.0;
};

/// Greedy risk-sensitive value iteration: one backward sweep over the horizon,
/// choosing the argmax-Q action per state and step (ties resolve to the lowest
/// action id). Deterministic; independent states within a step may be swept in
/// parallel. Dead-end states receive a self-loop charged at the cheapest
/// action cost so the recursion stays total.
PolicyTable g_rsvi(const RecourseMdp& mdp, const SolverConfig& config,
                   SolveStats* stats = nullptr);

struct EpisodicConfig {
  int max_episodes = 10000;
  double epsilon_decay = 0.9995;     // epsilon_k = initial * decay^k, k = 0-based episode
  double initial_epsilon = 1.0;
  std::uint64_t rng_seed = 0;
  StateIndex initial_state = 0;
};

struct EpisodicResult {
  PolicyTable policy;                 // kUnvisitedAction where never updated
  std::vector<double> episode_costs;  // realized total cost of each episode
};

/// Episodic variant: epsilon-greedy forward rollouts from one initial state,
/// then exact model-based backups over the visited (state, action) pairs.
/// Q-values start at zero (optimistic under negative rewards) and unvisited
/// pairs keep zero. Reproducible given the seed.
EpisodicResult g_rsevi(const RecourseMdp& mdp, const SolverConfig& config,
                       const EpisodicConfig& episodic);

}  // namespace safear
