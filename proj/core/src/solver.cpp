#include "safear/solver.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>
#include <unordered_map>

#include "safear/error.hpp"
#include "safear/rng.hpp"

namespace safear {

std::string to_string(DeviationMode mode) {
  return mode == DeviationMode::full_sigma ? "full_sigma" : "lower_partial";
}

DeviationMode deviation_mode_from_string(const std::string& s) {
  if (s == "full_sigma") return DeviationMode::full_sigma;
  if (s == "lower_partial") return DeviationMode::lower_partial;
  throw ConfigError("unknown deviation mode: " + s);
}

PolicyTable::PolicyTable(int horizon, std::uint64_t n_states, std::int32_t fill_action)
    : horizon_(horizon), n_states_(n_states) {
  pi_.assign(static_cast<std::size_t>(horizon) * n_states, fill_action);
  values_.assign(static_cast<std::size_t>(horizon + 1) * n_states, 0.0);
}

double q_value(const RecourseMdp& mdp, StateIndex s, std::int32_t action,
               std::span<const double> next_values, double beta, DeviationMode mode) {
  static thread_local std::vector<TransitionOutcome> outcomes;
  mdp.transitions(s, action, outcomes);

  double mu = 0.0;
  for (const auto& o : outcomes) mu += o.probability * (-o.step_cost + next_values[o.successor]);
  if (beta == 0.0) return mu;

  // Two-pass probability-weighted deviation over the (at most two) branches.
  double var = 0.0;
  for (const auto& o : outcomes) {
    const double v = -o.step_cost + next_values[o.successor];
    if (mode == DeviationMode::lower_partial && !(v < mu)) continue;
    const double d = v - mu;
    var += o.probability * d * d;
  }
  return mu - beta * std::sqrt(var);
}

namespace {

/// One state's backup at step h: best Q over applicable actions, ties to the
/// lowest action id. Dead ends self-loop at the cheapest action cost.
inline void backup_state(const RecourseMdp& mdp, StateIndex s,
                         std::span<const double> next_values, double beta, DeviationMode mode,
                         std::vector<std::int32_t>& scratch_actions,
                         std::int32_t& best_action, double& best_value,
                         bool& dead_end) {
  dead_end = false;
  if (mdp.is_goal(s)) {
    best_action = kNoopAction;
    best_value = 0.0;
    return;
  }
  mdp.applicable_actions(s, scratch_actions);
  if (scratch_actions.empty()) {
    dead_end = true;
    best_action = kDeadEndAction;
    best_value = -mdp.min_action_cost() + next_values[s];
    return;
  }
  best_action = scratch_actions.front();
  best_value = q_value(mdp, s, best_action, next_values, beta, mode);
  for (std::size_t i = 1; i < scratch_actions.size(); ++i) {
    const double q = q_value(mdp, s, scratch_actions[i], next_values, beta, mode);
    if (q > best_value) {
      best_value = q;
      best_action = scratch_actions[i];
    }
  }
}

}  // namespace

PolicyTable g_rsvi(const RecourseMdp& mdp, const SolverConfig& config, SolveStats* stats) {
  const auto start = std::chrono::steady_clock::now();
  const int horizon = config.horizon > 0 ? config.horizon : mdp.horizon();
  if (!(config.beta >= 0.0)) throw ConfigError("beta must be non-negative");
  const std::uint64_t n = mdp.state_count();

  PolicyTable table(horizon, n);
  std::atomic<std::uint64_t> dead_ends{0};

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned jobs = config.jobs > 0 ? std::min<unsigned>(config.jobs, hw) : hw;

  for (int h = horizon; h >= 1; --h) {
    const auto next_values = table.values_at_step(h + 1);
    auto sweep = [&](StateIndex begin, StateIndex end) {
      std::vector<std::int32_t> scratch;
      std::uint64_t local_dead = 0;
      for (StateIndex s = begin; s < end; ++s) {
        std::int32_t action = kDeadEndAction;
        double value = 0.0;
        bool dead = false;
        backup_state(mdp, s, next_values, config.beta, config.deviation_mode, scratch, action,
                     value, dead);
        if (dead) ++local_dead;
        table.set_action(h, s, action);
        table.set_value(h, s, value);
      }
      dead_ends += local_dead;
    };
    if (jobs <= 1 || n < 4096) {
      sweep(0, n);
    } else {
      std::vector<std::thread> workers;
      const std::uint64_t chunk = (n + jobs - 1) / jobs;
      for (unsigned w = 0; w < jobs; ++w) {
        const StateIndex begin = w * chunk;
        const StateIndex end = std::min<std::uint64_t>(begin + chunk, n);
        if (begin >= end) break;
        workers.emplace_back(sweep, begin, end);
      }
      for (auto& t : workers) t.join();
    }
  }

  if (stats) {
    // Dead ends are counted once per step; report distinct states.
    stats->dead_end_states = dead_ends / static_cast<std::uint64_t>(horizon);
    stats->wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return table;
}

namespace {

/// Sparse per-(step, state) slot storage for the episodic solver.
struct EpisodicTables {
  std::size_t n_actions;
  // key: (h-1) * n_states + s
  std::unordered_map<std::uint64_t, std::vector<double>> q;  // per action, default 0
  std::unordered_map<std::uint64_t, double> v;               // default 0
  std::unordered_map<std::uint64_t, std::int32_t> pi;

  std::vector<double>& q_row(std::uint64_t key) {
    auto it = q.find(key);
    if (it == q.end()) it = q.emplace(key, std::vector<double>(n_actions, 0.0)).first;
    return it->second;
  }
  double value(std::uint64_t key) const {
    auto it = v.find(key);
    return it == v.end() ? 0.0 : it->second;
  }
};

}  // namespace

EpisodicResult g_rsevi(const RecourseMdp& mdp, const SolverConfig& config,
                       const EpisodicConfig& episodic) {
  const int horizon = config.horizon > 0 ? config.horizon : mdp.horizon();
  if (!(config.beta >= 0.0)) throw ConfigError("beta must be non-negative");
  if (episodic.max_episodes < 1) throw ConfigError("max_episodes must be positive");
  if (!(episodic.epsilon_decay > 0.0 && episodic.epsilon_decay < 1.0))
    throw ConfigError("epsilon_decay must lie in (0,1)");
  if (!(episodic.initial_epsilon > 0.0 && episodic.initial_epsilon <= 1.0))
    throw ConfigError("initial_epsilon must lie in (0,1]");
  if (episodic.initial_state >= mdp.state_count())
    throw ConfigError("initial state out of range");

  const std::uint64_t n = mdp.state_count();
  auto key_of = [n](int h, StateIndex s) {
    return static_cast<std::uint64_t>(h - 1) * n + s;
  };

  EpisodicTables tables{mdp.actions().size(), {}, {}, {}};
  CounterRng rng(episodic.rng_seed);
  std::vector<double> episode_costs;
  episode_costs.reserve(episodic.max_episodes);

  std::vector<std::int32_t> applicable;
  std::vector<TransitionOutcome> outcomes;
  struct Visit {
    StateIndex state;
    std::int32_t action;
  };
  std::vector<Visit> trajectory(horizon);

  double epsilon = episodic.initial_epsilon;
  for (int episode = 0; episode < episodic.max_episodes; ++episode) {
    // Forward pass: epsilon-greedy over current Q, sampling successors.
    StateIndex s = episodic.initial_state;
    double total_cost = 0.0;
    for (int h = 1; h <= horizon; ++h) {
      mdp.applicable_actions(s, applicable);
      std::int32_t action;
      if (applicable.empty()) {
        action = kDeadEndAction;
      } else if (applicable.front() == kNoopAction) {
        action = kNoopAction;
      } else if (rng.next_unit() < epsilon) {
        action = applicable[rng.next_below(applicable.size())];
      } else {
        const auto& q = tables.q_row(key_of(h, s));
        action = applicable.front();
        double best = q[action];
        for (std::size_t i = 1; i < applicable.size(); ++i) {
          if (q[applicable[i]] > best) {
            best = q[applicable[i]];
            action = applicable[i];
          }
        }
      }
      trajectory[h - 1] = {s, action};
      if (action == kNoopAction) {
        // Absorbed at a goal; stays for the rest of the episode at zero cost.
      } else if (action == kDeadEndAction) {
        total_cost += mdp.min_action_cost();
      } else {
        mdp.transitions(s, action, outcomes);
        total_cost += mdp.action(action).cost;
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
        s = next;
      }
    }
    episode_costs.push_back(total_cost);

    // Backward pass: exact model-based backups on the visited pairs.
    for (int h = horizon; h >= 1; --h) {
      const auto [vs, va] = trajectory[h - 1];
      const auto key = key_of(h, vs);
      if (va == kNoopAction || va == kDeadEndAction) {
        tables.v[key] = va == kNoopAction
                            ? 0.0
                            : -mdp.min_action_cost() + tables.value(key_of(h + 1, vs));
        tables.pi[key] = va;
        continue;
      }
      mdp.transitions(vs, va, outcomes);
      double mu = 0.0;
      for (const auto& o : outcomes)
        mu += o.probability * (-o.step_cost + tables.value(key_of(h + 1, o.successor)));
      double var = 0.0;
      for (const auto& o : outcomes) {
        const double v = -o.step_cost + tables.value(key_of(h + 1, o.successor));
        if (config.deviation_mode == DeviationMode::lower_partial && !(v < mu)) continue;
        const double d = v - mu;
        var += o.probability * d * d;
      }
      auto& q = tables.q_row(key);
      q[va] = mu - config.beta * std::sqrt(var);

      mdp.applicable_actions(vs, applicable);
      std::int32_t best_action = applicable.front();
      double best = q[best_action];
      for (std::size_t i = 1; i < applicable.size(); ++i) {
        if (q[applicable[i]] > best) {
          best = q[applicable[i]];
          best_action = applicable[i];
        }
      }
      tables.v[key] = best;
      tables.pi[key] = best_action;
    }

    epsilon *= episodic.epsilon_decay;
  }

  EpisodicResult result;
  result.policy = PolicyTable(horizon, n, kUnvisitedAction);
  for (const auto& [key, action] : tables.pi) {
    const int h = static_cast<int>(key / n) + 1;
    const StateIndex s = key % n;
    result.policy.set_action(h, s, action);
  }
  for (const auto& [key, value] : tables.v) {
    const int h = static_cast<int>(key / n) + 1;
    const StateIndex s = key % n;
    if (h <= horizon) result.policy.set_value(h, s, value);
  }
  result.episode_costs = std::move(episode_costs);
  return result;
}

}  // namespace safear
