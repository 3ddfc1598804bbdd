#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "safear/decision.hpp"
#include "safear/schema.hpp"

namespace safear {

enum class EffectMode { set_level, increment };

struct FeatureEffect {
  std::size_t feature = 0;
  EffectMode mode = EffectMode::increment;
  std::uint32_t target_level = 0;  // set_level only
};

/// One recourse action: a positive cost paid on every attempt, a primary
/// effect on a single actionable feature, a success probability (scalar or
/// per-target-level), side effects applied on the success branch, and an
/// optional explicit failure branch (default: the state stays the same).
struct ActionSpec {
  std::string name;
  double cost = 1.0;
  FeatureEffect primary;
  double success_prob = 1.0;                             // scalar form
  std::vector<std::optional<double>> per_target;         // indexed by target level; empty = scalar
  std::vector<FeatureEffect> side_effects;               // success branch only; increments saturate
  std::vector<FeatureEffect> fail_effects;               // failure branch; empty = stay
};

struct TransitionOutcome {
  StateIndex successor = 0;
  double probability = 1.0;
  double step_cost = 0.0;
};

/// Sentinel action ids used in policies alongside indices into the action list.
constexpr std::int32_t kNoopAction = -1;      // zero-cost self-loop at goal states
constexpr std::int32_t kUnvisitedAction = -2; // episodic solver never visited the slot
constexpr std::int32_t kDeadEndAction = -3;   // non-goal state with no applicable action

/// Finite-horizon recourse MDP over a factored discrete state space.
///
/// Goal states (favorable under the decision model, intersected with the
/// goal restriction when present) are absorbing: their only action is a
/// zero-cost self-loop. Goal membership is memoized eagerly at construction
/// so all later queries are lock-free reads.
class RecourseMdp {
 public:
  RecourseMdp(FeatureSchema schema, std::vector<ActionSpec> actions,
              std::shared_ptr<const DecisionModel> model, int horizon,
              std::optional<std::vector<StateIndex>> goal_restriction = std::nullopt);

  const FeatureSchema& schema() const { return schema_; }
  const std::vector<ActionSpec>& actions() const { return actions_; }
  const ActionSpec& action(std::int32_t id) const { return actions_.at(id); }
  const DecisionModel& model() const { return *model_; }
  int horizon() const { return horizon_; }
  std::uint64_t state_count() const { return schema_.cardinality(); }
  double min_action_cost() const { return min_action_cost_; }
  bool has_goal_restriction() const { return goal_restriction_.has_value(); }

  bool is_goal(StateIndex s) const { return goal_[s] != 0; }
  std::uint64_t goal_count() const { return goal_count_; }

  /// Action ids applicable at s: {kNoopAction} at goal states, otherwise all
  /// actions whose primary effect is realizable. May be empty (dead end) only
  /// under a goal restriction.
  std::vector<std::int32_t> applicable_actions(StateIndex s) const;
  void applicable_actions(StateIndex s, std::vector<std::int32_t>& out) const;
  bool is_applicable(StateIndex s, std::int32_t action) const;

  /// Probability-weighted successor outcomes of one action attempt. The cost
  /// is charged on both branches; outcomes always sum to probability 1.
  std::vector<TransitionOutcome> transitions(StateIndex s, std::int32_t action) const;
  void transitions(StateIndex s, std::int32_t action, std::vector<TransitionOutcome>& out) const;

 private:
  FeatureSchema schema_;
  std::vector<ActionSpec> actions_;
  std::shared_ptr<const DecisionModel> model_;
  int horizon_;
  std::optional<std::unordered_set<StateIndex>> goal_restriction_;
  std::vector<std::uint8_t> goal_;
  std::uint64_t goal_count_ = 0;
  double min_action_cost_ = 0.0;

  StateIndex apply_effects(StateIndex s, const FeatureEffect& primary,
                           const std::vector<FeatureEffect>& extras) const;
};

}  // namespace safear
