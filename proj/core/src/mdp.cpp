#include "safear/mdp.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "safear/error.hpp"

namespace safear {

RecourseMdp::RecourseMdp(FeatureSchema schema, std::vector<ActionSpec> actions,
                         std::shared_ptr<const DecisionModel> model, int horizon,
                         std::optional<std::vector<StateIndex>> goal_restriction)
    : schema_(std::move(schema)),
      actions_(std::move(actions)),
      model_(std::move(model)),
      horizon_(horizon) {
  if (!model_) throw ConfigError("recourse MDP needs a decision model");
  if (horizon_ < 1) throw ConfigError("horizon must be at least 1");
  if (actions_.empty()) throw ConfigError("recourse MDP needs at least one action");

  auto check_prob = [](double p, const std::string& where) {
    if (!(p > 0.0 && p <= 1.0))
      throw ConfigError(where + ": success probability must lie in (0,1]");
  };

  min_action_cost_ = std::numeric_limits<double>::infinity();
  for (const auto& a : actions_) {
    if (a.name.empty()) throw ConfigError("action with empty name");
    if (!(a.cost > 0.0)) throw ConfigError("action '" + a.name + "': cost must be positive");
    min_action_cost_ = std::min(min_action_cost_, a.cost);

    if (a.primary.feature >= schema_.feature_count())
      throw ConfigError("action '" + a.name + "': unknown primary feature index");
    const auto& feat = schema_.feature(a.primary.feature);
    if (feat.mutability != Mutability::actionable)
      throw ConfigError("action '" + a.name + "': primary feature '" + feat.name +
                        "' is not actionable");
    if (a.primary.mode == EffectMode::set_level &&
        a.primary.target_level >= feat.levels.size())
      throw ConfigError("action '" + a.name + "': set target level out of range");
    if (a.primary.mode == EffectMode::increment && feat.kind != FeatureKind::ordinal)
      throw ConfigError("action '" + a.name + "': increment needs an ordinal feature");

    if (a.per_target.empty()) {
      check_prob(a.success_prob, "action '" + a.name + "'");
    } else {
      if (a.per_target.size() != feat.levels.size())
        throw ConfigError("action '" + a.name +
                          "': per-target probabilities must cover every level");
      bool any = false;
      for (const auto& p : a.per_target)
        if (p) {
          check_prob(*p, "action '" + a.name + "'");
          any = true;
        }
      if (!any)
        throw ConfigError("action '" + a.name + "': per-target map has no reachable target");
    }

    auto check_effects = [&](const std::vector<FeatureEffect>& effects, const char* label) {
      for (const auto& e : effects) {
        if (e.feature >= schema_.feature_count())
          throw ConfigError("action '" + a.name + "': unknown " + label + " feature index");
        const auto& side = schema_.feature(e.feature);
        if (side.mutability == Mutability::immutable)
          throw ConfigError("action '" + a.name + "': " + label + " targets immutable feature '" +
                            side.name + "'");
        if (e.mode == EffectMode::set_level && e.target_level >= side.levels.size())
          throw ConfigError("action '" + a.name + "': " + label + " set level out of range");
        if (e.mode == EffectMode::increment && side.kind != FeatureKind::ordinal)
          throw ConfigError("action '" + a.name + "': " + label +
                            " increment needs an ordinal feature");
      }
    };
    check_effects(a.side_effects, "side-effect");
    check_effects(a.fail_effects, "fail-effect");
  }

  if (goal_restriction) {
    goal_restriction_.emplace();
    for (StateIndex s : *goal_restriction) {
      if (s >= schema_.cardinality())
        throw ConfigError("goal restriction contains out-of-range state index");
      goal_restriction_->insert(s);
    }
  }

  // Eager goal memo; single-threaded here so all later reads are plain loads.
  const std::uint64_t n = schema_.cardinality();
  goal_.assign(n, 0);
  State scratch;
  scratch.levels.resize(schema_.feature_count());
  for (StateIndex s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < schema_.feature_count(); ++i)
      scratch.levels[i] = schema_.level_at(s, i);
    if (model_->classify(scratch) == Outcome::favorable &&
        (!goal_restriction_ || goal_restriction_->count(s) > 0)) {
      goal_[s] = 1;
      ++goal_count_;
    }
  }
}

void RecourseMdp::applicable_actions(StateIndex s, std::vector<std::int32_t>& out) const {
  out.clear();
  if (is_goal(s)) {
    out.push_back(kNoopAction);
    return;
  }
  for (std::size_t id = 0; id < actions_.size(); ++id) {
    if (is_applicable(s, static_cast<std::int32_t>(id))) out.push_back(static_cast<std::int32_t>(id));
  }
}

std::vector<std::int32_t> RecourseMdp::applicable_actions(StateIndex s) const {
  std::vector<std::int32_t> out;
  applicable_actions(s, out);
  return out;
}

bool RecourseMdp::is_applicable(StateIndex s, std::int32_t action) const {
  if (action == kNoopAction) return is_goal(s);
  if (action < 0 || static_cast<std::size_t>(action) >= actions_.size()) return false;
  if (is_goal(s)) return false;
  const auto& a = actions_[action];
  const std::uint32_t current = schema_.level_at(s, a.primary.feature);
  if (a.primary.mode == EffectMode::set_level) return current != a.primary.target_level;
  // Ordinal increment: one level up, and the target must carry a probability
  // when the action uses a per-target map.
  const auto top =
      static_cast<std::uint32_t>(schema_.feature(a.primary.feature).levels.size()) - 1;
  if (current >= top) return false;
  if (!a.per_target.empty() && !a.per_target[current + 1]) return false;
  return true;
}

StateIndex RecourseMdp::apply_effects(StateIndex s, const FeatureEffect& primary,
                                      const std::vector<FeatureEffect>& extras) const {
  StateIndex out = s;
  auto apply = [&](const FeatureEffect& e, bool saturating) {
    const std::uint32_t current = schema_.level_at(out, e.feature);
    if (e.mode == EffectMode::set_level) {
      out = schema_.with_level(out, e.feature, e.target_level);
    } else {
      const auto top =
          static_cast<std::uint32_t>(schema_.feature(e.feature).levels.size()) - 1;
      if (current < top) {
        out = schema_.with_level(out, e.feature, current + 1);
      } else if (!saturating) {
        throw std::logic_error("primary increment beyond top level");
      }
      // Saturating increments stay at the top level.
    }
  };
  apply(primary, false);
  for (const auto& e : extras) apply(e, true);
  return out;
}

void RecourseMdp::transitions(StateIndex s, std::int32_t action,
                              std::vector<TransitionOutcome>& out) const {
  out.clear();
  if (action == kNoopAction) {
    if (!is_goal(s)) throw std::logic_error("noop requested at a non-goal state");
    out.push_back({s, 1.0, 0.0});
    return;
  }
  if (!is_applicable(s, action))
    throw std::logic_error("action not applicable at state " + std::to_string(s));

  const auto& a = actions_[action];
  double p = a.success_prob;
  if (!a.per_target.empty()) {
    const std::uint32_t target = schema_.level_at(s, a.primary.feature) + 1;
    p = *a.per_target[target];
  }

  const StateIndex success = apply_effects(s, a.primary, a.side_effects);
  if (p >= 1.0) {
    out.push_back({success, 1.0, a.cost});
    return;
  }
  StateIndex fail = s;
  if (!a.fail_effects.empty()) {
    // Explicit worse-state failure branch (hand-written configs only).
    fail = s;
    for (const auto& e : a.fail_effects) {
      const std::uint32_t current = schema_.level_at(fail, e.feature);
      if (e.mode == EffectMode::set_level) {
        fail = schema_.with_level(fail, e.feature, e.target_level);
      } else {
        const auto top =
            static_cast<std::uint32_t>(schema_.feature(e.feature).levels.size()) - 1;
        if (current < top) fail = schema_.with_level(fail, e.feature, current + 1);
      }
    }
  }
  if (fail == success) {
    out.push_back({success, 1.0, a.cost});
    return;
  }
  out.push_back({success, p, a.cost});
  out.push_back({fail, 1.0 - p, a.cost});
}

std::vector<TransitionOutcome> RecourseMdp::transitions(StateIndex s, std::int32_t action) const {
  std::vector<TransitionOutcome> out;
  transitions(s, action, out);
  return out;
}

}  // namespace safear
