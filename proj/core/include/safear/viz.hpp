#pragma once

#include <string>
#include <vector>

#include "safear/mdp.hpp"
#include "safear/solver.hpp"

namespace safear {

/// One enumerated policy outcome: the action path, its exact probability,
/// cumulative cost after each step, and whether it ends in a goal state.
struct OutcomeTrace {
  std::vector<std::int32_t> actions;
  std::vector<double> cumulative_cost;
  double probability = 0.0;
  double total_cost = 0.0;
  bool reaches_goal = false;
};

/// Traces sorted by probability (descending), truncated at top_k, with the
/// left-over probability mass kept for the "other outcomes" remainder.
struct TraceFigure {
  std::string label;
  std::vector<OutcomeTrace> traces;
  double remainder_probability = 0.0;
  double enumerated_probability = 0.0;  // before truncation; 1 up to float error
};

/// Exact depth-limited enumeration of the rollout tree under a fixed policy.
/// Deterministic: ties sort by cost, then by action path.
TraceFigure enumerate_traces(const RecourseMdp& mdp, const PolicyTable& policy,
                             StateIndex initial, int top_k);

/// Deterministic SVG: one horizontal trace per outcome, x-extent proportional
/// to cumulative cost, stroke width to probability; goal/non-goal end markers;
/// multiple panels stack vertically.
std::string render_trace_svg(const RecourseMdp& mdp, const std::vector<TraceFigure>& panels);

}  // namespace safear
