#include "safear/viz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "safear/error.hpp"

namespace safear {

namespace {

constexpr double kMinProbability = 1e-9;

struct TraceBuilder {
  const RecourseMdp& mdp;
  const PolicyTable& policy;
  int horizon;
  std::vector<OutcomeTrace> traces;
  double enumerated = 0.0;

  std::vector<std::int32_t> actions;
  std::vector<double> cumulative;

  void walk(StateIndex s, int h, double cost, double prob) {
    if (mdp.is_goal(s) || h > horizon) {
      OutcomeTrace t;
      t.actions = actions;
      t.cumulative_cost = cumulative;
      t.probability = prob;
      t.total_cost = cost;
      t.reaches_goal = mdp.is_goal(s);
      enumerated += prob;
      traces.push_back(std::move(t));
      return;
    }
    std::int32_t action = policy.action_at(h, s);
    if (action == kUnvisitedAction) {
      const auto applicable = mdp.applicable_actions(s);
      action = applicable.empty() ? kDeadEndAction : applicable.front();
    }
    if (action == kDeadEndAction) {
      // Absorbing dead end: one terminal trace with the remaining self-loop cost.
      OutcomeTrace t;
      t.actions = actions;
      t.cumulative_cost = cumulative;
      const double rest = mdp.min_action_cost() * (horizon - h + 1);
      t.actions.push_back(kDeadEndAction);
      t.cumulative_cost.push_back(cost + rest);
      t.probability = prob;
      t.total_cost = cost + rest;
      t.reaches_goal = false;
      enumerated += prob;
      traces.push_back(std::move(t));
      return;
    }
    for (const auto& o : mdp.transitions(s, action)) {
      const double p = prob * o.probability;
      if (p < kMinProbability) {
        enumerated += p;  // counted toward the remainder, not expanded
        continue;
      }
      actions.push_back(action);
      cumulative.push_back(cost + o.step_cost);
      walk(o.successor, h + 1, cost + o.step_cost, p);
      actions.pop_back();
      cumulative.pop_back();
    }
  }
};

}  // namespace

TraceFigure enumerate_traces(const RecourseMdp& mdp, const PolicyTable& policy,
                             StateIndex initial, int top_k) {
  if (top_k < 1) throw ConfigError("top_k must be at least 1");
  TraceBuilder builder{mdp, policy, policy.horizon(), {}, 0.0, {}, {}};
  builder.walk(initial, 1, 0.0, 1.0);

  auto& traces = builder.traces;
  std::sort(traces.begin(), traces.end(), [](const OutcomeTrace& a, const OutcomeTrace& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    if (a.total_cost != b.total_cost) return a.total_cost < b.total_cost;
    return a.actions < b.actions;
  });

  TraceFigure figure;
  figure.enumerated_probability = builder.enumerated;
  double kept = 0.0;
  for (const auto& t : traces) {
    if (static_cast<int>(figure.traces.size()) >= top_k) break;
    figure.traces.push_back(t);
    kept += t.probability;
  }
  figure.remainder_probability = 1.0 - kept;
  return figure;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fmt_prob(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_trace_svg(const RecourseMdp& mdp, const std::vector<TraceFigure>& panels) {
  constexpr double kWidth = 760.0;
  constexpr double kLeft = 140.0, kRight = 40.0;
  constexpr double kRowHeight = 34.0, kPanelHeader = 36.0, kPanelGap = 24.0;

  double max_cost = 1.0;
  for (const auto& panel : panels)
    for (const auto& t : panel.traces) max_cost = std::max(max_cost, t.total_cost);
  const double x_scale = (kWidth - kLeft - kRight) / max_cost;

  double height = 20.0;
  for (const auto& panel : panels)
    height += kPanelHeader + (static_cast<double>(panel.traces.size()) + 1.0) * kRowHeight +
              kPanelGap;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\""
      << fmt(height) << "\" viewBox=\"0 0 " << fmt(kWidth) << " " << fmt(height) << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  double y = 20.0;
  for (const auto& panel : panels) {
    svg << "<text x=\"" << fmt(kLeft) << "\" y=\"" << fmt(y + 14.0)
        << "\" font-family=\"monospace\" font-size=\"14\" fill=\"#222\">"
        << escape_xml(panel.label) << "</text>\n";
    y += kPanelHeader;

    for (const auto& t : panel.traces) {
      const double mid = y + kRowHeight / 2.0;
      const double stroke = 1.0 + 14.0 * t.probability;
      const char* color = t.reaches_goal ? "#2a9d8f" : "#e76f51";

      svg << "<text x=\"8\" y=\"" << fmt(mid + 4.0)
          << "\" font-family=\"monospace\" font-size=\"11\" fill=\"#444\">p="
          << fmt_prob(t.probability) << "</text>\n";

      double x = kLeft;
      double prev_cost = 0.0;
      for (std::size_t i = 0; i < t.actions.size(); ++i) {
        const double x_next = kLeft + t.cumulative_cost[i] * x_scale;
        svg << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(mid) << "\" x2=\"" << fmt(x_next)
            << "\" y2=\"" << fmt(mid) << "\" stroke=\"" << color << "\" stroke-width=\""
            << fmt(stroke) << "\" stroke-linecap=\"round\"/>\n";
        const std::string label = t.actions[i] == kDeadEndAction
                                      ? std::string("(stuck)")
                                      : mdp.action(t.actions[i]).name;
        svg << "<text x=\"" << fmt((x + x_next) / 2.0) << "\" y=\"" << fmt(mid - stroke / 2.0 - 3.0)
            << "\" font-family=\"monospace\" font-size=\"9\" text-anchor=\"middle\" fill=\"#333\">"
            << escape_xml(label) << "</text>\n";
        x = x_next;
        prev_cost = t.cumulative_cost[i];
      }
      (void)prev_cost;
      if (t.reaches_goal) {
        svg << "<circle cx=\"" << fmt(x + 6.0) << "\" cy=\"" << fmt(mid)
            << "\" r=\"4\" fill=\"#2a9d8f\"/>\n";
      } else {
        svg << "<text x=\"" << fmt(x + 4.0) << "\" y=\"" << fmt(mid + 4.0)
            << "\" font-family=\"monospace\" font-size=\"12\" fill=\"#e76f51\">x</text>\n";
      }
      svg << "<text x=\"" << fmt(kWidth - kRight + 4.0) << "\" y=\"" << fmt(mid + 4.0)
          << "\" font-family=\"monospace\" font-size=\"10\" fill=\"#444\">"
          << fmt(t.total_cost) << "</text>\n";
      y += kRowHeight;
    }

    // Remainder row keeps the probability ledger complete.
    const double mid = y + kRowHeight / 2.0;
    svg << "<text x=\"8\" y=\"" << fmt(mid + 4.0)
        << "\" font-family=\"monospace\" font-size=\"11\" fill=\"#888\">other outcomes p="
        << fmt_prob(panel.remainder_probability) << "</text>\n";
    y += kRowHeight + kPanelGap;
  }

  svg << "</svg>\n";
  return svg.str();
}

}  // namespace safear
