#include "safear/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "safear/error.hpp"

namespace safear {

std::string format_double(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

namespace {

std::string alpha_tag(double alpha) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%d", static_cast<int>(std::lround(alpha * 100)));
  return buf;
}

void append_report_cells(std::ostringstream& out, const RiskReport& r,
                         const std::vector<double>& alphas) {
  out << format_double(r.rho) << "," << format_double(r.mu) << "," << format_double(r.sigma2);
  for (double alpha : alphas) {
    out << "," << format_double(r.var_at.at(alpha));
    const auto& cv = r.cvar_at.at(alpha);
    out << "," << (cv ? format_double(*cv) : "n/a");
  }
  out << "," << format_double(r.sparsity) << "," << format_double(r.proximity);
}

nlohmann::json report_json(const RiskReport& r, const std::vector<double>& alphas) {
  nlohmann::json j = {{"rho", r.rho},
                      {"mu_cost", r.mu},
                      {"sigma2_cost", r.sigma2},
                      {"n_trials", r.n_trials}};
  for (double alpha : alphas) {
    j["var_" + alpha_tag(alpha)] = r.var_at.at(alpha);
    const auto& cv = r.cvar_at.at(alpha);
    if (cv)
      j["cvar_" + alpha_tag(alpha)] = *cv;
    else
      j["cvar_" + alpha_tag(alpha)] = nullptr;
  }
  j["sparsity"] = std::isnan(r.sparsity) ? nlohmann::json(nullptr) : nlohmann::json(r.sparsity);
  j["proximity"] = std::isnan(r.proximity) ? nlohmann::json(nullptr) : nlohmann::json(r.proximity);
  return j;
}

}  // namespace

std::string evaluation_csv(const std::vector<PolicyEvaluation>& evaluations,
                           const std::vector<double>& alphas) {
  std::ostringstream out;
  out << "policy,instance,rho,mu_cost,sigma2_cost";
  for (double alpha : alphas) out << ",var_" << alpha_tag(alpha) << ",cvar_" << alpha_tag(alpha);
  out << ",sparsity,proximity\n";

  for (const auto& ev : evaluations) {
    for (std::size_t i = 0; i < ev.result.per_instance.size(); ++i) {
      out << ev.label << "," << ev.result.instances[i] << ",";
      append_report_cells(out, ev.result.per_instance[i], alphas);
      out << "\n";
    }
    out << ev.label << ",AGGREGATE,";
    append_report_cells(out, ev.result.aggregate, alphas);
    out << "\n";
  }
  return out.str();
}

nlohmann::json evaluation_json(const std::vector<PolicyEvaluation>& evaluations,
                               const std::vector<double>& alphas, const nlohmann::json& metadata) {
  nlohmann::json policies = nlohmann::json::array();
  for (const auto& ev : evaluations) {
    nlohmann::json per_instance = nlohmann::json::array();
    for (std::size_t i = 0; i < ev.result.per_instance.size(); ++i) {
      auto j = report_json(ev.result.per_instance[i], alphas);
      j["instance"] = ev.result.instances[i];
      per_instance.push_back(std::move(j));
    }
    nlohmann::json skipped = nlohmann::json::array();
    for (auto s : ev.result.skipped) skipped.push_back(s);
    policies.push_back({{"label", ev.label},
                        {"beta", ev.beta},
                        {"horizon", ev.horizon},
                        {"variant", ev.variant},
                        {"aggregate", report_json(ev.result.aggregate, alphas)},
                        {"per_instance", per_instance},
                        {"skipped_favorable_instances", skipped}});
  }
  return {{"version", 1}, {"metadata", metadata}, {"policies", policies}};
}

std::string disparity_csv(const DisparityReport& report) {
  std::ostringstream out;
  out << "measure," << report.group_a_label << "," << report.group_b_label
      << ",delta,u_statistic,p_value\n";
  for (const auto& m : report.measures) {
    out << m.measure << "," << format_double(m.group_a) << "," << format_double(m.group_b) << ","
        << format_double(m.delta) << "," << format_double(m.u_statistic) << ","
        << format_double(m.p_value) << "\n";
  }
  return out.str();
}

nlohmann::json disparity_json(const DisparityReport& report, const nlohmann::json& metadata) {
  nlohmann::json measures = nlohmann::json::array();
  for (const auto& m : report.measures) {
    measures.push_back({{"measure", m.measure},
                        {"group_a", std::isnan(m.group_a) ? nlohmann::json(nullptr) : nlohmann::json(m.group_a)},
                        {"group_b", std::isnan(m.group_b) ? nlohmann::json(nullptr) : nlohmann::json(m.group_b)},
                        {"delta", std::isnan(m.delta) ? nlohmann::json(nullptr) : nlohmann::json(m.delta)},
                        {"u_statistic", m.u_statistic},
                        {"p_value", m.p_value}});
  }
  return {{"version", 1},
          {"metadata", metadata},
          {"group_a", report.group_a_label},
          {"group_b", report.group_b_label},
          {"measures", measures}};
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file for writing: " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing output file: " + path.string());
}

}  // namespace safear
