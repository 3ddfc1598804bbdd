#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safear/evaluation.hpp"

namespace safear {

/// One evaluated policy: a label (beta/variant) plus its evaluation result.
struct PolicyEvaluation {
  std::string label;
  double beta = 0.0;
  int horizon = 0;
  std::string variant;
  EvaluationResult result;
};

/// CSV report: per policy, one row per instance plus an AGGREGATE row with
/// the Table-style columns (rho, mu, sigma2, VaR/CVaR per alpha, sparsity,
/// proximity). Formatting is fixed so identical runs give identical bytes.
std::string evaluation_csv(const std::vector<PolicyEvaluation>& evaluations,
                           const std::vector<double>& alphas);

/// JSON variant carrying full metadata.
nlohmann::json evaluation_json(const std::vector<PolicyEvaluation>& evaluations,
                               const std::vector<double>& alphas, const nlohmann::json& metadata);

nlohmann::json disparity_json(const DisparityReport& report, const nlohmann::json& metadata);
std::string disparity_csv(const DisparityReport& report);

void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Fixed-format float used in all text outputs ("%.10g").
std::string format_double(double v);

}  // namespace safear
