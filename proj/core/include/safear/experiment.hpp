#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safear/mdp.hpp"
#include "safear/solver.hpp"

namespace safear {

/// One experiment definition: schema, action model, decision model, horizon,
/// optional goal restriction. Loaded from a .cfg file (JSON) in which rule
/// models may be inlined and tree-ensemble models referenced by path; the
/// canonical form inlines everything and is what the config hash covers.
struct ExperimentConfig {
  std::string name;
  FeatureSchema schema;
  std::vector<ActionSpec> actions;
  std::shared_ptr<const DecisionModel> model;
  int horizon = 1;
  std::optional<std::vector<StateIndex>> goal_restriction;
  nlohmann::json canonical;   // model inlined, keys sorted
  std::uint64_t config_hash = 0;
};

ExperimentConfig experiment_from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

RecourseMdp build_mdp(const ExperimentConfig& config);

/// Resolves an action block (names for features/levels) against a schema.
ActionSpec action_from_json(const FeatureSchema& schema, const nlohmann::json& j);

/// Resolves a decision-model block; rule predicates may use feature/level
/// names or indices, tree ensembles may be inline or a {"path": ...} reference.
std::shared_ptr<const DecisionModel> decision_model_from_config(
    const FeatureSchema& schema, const nlohmann::json& j,
    const std::filesystem::path& base_dir, nlohmann::json* canonical_out = nullptr);

enum class SolverVariant { grsvi, grsevi, lpsd };
std::string to_string(SolverVariant v);
SolverVariant solver_variant_from_string(const std::string& s);

/// Versioned binary policy file. Embeds the canonical experiment config so
/// that evaluation and visualization need no side channel.
struct PolicyFileHeader {
  std::uint64_t config_hash = 0;
  std::uint64_t schema_hash = 0;
  int horizon = 0;
  std::uint64_t n_states = 0;
  double beta = 0.0;
  SolverVariant variant = SolverVariant::grsvi;
  DeviationMode deviation_mode = DeviationMode::full_sigma;
};

void save_policy(const std::filesystem::path& path, const PolicyFileHeader& header,
                 const nlohmann::json& canonical_config, const PolicyTable& table);

struct LoadedPolicy {
  PolicyFileHeader header;
  ExperimentConfig config;
  PolicyTable table;
};

LoadedPolicy load_policy(const std::filesystem::path& path);

/// Structured-text instances file: schema (and its hash) plus level vectors.
struct InstancesFile {
  FeatureSchema schema;
  std::vector<State> states;

  void save(const std::filesystem::path& path) const;
  static InstancesFile load(const std::filesystem::path& path);
  std::vector<StateIndex> indices() const;
};

/// Run manifest written next to every CLI output. The created_at stamp is
/// informational and excluded from reproducibility comparisons.
nlohmann::json make_manifest(const std::string& command, const nlohmann::json& parameters,
                             const std::vector<std::filesystem::path>& outputs);
void write_manifest(const std::filesystem::path& out_path, const nlohmann::json& manifest);

}  // namespace safear
