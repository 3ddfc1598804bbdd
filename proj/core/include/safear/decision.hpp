#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safear/schema.hpp"

namespace safear {

enum class Outcome : std::uint8_t { unfavorable = 0, favorable = 1 };

/// Black-box decision function f: state -> {unfavorable, favorable}.
/// Implementations are immutable after construction; classify is pure and
/// safe for unsynchronized concurrent calls.
class DecisionModel {
 public:
  virtual ~DecisionModel() = default;
  virtual Outcome classify(const State& s) const = 0;
  virtual nlohmann::json to_json() const = 0;
};

enum class PredicateOp { eq, ne, lt, le, gt, ge };

PredicateOp predicate_op_from_string(const std::string& s);
std::string to_string(PredicateOp op);

struct RulePredicate {
  std::size_t feature = 0;
  PredicateOp op = PredicateOp::eq;
  std::uint32_t level = 0;
};

/// Disjunction of conjunctive predicates over level indices: any rule whose
/// predicates all hold makes the state favorable; an empty rule list makes
/// every state unfavorable.
class RuleModel final : public DecisionModel {
 public:
  RuleModel(const FeatureSchema& schema, std::vector<std::vector<RulePredicate>> rules);

  Outcome classify(const State& s) const override;
  nlohmann::json to_json() const override;
  static std::unique_ptr<RuleModel> from_json(const FeatureSchema& schema,
                                              const nlohmann::json& j);

 private:
  std::vector<std::vector<RulePredicate>> rules_;
  std::uint64_t schema_hash_ = 0;
};

/// Binary decision-tree node over level indices. Internal nodes route
/// level <= split_level to `left`; leaves have feature == -1.
struct TreeNode {
  std::int32_t feature = -1;
  std::uint32_t split_level = 0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  Outcome leaf = Outcome::unfavorable;
};

/// Majority-vote ensemble of decision trees. A state is favorable when the
/// favorable vote fraction strictly exceeds the threshold (ties resolve to
/// unfavorable).
class TreeEnsembleModel final : public DecisionModel {
 public:
  TreeEnsembleModel(const FeatureSchema& schema, std::vector<std::vector<TreeNode>> trees,
                    double vote_threshold);

  Outcome classify(const State& s) const override;
  nlohmann::json to_json() const override;
  static std::unique_ptr<TreeEnsembleModel> from_json(const FeatureSchema& schema,
                                                      const nlohmann::json& j);

  std::size_t tree_count() const { return trees_.size(); }
  double vote_threshold() const { return vote_threshold_; }

 private:
  std::vector<std::vector<TreeNode>> trees_;
  double vote_threshold_ = 0.5;
  std::uint64_t schema_hash_ = 0;
};

struct LabeledInstance {
  State state;
  Outcome label = Outcome::unfavorable;
};

struct TrainConfig {
  int n_trees = 50;
  int max_depth = 8;
  double feature_subsample = 0.0;  // fraction of features per split; 0 = sqrt(D)/D
  std::uint64_t seed = 0;
  double holdout_fraction = 0.2;
};

struct TrainResult {
  std::unique_ptr<TreeEnsembleModel> model;
  double holdout_accuracy = 0.0;
};

/// Trains a bootstrap tree ensemble on labeled discrete instances.
/// Reproducible given the seed; throws DataError when only one class is present.
TrainResult train_tree_ensemble(const FeatureSchema& schema,
                                std::span<const LabeledInstance> rows, const TrainConfig& config);

/// Versioned JSON model files. load_model checks version and schema hash.
void save_model(const DecisionModel& model, const std::filesystem::path& path);
std::unique_ptr<DecisionModel> load_model(const FeatureSchema& schema,
                                          const std::filesystem::path& path);
std::unique_ptr<DecisionModel> model_from_json(const FeatureSchema& schema,
                                               const nlohmann::json& j);

}  // namespace safear
