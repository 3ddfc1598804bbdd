#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "safear/error.hpp"

namespace safear {

enum class FeatureKind { nominal, ordinal };
enum class Mutability { immutable, actionable, mutable_non_actionable };

std::string to_string(FeatureKind kind);
std::string to_string(Mutability m);
FeatureKind feature_kind_from_string(const std::string& s);
Mutability mutability_from_string(const std::string& s);

/// One discrete feature: an ordered list of level labels plus a mutability class.
/// Ordinal features interpret the level index as magnitude.
struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::nominal;
  std::vector<std::string> levels;
  Mutability mutability = Mutability::actionable;
};

/// A point in the factored state space: one level index per schema feature.
struct State {
  std::vector<std::uint32_t> levels;

  State() = default;
  explicit State(std::vector<std::uint32_t> lv) : levels(std::move(lv)) {}
  bool operator==(const State& other) const = default;
};

/// Flat mixed-radix index of a State. The first schema feature is the most
/// significant digit; this convention is part of the file-format contract.
using StateIndex = std::uint64_t;

struct FeatureDistance {
  int sparsity = 0;       // number of differing features (L0)
  double proximity = 0.0; // nominal: 1 per change; ordinal: |level delta|
};

/// Ordered feature list with the target label name; owns the index layout of
/// the state space (strides, cardinality) and the schema fingerprint.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  FeatureSchema(std::vector<FeatureSpec> features, std::string target_label);

  std::size_t feature_count() const { return features_.size(); }
  const FeatureSpec& feature(std::size_t i) const { return features_[i]; }
  const std::vector<FeatureSpec>& features() const { return features_; }
  const std::string& target_label() const { return target_label_; }

  std::optional<std::size_t> feature_index(std::string_view name) const;
  /// feature_index or SchemaError.
  std::size_t require_feature(std::string_view name) const;
  std::uint32_t require_level(std::size_t feature, std::string_view label) const;

  std::uint64_t cardinality() const { return cardinality_; }
  std::uint64_t hash() const { return hash_; }

  void validate(const State& s) const;

  /// Level index of one feature, read directly from a flat index.
  std::uint32_t level_at(StateIndex index, std::size_t feature) const;
  /// Flat index with one feature's level replaced.
  StateIndex with_level(StateIndex index, std::size_t feature, std::uint32_t level) const;

  nlohmann::json to_json() const;
  static FeatureSchema from_json(const nlohmann::json& j);

  bool operator==(const FeatureSchema& other) const { return hash_ == other.hash_; }

 private:
  std::vector<FeatureSpec> features_;
  std::string target_label_;
  std::vector<std::uint64_t> strides_;
  std::uint64_t cardinality_ = 0;
  std::uint64_t hash_ = 0;

  friend StateIndex encode_state(const FeatureSchema&, const State&);
  friend State decode_state(const FeatureSchema&, StateIndex);
};

/// Mixed-radix encoding of a state (feature 0 most significant).
StateIndex encode_state(const FeatureSchema& schema, const State& s);
/// Inverse of encode_state; throws std::out_of_range for index >= cardinality.
State decode_state(const FeatureSchema& schema, StateIndex index);

/// Sparsity (L0) and proximity (nominal L0 + ordinal L1) between two states.
FeatureDistance feature_distance(const FeatureSchema& schema, const State& a, const State& b);

}  // namespace safear
