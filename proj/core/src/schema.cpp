#include "safear/schema.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <unordered_set>

#include "safear/hash.hpp"

namespace safear {

std::string to_string(FeatureKind kind) {
  return kind == FeatureKind::nominal ? "nominal" : "ordinal";
}

std::string to_string(Mutability m) {
  switch (m) {
    case Mutability::immutable: return "immutable";
    case Mutability::actionable: return "actionable";
    case Mutability::mutable_non_actionable: return "mutable_non_actionable";
  }
  return "unknown";
}

FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "nominal") return FeatureKind::nominal;
  if (s == "ordinal") return FeatureKind::ordinal;
  throw SchemaError("unknown feature kind: " + s);
}

Mutability mutability_from_string(const std::string& s) {
  if (s == "immutable") return Mutability::immutable;
  if (s == "actionable") return Mutability::actionable;
  if (s == "mutable_non_actionable") return Mutability::mutable_non_actionable;
  throw SchemaError("unknown mutability class: " + s);
}

std::string hash_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

FeatureSchema::FeatureSchema(std::vector<FeatureSpec> features, std::string target_label)
    : features_(std::move(features)), target_label_(std::move(target_label)) {
  if (features_.empty()) throw SchemaError("schema needs at least one feature");

  std::unordered_set<std::string> names;
  for (const auto& f : features_) {
    if (f.name.empty()) throw SchemaError("feature with empty name");
    if (!names.insert(f.name).second) throw SchemaError("duplicate feature name: " + f.name);
    if (f.levels.size() < 2)
      throw SchemaError("feature '" + f.name + "' needs at least two levels");
    std::unordered_set<std::string> level_set;
    for (const auto& lv : f.levels) {
      if (lv.empty()) throw SchemaError("feature '" + f.name + "' has an empty level label");
      if (!level_set.insert(lv).second)
        throw SchemaError("feature '" + f.name + "' has duplicate level: " + lv);
    }
  }

  // Strides for mixed-radix encoding, feature 0 most significant. The full
  // cardinality must fit a 64-bit count.
  strides_.assign(features_.size(), 1);
  for (std::size_t i = features_.size(); i-- > 0;) {
    if (i + 1 < features_.size()) {
      const auto radix = static_cast<std::uint64_t>(features_[i + 1].levels.size());
      const std::uint64_t below = strides_[i + 1];
      if (below > std::numeric_limits<std::uint64_t>::max() / radix)
        throw SchemaError("state-space cardinality overflows 64 bits");
      strides_[i] = below * radix;
    }
  }
  const auto radix0 = static_cast<std::uint64_t>(features_[0].levels.size());
  if (strides_[0] > std::numeric_limits<std::uint64_t>::max() / radix0)
    throw SchemaError("state-space cardinality overflows 64 bits");
  cardinality_ = strides_[0] * radix0;

  hash_ = fnv1a64(to_json().dump());
}

std::optional<std::size_t> FeatureSchema::feature_index(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i)
    if (features_[i].name == name) return i;
  return std::nullopt;
}

std::size_t FeatureSchema::require_feature(std::string_view name) const {
  auto idx = feature_index(name);
  if (!idx) throw SchemaError("unknown feature: " + std::string(name));
  return *idx;
}

std::uint32_t FeatureSchema::require_level(std::size_t feature, std::string_view label) const {
  const auto& levels = features_.at(feature).levels;
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i] == label) return static_cast<std::uint32_t>(i);
  throw SchemaError("feature '" + features_.at(feature).name + "' has no level '" +
                    std::string(label) + "'");
}

void FeatureSchema::validate(const State& s) const {
  if (s.levels.size() != features_.size())
    throw SchemaError("state has " + std::to_string(s.levels.size()) + " levels, schema has " +
                      std::to_string(features_.size()) + " features");
  for (std::size_t i = 0; i < features_.size(); ++i)
    if (s.levels[i] >= features_[i].levels.size())
      throw SchemaError("level index " + std::to_string(s.levels[i]) +
                        " out of range for feature '" + features_[i].name + "'");
}

std::uint32_t FeatureSchema::level_at(StateIndex index, std::size_t feature) const {
  return static_cast<std::uint32_t>((index / strides_[feature]) % features_[feature].levels.size());
}

StateIndex FeatureSchema::with_level(StateIndex index, std::size_t feature,
                                     std::uint32_t level) const {
  const std::uint32_t current = level_at(index, feature);
  return index + (static_cast<std::int64_t>(level) - static_cast<std::int64_t>(current)) *
                     static_cast<std::int64_t>(strides_[feature]);
}

nlohmann::json FeatureSchema::to_json() const {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : features_) {
    features.push_back({{"name", f.name},
                        {"kind", to_string(f.kind)},
                        {"levels", f.levels},
                        {"mutability", to_string(f.mutability)}});
  }
  return {{"features", features}, {"target_label", target_label_}};
}

FeatureSchema FeatureSchema::from_json(const nlohmann::json& j) {
  std::vector<FeatureSpec> specs;
  for (const auto& f : j.at("features")) {
    FeatureSpec spec;
    spec.name = f.at("name").get<std::string>();
    spec.kind = feature_kind_from_string(f.at("kind").get<std::string>());
    spec.levels = f.at("levels").get<std::vector<std::string>>();
    spec.mutability = mutability_from_string(f.at("mutability").get<std::string>());
    specs.push_back(std::move(spec));
  }
  return FeatureSchema(std::move(specs), j.at("target_label").get<std::string>());
}

StateIndex encode_state(const FeatureSchema& schema, const State& s) {
  schema.validate(s);
  StateIndex index = 0;
  for (std::size_t i = 0; i < s.levels.size(); ++i)
    index += static_cast<std::uint64_t>(s.levels[i]) * schema.strides_[i];
  return index;
}

State decode_state(const FeatureSchema& schema, StateIndex index) {
  if (index >= schema.cardinality())
    throw std::out_of_range("state index " + std::to_string(index) +
                            " >= cardinality " + std::to_string(schema.cardinality()));
  State s;
  s.levels.resize(schema.feature_count());
  for (std::size_t i = 0; i < schema.feature_count(); ++i) {
    s.levels[i] = static_cast<std::uint32_t>(index / schema.strides_[i]);
    index %= schema.strides_[i];
  }
  return s;
}

FeatureDistance feature_distance(const FeatureSchema& schema, const State& a, const State& b) {
  schema.validate(a);
  schema.validate(b);
  FeatureDistance d;
  for (std::size_t i = 0; i < schema.feature_count(); ++i) {
    if (a.levels[i] == b.levels[i]) continue;
    d.sparsity += 1;
    if (schema.feature(i).kind == FeatureKind::ordinal) {
      d.proximity += std::abs(static_cast<double>(a.levels[i]) - static_cast<double>(b.levels[i]));
    } else {
      d.proximity += 1.0;
    }
  }
  return d;
}

}  // namespace safear
