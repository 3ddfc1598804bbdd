#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safear/decision.hpp"
#include "safear/schema.hpp"

namespace safear {

/// Minimal CSV table: header row plus string cells, whitespace-trimmed,
/// double-quote aware.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  static CsvTable read(std::istream& in);
  static CsvTable read_file(const std::filesystem::path& path);
  std::size_t column(const std::string& name) const;  // throws DataError
};

/// How one raw column maps onto one schema feature: either a category->level
/// table or numeric binning with half-open upper edges (value < edges[i] gives
/// bin i; anything beyond the last edge gives the final bin). Bins map to
/// schema levels through bin_levels, identity unless the descriptor says
/// otherwise (used when numeric order and level order disagree).
struct ColumnMapping {
  std::string column;
  std::size_t feature = 0;
  std::map<std::string, std::uint32_t> categories;  // empty when numeric
  std::vector<double> upper_edges;                  // empty when categorical
  std::vector<std::uint32_t> bin_levels;            // level of each bin
};

/// Label rule: either a favorable category set or a numeric threshold.
struct LabelRule {
  std::string column;
  std::set<std::string> favorable_values;         // categorical form
  std::optional<double> favorable_below;          // numeric form: value < threshold
};

struct DatasetDescriptor {
  std::string name;
  FeatureSchema schema;
  std::vector<ColumnMapping> mappings;  // exactly one per schema feature
  LabelRule label;
  std::set<std::string> missing_tokens; // rows with these anywhere are dropped

  static DatasetDescriptor from_json(const nlohmann::json& j);
  static DatasetDescriptor load(const std::filesystem::path& path);
};

struct PreprocessResult {
  FeatureSchema schema;
  std::vector<LabeledInstance> instances;
  std::vector<std::string> rejections;  // one reason per rejected row
};

/// Maps raw CSV rows onto schema-conformant labeled instances. Rows with
/// missing values or unmappable categories are rejected with a logged reason.
PreprocessResult preprocess(const DatasetDescriptor& descriptor, const CsvTable& table);

/// Filter over labeled instances used by instance selection.
struct InstanceFilter {
  std::optional<Outcome> label;
  std::vector<std::pair<std::size_t, std::uint32_t>> feature_equals;
  std::vector<std::pair<std::size_t, std::uint32_t>> feature_below;  // level < bound
};

/// Stable-order subset of instances matching the filter; when sample_size is
/// given, a seeded random subsample (still emitted in input order).
std::vector<std::size_t> select_instances(std::span<const LabeledInstance> instances,
                                          const InstanceFilter& filter,
                                          std::optional<std::size_t> sample_size = std::nullopt,
                                          std::uint64_t seed = 0);

struct BuiltinDomain {
  nlohmann::json config;  // same shape as an experiment .cfg file
  State initial_state;
};

/// Built-in hand-coded domains: "synthetic_health" (the three-path insurance
/// premium example) and "loan_figure1" (the loan illustration whose Change-Job
/// failure branch lands in a worse state).
BuiltinDomain builtin_domain(const std::string& name);

}  // namespace safear
