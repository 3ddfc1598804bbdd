#include "safear/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "safear/error.hpp"
#include "safear/rng.hpp"

namespace safear {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0, end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

}  // namespace

CsvTable CsvTable::read(std::istream& in) {
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != table.header.size())
        throw DataError("CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(table.header.size()));
      table.rows.push_back(std::move(cells));
    }
  }
  if (first) throw DataError("CSV input is empty");
  return table;
}

CsvTable CsvTable::read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file: " + path.string());
  return read(in);
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw DataError("CSV has no column '" + name + "'");
}

DatasetDescriptor DatasetDescriptor::from_json(const nlohmann::json& j) {
  DatasetDescriptor d;
  d.name = j.value("name", "");
  d.schema = FeatureSchema::from_json(j.at("schema"));

  for (const auto& m : j.at("columns")) {
    ColumnMapping mapping;
    mapping.column = m.at("column").get<std::string>();
    mapping.feature = d.schema.require_feature(m.at("feature").get<std::string>());
    if (m.contains("categories")) {
      for (const auto& [raw, level] : m.at("categories").items())
        mapping.categories[raw] = d.schema.require_level(mapping.feature, level.get<std::string>());
    } else if (m.contains("upper_edges")) {
      mapping.upper_edges = m.at("upper_edges").get<std::vector<double>>();
      if (mapping.upper_edges.size() + 1 != d.schema.feature(mapping.feature).levels.size())
        throw ConfigError("descriptor column '" + mapping.column +
                          "': needs one fewer edge than levels");
      if (!std::is_sorted(mapping.upper_edges.begin(), mapping.upper_edges.end()))
        throw ConfigError("descriptor column '" + mapping.column + "': edges must be ascending");
      if (m.contains("bin_levels")) {
        for (const auto& label : m.at("bin_levels"))
          mapping.bin_levels.push_back(
              d.schema.require_level(mapping.feature, label.get<std::string>()));
        if (mapping.bin_levels.size() != mapping.upper_edges.size() + 1)
          throw ConfigError("descriptor column '" + mapping.column +
                            "': bin_levels must cover every bin");
      } else {
        for (std::uint32_t i = 0; i <= mapping.upper_edges.size(); ++i)
          mapping.bin_levels.push_back(i);
      }
    } else {
      throw ConfigError("descriptor column '" + mapping.column +
                        "': needs categories or upper_edges");
    }
    d.mappings.push_back(std::move(mapping));
  }

  std::vector<bool> covered(d.schema.feature_count(), false);
  for (const auto& m : d.mappings) {
    if (covered[m.feature])
      throw ConfigError("descriptor maps feature '" + d.schema.feature(m.feature).name +
                        "' more than once");
    covered[m.feature] = true;
  }
  for (std::size_t i = 0; i < covered.size(); ++i)
    if (!covered[i])
      throw ConfigError("descriptor leaves feature '" + d.schema.feature(i).name + "' unmapped");

  const auto& lj = j.at("label");
  d.label.column = lj.at("column").get<std::string>();
  if (lj.contains("favorable_values")) {
    for (const auto& v : lj.at("favorable_values")) d.label.favorable_values.insert(v.get<std::string>());
  }
  if (lj.contains("favorable_below")) d.label.favorable_below = lj.at("favorable_below").get<double>();
  if (d.label.favorable_values.empty() && !d.label.favorable_below)
    throw ConfigError("descriptor label needs favorable_values or favorable_below");

  if (j.contains("missing_tokens"))
    for (const auto& t : j.at("missing_tokens")) d.missing_tokens.insert(t.get<std::string>());
  return d;
}

DatasetDescriptor DatasetDescriptor::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open descriptor: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed descriptor " + path.string() + ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed descriptor " + path.string() + ": " + e.what());
  }
}

PreprocessResult preprocess(const DatasetDescriptor& descriptor, const CsvTable& table) {
  PreprocessResult result;
  result.schema = descriptor.schema;

  std::vector<std::size_t> column_of(descriptor.mappings.size());
  for (std::size_t i = 0; i < descriptor.mappings.size(); ++i)
    column_of[i] = table.column(descriptor.mappings[i].column);
  const std::size_t label_col = table.column(descriptor.label.column);

  for (std::size_t row_idx = 0; row_idx < table.rows.size(); ++row_idx) {
    const auto& row = table.rows[row_idx];
    std::string reason;
    State state;
    state.levels.assign(descriptor.schema.feature_count(), 0);

    bool missing = false;
    for (const auto& cell : row) {
      if (descriptor.missing_tokens.count(cell)) {
        missing = true;
        break;
      }
    }
    if (missing) {
      result.rejections.push_back("row " + std::to_string(row_idx + 1) + ": missing value");
      continue;
    }

    bool ok = true;
    for (std::size_t m = 0; m < descriptor.mappings.size() && ok; ++m) {
      const auto& mapping = descriptor.mappings[m];
      const std::string& cell = row[column_of[m]];
      if (!mapping.categories.empty()) {
        auto it = mapping.categories.find(cell);
        if (it == mapping.categories.end()) {
          reason = "row " + std::to_string(row_idx + 1) + ": unmappable category '" + cell +
                   "' in column '" + mapping.column + "'";
          ok = false;
        } else {
          state.levels[mapping.feature] = it->second;
        }
      } else {
        double value = 0.0;
        const auto* begin = cell.data();
        const auto* end = cell.data() + cell.size();
        const auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc() || ptr != end) {
          reason = "row " + std::to_string(row_idx + 1) + ": non-numeric value '" + cell +
                   "' in column '" + mapping.column + "'";
          ok = false;
        } else {
          std::uint32_t bin = static_cast<std::uint32_t>(mapping.upper_edges.size());
          for (std::size_t e = 0; e < mapping.upper_edges.size(); ++e) {
            if (value < mapping.upper_edges[e]) {
              bin = static_cast<std::uint32_t>(e);
              break;
            }
          }
          state.levels[mapping.feature] = mapping.bin_levels[bin];
        }
      }
    }
    if (!ok) {
      result.rejections.push_back(reason);
      continue;
    }

    Outcome label = Outcome::unfavorable;
    const std::string& label_cell = row[label_col];
    if (!descriptor.label.favorable_values.empty()) {
      label = descriptor.label.favorable_values.count(label_cell) ? Outcome::favorable
                                                                  : Outcome::unfavorable;
    } else {
      double value = 0.0;
      const auto* begin = label_cell.data();
      const auto* end = label_cell.data() + label_cell.size();
      const auto [ptr, ec] = std::from_chars(begin, end, value);
      if (ec != std::errc() || ptr != end) {
        result.rejections.push_back("row " + std::to_string(row_idx + 1) +
                                    ": non-numeric label '" + label_cell + "'");
        continue;
      }
      label = value < *descriptor.label.favorable_below ? Outcome::favorable
                                                        : Outcome::unfavorable;
    }
    result.instances.push_back({std::move(state), label});
  }
  return result;
}

std::vector<std::size_t> select_instances(std::span<const LabeledInstance> instances,
                                          const InstanceFilter& filter,
                                          std::optional<std::size_t> sample_size,
                                          std::uint64_t seed) {
  std::vector<std::size_t> selected;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    if (filter.label && inst.label != *filter.label) continue;
    bool ok = true;
    for (const auto& [feature, level] : filter.feature_equals)
      if (inst.state.levels.at(feature) != level) ok = false;
    for (const auto& [feature, bound] : filter.feature_below)
      if (inst.state.levels.at(feature) >= bound) ok = false;
    if (ok) selected.push_back(i);
  }
  if (sample_size && *sample_size < selected.size()) {
    // Seeded partial Fisher-Yates, then restore input order.
    CounterRng rng(seed);
    for (std::size_t i = 0; i < *sample_size; ++i) {
      const std::size_t j = i + rng.next_below(selected.size() - i);
      std::swap(selected[i], selected[j]);
    }
    selected.resize(*sample_size);
    std::sort(selected.begin(), selected.end());
  }
  return selected;
}

namespace {

nlohmann::json synthetic_health_config() {
  // Five-feature premium-reduction domain with three routes to a favorable
  // outcome: one risky single step, one two-step route, one deterministic
  // three-step route. Every action costs one 3-month period.
  nlohmann::json schema = {
      {"features",
       nlohmann::json::array(
           {{{"name", "Smoking"}, {"kind", "nominal"}, {"levels", {"Yes", "No"}}, {"mutability", "actionable"}},
            {{"name", "Drinking"}, {"kind", "nominal"}, {"levels", {"Yes", "No"}}, {"mutability", "actionable"}},
            {{"name", "Cholesterol"}, {"kind", "nominal"}, {"levels", {"High", "Low"}}, {"mutability", "actionable"}},
            {{"name", "BMI"}, {"kind", "ordinal"}, {"levels", {"High", "Medium", "Low"}}, {"mutability", "actionable"}},
            {{"name", "Region"}, {"kind", "nominal"}, {"levels", {"West", "Midwest"}}, {"mutability", "actionable"}}})},
      {"target_label", "low_premium"}};

  nlohmann::json actions = nlohmann::json::array(
      {{{"name", "quit-drinking"}, {"cost", 1.0}, {"feature", "Drinking"}, {"mode", "set"}, {"target", "No"}, {"success_prob", 0.5}},
       {{"name", "quit-smoking"}, {"cost", 1.0}, {"feature", "Smoking"}, {"mode", "set"}, {"target", "No"}, {"success_prob", 0.9}},
       {{"name", "move-to-midwest"}, {"cost", 1.0}, {"feature", "Region"}, {"mode", "set"}, {"target", "Midwest"}, {"success_prob", 0.9}},
       {{"name", "healthy-diet"}, {"cost", 1.0}, {"feature", "Cholesterol"}, {"mode", "set"}, {"target", "Low"}, {"success_prob", 1.0}},
       {{"name", "exercise"}, {"cost", 1.0}, {"feature", "BMI"}, {"mode", "increment"}, {"success_prob", 1.0}}});

  // Favorable: quit drinking (T1), or non-smoker in the midwest (T2), or low
  // cholesterol with low BMI (T3).
  nlohmann::json model = {
      {"type", "rule"},
      {"rules",
       nlohmann::json::array(
           {nlohmann::json::array({{{"feature", "Drinking"}, {"op", "eq"}, {"level", "No"}}}),
            nlohmann::json::array({{{"feature", "Smoking"}, {"op", "eq"}, {"level", "No"}},
                                   {{"feature", "Region"}, {"op", "eq"}, {"level", "Midwest"}}}),
            nlohmann::json::array({{{"feature", "Cholesterol"}, {"op", "eq"}, {"level", "Low"}},
                                   {{"feature", "BMI"}, {"op", "eq"}, {"level", "Low"}}})})}};

  return {{"version", 1},
          {"name", "synthetic_health"},
          {"schema", schema},
          {"actions", actions},
          {"model", model},
          {"horizon", 8}};
}

nlohmann::json loan_figure1_config() {
  // Loan illustration: Own-House is sparse but unlikely; Change-Job is the
  // cheapest in expectation but fails into joblessness; the education-then-
  // savings route is safer at a higher mean cost.
  nlohmann::json schema = {
      {"features",
       nlohmann::json::array(
           {{{"name", "Housing"}, {"kind", "nominal"}, {"levels", {"Rent", "Own"}}, {"mutability", "actionable"}},
            {{"name", "Job"}, {"kind", "nominal"}, {"levels", {"Jobless", "Current", "Better"}}, {"mutability", "actionable"}},
            {{"name", "Savings"}, {"kind", "ordinal"}, {"levels", {"Low", "Mid", "High"}}, {"mutability", "actionable"}},
            {{"name", "Education"}, {"kind", "nominal"}, {"levels", {"School", "Advanced"}}, {"mutability", "actionable"}}})},
      {"target_label", "approved"}};

  nlohmann::json actions = nlohmann::json::array(
      {{{"name", "Own-House"}, {"cost", 1.0}, {"feature", "Housing"}, {"mode", "set"}, {"target", "Own"}, {"success_prob", 0.3}},
       {{"name", "Change-Job"},
        {"cost", 1.0},
        {"feature", "Job"},
        {"mode", "set"},
        {"target", "Better"},
        {"success_prob", 0.9},
        {"side_effects", nlohmann::json::array({{{"feature", "Savings"}, {"mode", "increment"}},
                                                {{"feature", "Savings"}, {"mode", "increment"}}})},
        {"fail_effects", nlohmann::json::array({{{"feature", "Job"}, {"mode", "set"}, {"target", "Jobless"}}})}},
       {{"name", "Find-Job"},
        {"cost", 5.0},
        {"feature", "Job"},
        {"mode", "set"},
        {"target", "Better"},
        {"success_prob", 1.0},
        {"side_effects", nlohmann::json::array({{{"feature", "Savings"}, {"mode", "increment"}},
                                                {{"feature", "Savings"}, {"mode", "increment"}}})}},
       {{"name", "Impr-Edu-Part-Time"}, {"cost", 1.0}, {"feature", "Education"}, {"mode", "set"}, {"target", "Advanced"}, {"success_prob", 1.0}},
       {{"name", "Incr-Savings"}, {"cost", 1.0}, {"feature", "Savings"}, {"mode", "increment"}, {"success_prob", 0.9}}});

  nlohmann::json model = {
      {"type", "rule"},
      {"rules",
       nlohmann::json::array(
           {nlohmann::json::array({{{"feature", "Housing"}, {"op", "eq"}, {"level", "Own"}}}),
            nlohmann::json::array({{{"feature", "Savings"}, {"op", "eq"}, {"level", "High"}}}),
            nlohmann::json::array({{{"feature", "Education"}, {"op", "eq"}, {"level", "Advanced"}},
                                   {{"feature", "Savings"}, {"op", "ge"}, {"level", "Mid"}}})})}};

  return {{"version", 1},
          {"name", "loan_figure1"},
          {"schema", schema},
          {"actions", actions},
          {"model", model},
          {"horizon", 12}};
}

}  // namespace

BuiltinDomain builtin_domain(const std::string& name) {
  BuiltinDomain domain;
  if (name == "synthetic_health") {
    domain.config = synthetic_health_config();
    domain.initial_state = State{{0, 0, 0, 0, 0}};  // smoking, drinking, high chol, high BMI, west
    return domain;
  }
  if (name == "loan_figure1") {
    domain.config = loan_figure1_config();
    domain.initial_state = State{{0, 1, 0, 0}};  // renting, employed, low savings, basic education
    return domain;
  }
  throw ConfigError("unknown builtin domain: " + name);
}

}  // namespace safear
