#include "safear/experiment.hpp"

#include <chrono>
#include <cstring>
#include <fstream>

#include "safear/error.hpp"
#include "safear/hash.hpp"

namespace safear {

namespace {

constexpr int kConfigVersion = 1;
constexpr char kPolicyMagic[8] = {'S', 'A', 'F', 'E', 'A', 'R', 'P', '1'};

std::uint32_t level_from_json(const FeatureSchema& schema, std::size_t feature,
                              const nlohmann::json& j) {
  if (j.is_string()) return schema.require_level(feature, j.get<std::string>());
  return j.get<std::uint32_t>();
}

std::size_t feature_from_json(const FeatureSchema& schema, const nlohmann::json& j) {
  if (j.is_string()) return schema.require_feature(j.get<std::string>());
  return j.get<std::size_t>();
}

FeatureEffect effect_from_json(const FeatureSchema& schema, const nlohmann::json& j) {
  FeatureEffect e;
  e.feature = feature_from_json(schema, j.at("feature"));
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "set") {
    e.mode = EffectMode::set_level;
    e.target_level = level_from_json(schema, e.feature, j.at("target"));
  } else if (mode == "increment") {
    e.mode = EffectMode::increment;
  } else {
    throw ConfigError("unknown effect mode: " + mode);
  }
  return e;
}

}  // namespace

ActionSpec action_from_json(const FeatureSchema& schema, const nlohmann::json& j) {
  ActionSpec a;
  a.name = j.at("name").get<std::string>();
  a.cost = j.at("cost").get<double>();
  a.primary = effect_from_json(schema, j);

  const auto& prob = j.at("success_prob");
  if (prob.is_object()) {
    // Per-target map keyed by level label; absent targets make the action
    // inapplicable when the increment would land there.
    a.per_target.assign(schema.feature(a.primary.feature).levels.size(), std::nullopt);
    for (const auto& [label, p] : prob.items()) {
      const auto level = schema.require_level(a.primary.feature, label);
      a.per_target[level] = p.get<double>();
    }
  } else {
    a.success_prob = prob.get<double>();
  }

  if (j.contains("side_effects"))
    for (const auto& e : j.at("side_effects")) a.side_effects.push_back(effect_from_json(schema, e));
  if (j.contains("fail_effects"))
    for (const auto& e : j.at("fail_effects")) a.fail_effects.push_back(effect_from_json(schema, e));
  return a;
}

std::shared_ptr<const DecisionModel> decision_model_from_config(
    const FeatureSchema& schema, const nlohmann::json& j, const std::filesystem::path& base_dir,
    nlohmann::json* canonical_out) {
  const auto type = j.at("type").get<std::string>();
  if (type == "rule") {
    std::vector<std::vector<RulePredicate>> rules;
    for (const auto& rule : j.at("rules")) {
      std::vector<RulePredicate> preds;
      for (const auto& p : rule) {
        RulePredicate pred;
        pred.feature = feature_from_json(schema, p.at("feature"));
        pred.op = predicate_op_from_string(p.at("op").get<std::string>());
        pred.level = level_from_json(schema, pred.feature, p.at("level"));
        preds.push_back(pred);
      }
      rules.push_back(std::move(preds));
    }
    auto model = std::make_shared<RuleModel>(schema, std::move(rules));
    if (canonical_out) *canonical_out = model->to_json();
    return model;
  }
  if (type == "tree_ensemble") {
    if (j.contains("path")) {
      std::filesystem::path path = j.at("path").get<std::string>();
      if (path.is_relative()) path = base_dir / path;
      std::shared_ptr<const DecisionModel> model = load_model(schema, path);
      if (canonical_out) *canonical_out = model->to_json();
      return model;
    }
    std::shared_ptr<const DecisionModel> model = model_from_json(schema, j);
    if (canonical_out) *canonical_out = model->to_json();
    return model;
  }
  throw ConfigError("unknown model type: " + type);
}

ExperimentConfig experiment_from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir) {
  if (j.contains("version") && j.at("version").get<int>() != kConfigVersion)
    throw ConfigError("unsupported config version");

  ExperimentConfig config;
  config.name = j.value("name", "experiment");
  config.schema = FeatureSchema::from_json(j.at("schema"));
  config.horizon = j.at("horizon").get<int>();

  nlohmann::json canonical_actions = nlohmann::json::array();
  for (const auto& aj : j.at("actions")) {
    config.actions.push_back(action_from_json(config.schema, aj));
    canonical_actions.push_back(aj);
  }

  nlohmann::json canonical_model;
  config.model = decision_model_from_config(config.schema, j.at("model"), base_dir,
                                            &canonical_model);

  if (j.contains("goal_restriction")) {
    std::vector<StateIndex> goals;
    for (const auto& gj : j.at("goal_restriction")) {
      State s;
      for (std::size_t f = 0; f < config.schema.feature_count(); ++f)
        s.levels.push_back(level_from_json(config.schema, f, gj.at(f)));
      goals.push_back(encode_state(config.schema, s));
    }
    config.goal_restriction = std::move(goals);
  }

  config.canonical = {{"version", kConfigVersion},
                      {"name", config.name},
                      {"schema", config.schema.to_json()},
                      {"actions", canonical_actions},
                      {"model", canonical_model},
                      {"horizon", config.horizon}};
  if (j.contains("goal_restriction"))
    config.canonical["goal_restriction"] = j.at("goal_restriction");
  config.config_hash = fnv1a64(config.canonical.dump());
  return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  try {
    return experiment_from_json(j, path.parent_path());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
}

RecourseMdp build_mdp(const ExperimentConfig& config) {
  return RecourseMdp(config.schema, config.actions, config.model, config.horizon,
                     config.goal_restriction);
}

std::string to_string(SolverVariant v) {
  switch (v) {
    case SolverVariant::grsvi: return "grsvi";
    case SolverVariant::grsevi: return "grsevi";
    case SolverVariant::lpsd: return "lpsd";
  }
  return "grsvi";
}

SolverVariant solver_variant_from_string(const std::string& s) {
  if (s == "grsvi") return SolverVariant::grsvi;
  if (s == "grsevi") return SolverVariant::grsevi;
  if (s == "lpsd") return SolverVariant::lpsd;
  throw ConfigError("unknown solver variant: " + s);
}

namespace {

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ConfigError("policy file truncated");
  return value;
}

}  // namespace

void save_policy(const std::filesystem::path& path, const PolicyFileHeader& header,
                 const nlohmann::json& canonical_config, const PolicyTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open policy file for writing: " + path.string());

  out.write(kPolicyMagic, sizeof(kPolicyMagic));
  write_pod(out, header.config_hash);
  write_pod(out, header.schema_hash);
  write_pod(out, static_cast<std::int32_t>(header.horizon));
  write_pod(out, header.n_states);
  write_pod(out, header.beta);
  write_pod(out, static_cast<std::uint8_t>(header.variant));
  write_pod(out, static_cast<std::uint8_t>(header.deviation_mode));

  const std::string config_text = canonical_config.dump();
  write_pod(out, static_cast<std::uint64_t>(config_text.size()));
  out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));

  const auto& pi = table.raw_pi();
  const auto& values = table.raw_values();
  write_pod(out, static_cast<std::uint64_t>(pi.size()));
  out.write(reinterpret_cast<const char*>(pi.data()),
            static_cast<std::streamsize>(pi.size() * sizeof(std::int32_t)));
  write_pod(out, static_cast<std::uint64_t>(values.size()));
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) throw ConfigError("failed writing policy file: " + path.string());
}

LoadedPolicy load_policy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open policy file: " + path.string());

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kPolicyMagic, sizeof(magic)) != 0)
    throw ConfigError("not a policy file (bad magic): " + path.string());

  LoadedPolicy loaded;
  loaded.header.config_hash = read_pod<std::uint64_t>(in);
  loaded.header.schema_hash = read_pod<std::uint64_t>(in);
  loaded.header.horizon = read_pod<std::int32_t>(in);
  loaded.header.n_states = read_pod<std::uint64_t>(in);
  loaded.header.beta = read_pod<double>(in);
  loaded.header.variant = static_cast<SolverVariant>(read_pod<std::uint8_t>(in));
  loaded.header.deviation_mode = static_cast<DeviationMode>(read_pod<std::uint8_t>(in));

  const auto config_len = read_pod<std::uint64_t>(in);
  std::string config_text(config_len, '\0');
  in.read(config_text.data(), static_cast<std::streamsize>(config_len));
  if (!in) throw ConfigError("policy file truncated: " + path.string());
  nlohmann::json config_json;
  try {
    config_json = nlohmann::json::parse(config_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("policy file carries malformed config: " + std::string(e.what()));
  }
  loaded.config = experiment_from_json(config_json);

  if (loaded.config.schema.hash() != loaded.header.schema_hash)
    throw ConfigError("policy file schema hash mismatch: " + path.string());

  loaded.table = PolicyTable(loaded.header.horizon, loaded.header.n_states);
  const auto pi_len = read_pod<std::uint64_t>(in);
  if (pi_len != loaded.table.raw_pi().size())
    throw ConfigError("policy file has inconsistent table size: " + path.string());
  in.read(reinterpret_cast<char*>(loaded.table.raw_pi().data()),
          static_cast<std::streamsize>(pi_len * sizeof(std::int32_t)));
  const auto values_len = read_pod<std::uint64_t>(in);
  if (values_len != loaded.table.raw_values().size())
    throw ConfigError("policy file has inconsistent value size: " + path.string());
  in.read(reinterpret_cast<char*>(loaded.table.raw_values().data()),
          static_cast<std::streamsize>(values_len * sizeof(double)));
  if (!in) throw ConfigError("policy file truncated: " + path.string());
  return loaded;
}

void InstancesFile::save(const std::filesystem::path& path) const {
  nlohmann::json states_json = nlohmann::json::array();
  for (const auto& s : states) states_json.push_back(s.levels);
  const nlohmann::json j = {{"version", 1},
                            {"schema_hash", hash_hex(schema.hash())},
                            {"schema", schema.to_json()},
                            {"instances", states_json}};
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open instances file for writing: " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw ConfigError("failed writing instances file: " + path.string());
}

InstancesFile InstancesFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open instances file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed instances file " + path.string() + ": " + e.what());
  }
  InstancesFile file;
  try {
    file.schema = FeatureSchema::from_json(j.at("schema"));
    if (j.contains("schema_hash") &&
        j.at("schema_hash").get<std::string>() != hash_hex(file.schema.hash()))
      throw ConfigError("instances file schema hash mismatch: " + path.string());
    for (const auto& sj : j.at("instances")) {
      State s;
      s.levels = sj.get<std::vector<std::uint32_t>>();
      file.schema.validate(s);
      file.states.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed instances file " + path.string() + ": " + e.what());
  }
  return file;
}

std::vector<StateIndex> InstancesFile::indices() const {
  std::vector<StateIndex> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(encode_state(schema, s));
  return out;
}

nlohmann::json make_manifest(const std::string& command, const nlohmann::json& parameters,
                             const std::vector<std::filesystem::path>& outputs) {
  nlohmann::json outputs_json = nlohmann::json::array();
  for (const auto& path : outputs) {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    outputs_json.push_back({{"path", path.string()},
                            {"bytes", bytes.size()},
                            {"fnv64", hash_hex(fnv1a64(bytes))}});
  }
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  return {{"version", 1},
          {"command", command},
          {"parameters", parameters},
          {"outputs", outputs_json},
          {"created_at_unix_ms",
           std::chrono::duration_cast<std::chrono::milliseconds>(now).count()}};
}

void write_manifest(const std::filesystem::path& out_path, const nlohmann::json& manifest) {
  std::ofstream out(out_path);
  if (!out) throw ConfigError("cannot open manifest for writing: " + out_path.string());
  out << manifest.dump(2) << "\n";
}

}  // namespace safear
