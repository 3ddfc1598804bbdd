#include "safear/decision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "safear/error.hpp"
#include "safear/hash.hpp"
#include "safear/rng.hpp"

namespace safear {

namespace {

constexpr int kModelFileVersion = 1;

}  // namespace

PredicateOp predicate_op_from_string(const std::string& s) {
  if (s == "eq") return PredicateOp::eq;
  if (s == "ne") return PredicateOp::ne;
  if (s == "lt") return PredicateOp::lt;
  if (s == "le") return PredicateOp::le;
  if (s == "gt") return PredicateOp::gt;
  if (s == "ge") return PredicateOp::ge;
  throw ConfigError("unknown predicate op: " + s);
}

std::string to_string(PredicateOp op) {
  switch (op) {
    case PredicateOp::eq: return "eq";
    case PredicateOp::ne: return "ne";
    case PredicateOp::lt: return "lt";
    case PredicateOp::le: return "le";
    case PredicateOp::gt: return "gt";
    case PredicateOp::ge: return "ge";
  }
  return "eq";
}

RuleModel::RuleModel(const FeatureSchema& schema, std::vector<std::vector<RulePredicate>> rules)
    : rules_(std::move(rules)), schema_hash_(schema.hash()) {
  for (const auto& rule : rules_) {
    for (const auto& p : rule) {
      if (p.feature >= schema.feature_count())
        throw SchemaError("rule predicate references feature index " + std::to_string(p.feature) +
                          " beyond schema");
      if (p.level >= schema.feature(p.feature).levels.size())
        throw SchemaError("rule predicate level out of range for feature '" +
                          schema.feature(p.feature).name + "'");
    }
  }
}

Outcome RuleModel::classify(const State& s) const {
  for (const auto& rule : rules_) {
    bool all = true;
    for (const auto& p : rule) {
      const std::uint32_t v = s.levels[p.feature];
      bool ok = false;
      switch (p.op) {
        case PredicateOp::eq: ok = v == p.level; break;
        case PredicateOp::ne: ok = v != p.level; break;
        case PredicateOp::lt: ok = v < p.level; break;
        case PredicateOp::le: ok = v <= p.level; break;
        case PredicateOp::gt: ok = v > p.level; break;
        case PredicateOp::ge: ok = v >= p.level; break;
      }
      if (!ok) {
        all = false;
        break;
      }
    }
    if (all && !rule.empty()) return Outcome::favorable;
  }
  return Outcome::unfavorable;
}

nlohmann::json RuleModel::to_json() const {
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& rule : rules_) {
    nlohmann::json preds = nlohmann::json::array();
    for (const auto& p : rule)
      preds.push_back({{"feature", p.feature}, {"op", to_string(p.op)}, {"level", p.level}});
    rules.push_back(preds);
  }
  return {{"type", "rule"},
          {"version", kModelFileVersion},
          {"schema_hash", hash_hex(schema_hash_)},
          {"rules", rules}};
}

std::unique_ptr<RuleModel> RuleModel::from_json(const FeatureSchema& schema,
                                                const nlohmann::json& j) {
  std::vector<std::vector<RulePredicate>> rules;
  for (const auto& rule : j.at("rules")) {
    std::vector<RulePredicate> preds;
    for (const auto& p : rule) {
      RulePredicate pred;
      pred.feature = p.at("feature").get<std::size_t>();
      pred.op = predicate_op_from_string(p.at("op").get<std::string>());
      pred.level = p.at("level").get<std::uint32_t>();
      preds.push_back(pred);
    }
    rules.push_back(std::move(preds));
  }
  return std::make_unique<RuleModel>(schema, std::move(rules));
}

TreeEnsembleModel::TreeEnsembleModel(const FeatureSchema& schema,
                                     std::vector<std::vector<TreeNode>> trees,
                                     double vote_threshold)
    : trees_(std::move(trees)), vote_threshold_(vote_threshold), schema_hash_(schema.hash()) {
  if (trees_.empty()) throw ConfigError("tree ensemble needs at least one tree");
  if (!(vote_threshold_ > 0.0 && vote_threshold_ < 1.0))
    throw ConfigError("vote threshold must lie in (0,1)");
  for (const auto& tree : trees_) {
    if (tree.empty()) throw ConfigError("ensemble contains an empty tree");
    for (const auto& node : tree) {
      if (node.feature < 0) continue;
      if (static_cast<std::size_t>(node.feature) >= schema.feature_count())
        throw SchemaError("tree split references unknown feature index");
      if (node.split_level >= schema.feature(node.feature).levels.size())
        throw SchemaError("tree split level out of range");
      if (node.left < 0 || node.right < 0 ||
          static_cast<std::size_t>(node.left) >= tree.size() ||
          static_cast<std::size_t>(node.right) >= tree.size())
        throw ConfigError("tree child index out of range");
    }
  }
}

Outcome TreeEnsembleModel::classify(const State& s) const {
  std::size_t favorable = 0;
  for (const auto& tree : trees_) {
    std::int32_t at = 0;
    while (tree[at].feature >= 0) {
      const auto& node = tree[at];
      at = s.levels[node.feature] <= node.split_level ? node.left : node.right;
    }
    if (tree[at].leaf == Outcome::favorable) ++favorable;
  }
  const double fraction = static_cast<double>(favorable) / static_cast<double>(trees_.size());
  return fraction > vote_threshold_ ? Outcome::favorable : Outcome::unfavorable;
}

nlohmann::json TreeEnsembleModel::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree) {
      nodes.push_back({{"f", n.feature},
                       {"s", n.split_level},
                       {"l", n.left},
                       {"r", n.right},
                       {"c", n.leaf == Outcome::favorable ? 1 : 0}});
    }
    trees.push_back(nodes);
  }
  return {{"type", "tree_ensemble"},
          {"version", kModelFileVersion},
          {"schema_hash", hash_hex(schema_hash_)},
          {"vote_threshold", vote_threshold_},
          {"trees", trees}};
}

std::unique_ptr<TreeEnsembleModel> TreeEnsembleModel::from_json(const FeatureSchema& schema,
                                                                const nlohmann::json& j) {
  std::vector<std::vector<TreeNode>> trees;
  for (const auto& tree : j.at("trees")) {
    std::vector<TreeNode> nodes;
    for (const auto& n : tree) {
      TreeNode node;
      node.feature = n.at("f").get<std::int32_t>();
      node.split_level = n.at("s").get<std::uint32_t>();
      node.left = n.at("l").get<std::int32_t>();
      node.right = n.at("r").get<std::int32_t>();
      node.leaf = n.at("c").get<int>() == 1 ? Outcome::favorable : Outcome::unfavorable;
      nodes.push_back(node);
    }
    trees.push_back(std::move(nodes));
  }
  return std::make_unique<TreeEnsembleModel>(schema, std::move(trees),
                                             j.at("vote_threshold").get<double>());
}

namespace {

struct TreeBuilder {
  const FeatureSchema& schema;
  std::span<const LabeledInstance> rows;
  int max_depth;
  std::size_t features_per_split;
  CounterRng& rng;
  std::vector<TreeNode> nodes;

  static double gini(std::size_t favorable, std::size_t total) {
    if (total == 0) return 0.0;
    const double p = static_cast<double>(favorable) / static_cast<double>(total);
    return 2.0 * p * (1.0 - p);
  }

  Outcome majority(const std::vector<std::size_t>& idx) const {
    std::size_t favorable = 0;
    for (std::size_t i : idx)
      if (rows[i].label == Outcome::favorable) ++favorable;
    // Ties resolve to unfavorable.
    return 2 * favorable > idx.size() ? Outcome::favorable : Outcome::unfavorable;
  }

  std::int32_t build(std::vector<std::size_t> idx, int depth) {
    std::size_t favorable = 0;
    for (std::size_t i : idx)
      if (rows[i].label == Outcome::favorable) ++favorable;

    const bool pure = favorable == 0 || favorable == idx.size();
    if (depth >= max_depth || idx.size() < 2 || pure) {
      TreeNode leaf;
      leaf.leaf = majority(idx);
      nodes.push_back(leaf);
      return static_cast<std::int32_t>(nodes.size() - 1);
    }

    // Candidate features for this node, sampled without replacement.
    std::vector<std::size_t> candidates(schema.feature_count());
    std::iota(candidates.begin(), candidates.end(), 0);
    for (std::size_t i = 0; i + 1 < candidates.size(); ++i) {
      const std::size_t j = i + rng.next_below(candidates.size() - i);
      std::swap(candidates[i], candidates[j]);
    }
    candidates.resize(std::min(features_per_split, candidates.size()));

    double best_impurity = gini(favorable, idx.size());
    std::int32_t best_feature = -1;
    std::uint32_t best_split = 0;

    for (std::size_t f : candidates) {
      const std::size_t n_levels = schema.feature(f).levels.size();
      // Counts per level, then prefix scan over candidate thresholds.
      std::vector<std::size_t> total(n_levels, 0), fav(n_levels, 0);
      for (std::size_t i : idx) {
        const std::uint32_t lv = rows[i].state.levels[f];
        ++total[lv];
        if (rows[i].label == Outcome::favorable) ++fav[lv];
      }
      std::size_t left_total = 0, left_fav = 0;
      for (std::uint32_t split = 0; split + 1 < n_levels; ++split) {
        left_total += total[split];
        left_fav += fav[split];
        const std::size_t right_total = idx.size() - left_total;
        if (left_total == 0 || right_total == 0) continue;
        const std::size_t right_fav = favorable - left_fav;
        const double weighted =
            (static_cast<double>(left_total) * gini(left_fav, left_total) +
             static_cast<double>(right_total) * gini(right_fav, right_total)) /
            static_cast<double>(idx.size());
        if (weighted + 1e-12 < best_impurity) {
          best_impurity = weighted;
          best_feature = static_cast<std::int32_t>(f);
          best_split = split;
        }
      }
    }

    if (best_feature < 0) {
      TreeNode leaf;
      leaf.leaf = majority(idx);
      nodes.push_back(leaf);
      return static_cast<std::int32_t>(nodes.size() - 1);
    }

    std::vector<std::size_t> left_idx, right_idx;
    for (std::size_t i : idx) {
      if (rows[i].state.levels[best_feature] <= best_split)
        left_idx.push_back(i);
      else
        right_idx.push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();

    TreeNode node;
    node.feature = best_feature;
    node.split_level = best_split;
    nodes.push_back(node);
    const auto self = static_cast<std::int32_t>(nodes.size() - 1);
    const auto left = build(std::move(left_idx), depth + 1);
    const auto right = build(std::move(right_idx), depth + 1);
    nodes[self].left = left;
    nodes[self].right = right;
    return self;
  }
};

}  // namespace

TrainResult train_tree_ensemble(const FeatureSchema& schema,
                                std::span<const LabeledInstance> rows, const TrainConfig& config) {
  if (rows.empty()) throw DataError("no training rows");
  if (config.n_trees < 1) throw ConfigError("n_trees must be positive");
  if (config.max_depth < 1) throw ConfigError("max_depth must be positive");

  std::size_t favorable = 0;
  for (const auto& row : rows) {
    schema.validate(row.state);
    if (row.label == Outcome::favorable) ++favorable;
  }
  if (favorable == 0 || favorable == rows.size())
    throw DataError("training data contains a single class");

  CounterRng rng(config.seed);

  // Seeded shuffle, then holdout split from the tail.
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    const std::size_t j = i + rng.next_below(order.size() - i);
    std::swap(order[i], order[j]);
  }
  auto n_holdout = static_cast<std::size_t>(
      std::floor(config.holdout_fraction * static_cast<double>(rows.size())));
  if (rows.size() - n_holdout < 2) n_holdout = 0;
  const std::size_t n_train = rows.size() - n_holdout;

  std::vector<LabeledInstance> train;
  train.reserve(n_train);
  for (std::size_t i = 0; i < n_train; ++i) train.push_back(rows[order[i]]);

  std::size_t train_favorable = 0;
  for (const auto& row : train)
    if (row.label == Outcome::favorable) ++train_favorable;
  if (train_favorable == 0 || train_favorable == train.size())
    throw DataError("training split contains a single class");

  const std::size_t d = schema.feature_count();
  std::size_t features_per_split;
  if (config.feature_subsample > 0.0) {
    features_per_split = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(config.feature_subsample * static_cast<double>(d))));
  } else {
    features_per_split =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(d)))));
  }
  features_per_split = std::min(features_per_split, d);

  std::vector<std::vector<TreeNode>> trees;
  trees.reserve(config.n_trees);
  for (int t = 0; t < config.n_trees; ++t) {
    std::vector<std::size_t> bootstrap(train.size());
    for (auto& idx : bootstrap) idx = rng.next_below(train.size());
    TreeBuilder builder{schema, train, config.max_depth, features_per_split, rng, {}};
    builder.build(std::move(bootstrap), 0);
    trees.push_back(std::move(builder.nodes));
  }

  TrainResult result;
  result.model = std::make_unique<TreeEnsembleModel>(schema, std::move(trees), 0.5);

  if (n_holdout > 0) {
    std::size_t correct = 0;
    for (std::size_t i = n_train; i < rows.size(); ++i) {
      const auto& row = rows[order[i]];
      if (result.model->classify(row.state) == row.label) ++correct;
    }
    result.holdout_accuracy = static_cast<double>(correct) / static_cast<double>(n_holdout);
  } else {
    result.holdout_accuracy = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

void save_model(const DecisionModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open model file for writing: " + path.string());
  out << model.to_json().dump(2) << "\n";
  if (!out) throw ConfigError("failed writing model file: " + path.string());
}

std::unique_ptr<DecisionModel> model_from_json(const FeatureSchema& schema,
                                               const nlohmann::json& j) {
  const auto type = j.at("type").get<std::string>();
  if (j.contains("version") && j.at("version").get<int>() != kModelFileVersion)
    throw ConfigError("unsupported model file version");
  if (j.contains("schema_hash") &&
      j.at("schema_hash").get<std::string>() != hash_hex(schema.hash()))
    throw ConfigError("model schema hash does not match the active schema");
  if (type == "rule") return RuleModel::from_json(schema, j);
  if (type == "tree_ensemble") return TreeEnsembleModel::from_json(schema, j);
  throw ConfigError("unknown model type: " + type);
}

std::unique_ptr<DecisionModel> load_model(const FeatureSchema& schema,
                                          const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed model file " + path.string() + ": " + e.what());
  }
  try {
    return model_from_json(schema, j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed model file " + path.string() + ": " + e.what());
  }
}

}  // namespace safear
