// Command-line front end: solve recourse policies, evaluate them with
// Monte-Carlo rollouts, run group-disparity studies, and render policy-risk
// trace figures.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "safear/error.hpp"
#include "safear/evaluation.hpp"
#include "safear/experiment.hpp"
#include "safear/hash.hpp"
#include "safear/report.hpp"
#include "safear/viz.hpp"

namespace fs = std::filesystem;
using namespace safear;

namespace {

int default_jobs() {
  if (const char* env = std::getenv("SAFEAR_JOBS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

/// Initial-state flag: either a flat index or comma-separated per-feature
/// tokens (level labels or level indices).
StateIndex parse_state(const FeatureSchema& schema, const std::string& text) {
  if (text.find(',') == std::string::npos) {
    try {
      return static_cast<StateIndex>(std::stoull(text));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse state '" + text + "'");
    }
  }
  State s;
  std::size_t begin = 0, feature = 0;
  while (begin <= text.size()) {
    const auto end = text.find(',', begin);
    const std::string token =
        text.substr(begin, end == std::string::npos ? std::string::npos : end - begin);
    if (feature >= schema.feature_count())
      throw ConfigError("state has more tokens than schema features");
    std::uint32_t level;
    try {
      std::size_t used = 0;
      level = static_cast<std::uint32_t>(std::stoul(token, &used));
      if (used != token.size()) level = schema.require_level(feature, token);
    } catch (const std::exception&) {
      level = schema.require_level(feature, token);
    }
    s.levels.push_back(level);
    ++feature;
    if (end == std::string::npos) break;
    begin = end + 1;
  }
  return encode_state(schema, s);
}

struct SolveOptions {
  std::string config_path;
  double beta = 0.0;
  int horizon = 0;
  std::string variant = "grsvi";
  std::string out_path;
  int jobs = default_jobs();
  // grsevi only
  int episodes = 10000;
  double decay = 0.9995;
  double initial_epsilon = 1.0;
  std::uint64_t seed = 0;
  std::string state_text;
};

int run_solve(const SolveOptions& opt) {
  const auto config = load_experiment_config(opt.config_path);
  const auto mdp = build_mdp(config);
  const auto variant = solver_variant_from_string(opt.variant);

  SolverConfig solver;
  solver.beta = opt.beta;
  solver.horizon = opt.horizon > 0 ? opt.horizon : config.horizon;
  solver.deviation_mode =
      variant == SolverVariant::lpsd ? DeviationMode::lower_partial : DeviationMode::full_sigma;
  solver.jobs = opt.jobs;

  PolicyTable table;
  SolveStats stats;
  nlohmann::json extra;
  if (variant == SolverVariant::grsevi) {
    if (opt.state_text.empty())
      throw ConfigError("grsevi needs --state for the initial state");
    EpisodicConfig episodic;
    episodic.max_episodes = opt.episodes;
    episodic.epsilon_decay = opt.decay;
    episodic.initial_epsilon = opt.initial_epsilon;
    episodic.rng_seed = opt.seed;
    episodic.initial_state = parse_state(config.schema, opt.state_text);
    const auto start = std::chrono::steady_clock::now();
    auto result = g_rsevi(mdp, solver, episodic);
    stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    table = std::move(result.policy);
    double last_mean = 0.0;
    const std::size_t window = std::min<std::size_t>(500, result.episode_costs.size());
    for (std::size_t i = result.episode_costs.size() - window; i < result.episode_costs.size(); ++i)
      last_mean += result.episode_costs[i];
    if (window > 0) last_mean /= static_cast<double>(window);
    extra["episodes"] = opt.episodes;
    extra["final_window_mean_cost"] = last_mean;
  } else {
    table = g_rsvi(mdp, solver, &stats);
    if (stats.dead_end_states > 0)
      std::cerr << "warning: " << stats.dead_end_states
                << " non-goal states have no applicable action (treated as absorbing)\n";
  }

  PolicyFileHeader header;
  header.config_hash = config.config_hash;
  header.schema_hash = config.schema.hash();
  header.horizon = solver.horizon;
  header.n_states = mdp.state_count();
  header.beta = opt.beta;
  header.variant = variant;
  header.deviation_mode = solver.deviation_mode;
  save_policy(opt.out_path, header, config.canonical, table);

  std::cout << "solved " << config.name << " beta=" << opt.beta << " H=" << solver.horizon
            << " variant=" << opt.variant << " states=" << mdp.state_count()
            << " goals=" << mdp.goal_count() << " wall=" << stats.wall_seconds << "s\n";

  nlohmann::json params = {{"config", opt.config_path},
                           {"config_hash", hash_hex(config.config_hash)},
                           {"schema_hash", hash_hex(config.schema.hash())},
                           {"beta", opt.beta},
                           {"horizon", solver.horizon},
                           {"variant", opt.variant},
                           {"jobs", opt.jobs}};
  if (variant == SolverVariant::grsevi) {
    params["seed"] = opt.seed;
    params["episodes"] = opt.episodes;
    params["epsilon_decay"] = opt.decay;
    params["initial_epsilon"] = opt.initial_epsilon;
    params["initial_state"] = opt.state_text;
    params.update(extra);
  }
  write_manifest(opt.out_path + ".manifest.json",
                 make_manifest("solve", params, {fs::path(opt.out_path)}));
  return 0;
}

struct EvaluateOptions {
  std::vector<std::string> policy_paths;
  std::string instances_path;
  int trials = 100;
  std::vector<double> alphas;
  std::uint64_t seed = 0;
  std::string out_base;
  int jobs = default_jobs();
};

std::string policy_label(const PolicyFileHeader& header) {
  std::string label = "beta=" + format_double(header.beta);
  if (header.variant != SolverVariant::grsvi) label += "/" + to_string(header.variant);
  return label;
}

int run_evaluate(const EvaluateOptions& opt) {
  const auto instances = InstancesFile::load(opt.instances_path);
  if (instances.states.empty()) throw DataError("instances file is empty");
  std::vector<double> alphas = opt.alphas.empty() ? std::vector<double>{0.80, 0.95} : opt.alphas;

  std::vector<PolicyEvaluation> evaluations;
  nlohmann::json policy_meta = nlohmann::json::array();
  for (const auto& path : opt.policy_paths) {
    auto loaded = load_policy(path);
    if (loaded.header.schema_hash != instances.schema.hash())
      throw ConfigError("policy " + path + " and instances file use different schemas");
    const auto mdp = build_mdp(loaded.config);
    const auto idx = instances.indices();
    auto result =
        evaluate(mdp, loaded.table, idx, opt.trials, alphas, opt.seed, opt.jobs);
    if (!result.skipped.empty())
      std::cerr << "warning: skipped " << result.skipped.size()
                << " instances already classified favorable\n";
    PolicyEvaluation ev;
    ev.label = policy_label(loaded.header);
    ev.beta = loaded.header.beta;
    ev.horizon = loaded.header.horizon;
    ev.variant = to_string(loaded.header.variant);
    ev.result = std::move(result);
    evaluations.push_back(std::move(ev));
    policy_meta.push_back({{"path", path},
                           {"config_hash", hash_hex(loaded.header.config_hash)},
                           {"beta", loaded.header.beta},
                           {"horizon", loaded.header.horizon},
                           {"variant", to_string(loaded.header.variant)}});
  }

  const nlohmann::json metadata = {{"instances", opt.instances_path},
                                   {"schema_hash", hash_hex(instances.schema.hash())},
                                   {"n_trials", opt.trials},
                                   {"alphas", alphas},
                                   {"seed", opt.seed},
                                   {"policies", policy_meta}};

  const fs::path csv_path = opt.out_base + ".csv";
  const fs::path json_path = opt.out_base + ".json";
  write_text_file(csv_path, evaluation_csv(evaluations, alphas));
  write_text_file(json_path, evaluation_json(evaluations, alphas, metadata).dump(2) + "\n");
  std::cout << "evaluated " << evaluations.size() << " policies on "
            << evaluations.front().result.instances.size() << " instances -> " << csv_path.string()
            << "\n";

  nlohmann::json params = metadata;
  params["trials"] = opt.trials;
  write_manifest(opt.out_base + ".manifest.json",
                 make_manifest("evaluate", params, {csv_path, json_path}));
  return 0;
}

struct DisparityOptions {
  std::string policy_path;
  std::string instances_path;
  std::string group_feature;
  int trials = 100;
  std::vector<double> alphas;
  std::uint64_t seed = 0;
  std::string out_base;
  int jobs = default_jobs();
};

int run_disparity(const DisparityOptions& opt) {
  auto loaded = load_policy(opt.policy_path);
  const auto instances = InstancesFile::load(opt.instances_path);
  if (loaded.header.schema_hash != instances.schema.hash())
    throw ConfigError("policy and instances file use different schemas");

  const auto& schema = instances.schema;
  const std::size_t group = schema.require_feature(opt.group_feature);
  if (schema.feature(group).mutability != Mutability::immutable)
    throw ConfigError("group feature must be immutable");
  if (schema.feature(group).levels.size() != 2)
    throw ConfigError("group feature must be binary (more than 2 groups is unsupported)");

  std::vector<StateIndex> group_a, group_b;
  for (const auto& s : instances.states) {
    (s.levels[group] == 0 ? group_a : group_b).push_back(encode_state(schema, s));
  }
  if (group_a.empty() || group_b.empty())
    throw DataError("one of the groups has no instances");

  std::vector<double> alphas = opt.alphas.empty() ? std::vector<double>{0.80, 0.95} : opt.alphas;
  const auto mdp = build_mdp(loaded.config);
  const auto eval_a = evaluate(mdp, loaded.table, group_a, opt.trials, alphas, opt.seed, opt.jobs);
  const auto eval_b = evaluate(mdp, loaded.table, group_b, opt.trials, alphas, opt.seed, opt.jobs);

  const auto report = disparity(eval_a, eval_b, schema.feature(group).levels[0],
                                schema.feature(group).levels[1]);

  const nlohmann::json metadata = {{"policy", opt.policy_path},
                                   {"config_hash", hash_hex(loaded.header.config_hash)},
                                   {"beta", loaded.header.beta},
                                   {"instances", opt.instances_path},
                                   {"group_feature", opt.group_feature},
                                   {"n_trials", opt.trials},
                                   {"alphas", alphas},
                                   {"seed", opt.seed}};

  const fs::path csv_path = opt.out_base + ".csv";
  const fs::path json_path = opt.out_base + ".json";
  write_text_file(csv_path, disparity_csv(report));
  write_text_file(json_path, disparity_json(report, metadata).dump(2) + "\n");
  std::cout << "disparity over '" << opt.group_feature << "': " << report.group_a_label << " n="
            << group_a.size() << " vs " << report.group_b_label << " n=" << group_b.size()
            << " -> " << csv_path.string() << "\n";

  write_manifest(opt.out_base + ".manifest.json",
                 make_manifest("disparity", metadata, {csv_path, json_path}));
  return 0;
}

struct VizOptions {
  std::vector<std::string> policy_paths;
  std::string state_text;
  int top_k = 6;
  std::string out_path;
};

int run_viz(const VizOptions& opt) {
  if (opt.top_k < 1) throw ConfigError("--top-k must be at least 1");

  std::vector<TraceFigure> panels;
  std::unique_ptr<RecourseMdp> mdp;  // all policies must share one schema
  std::uint64_t schema_hash = 0;
  for (const auto& path : opt.policy_paths) {
    auto loaded = load_policy(path);
    if (!mdp) {
      schema_hash = loaded.header.schema_hash;
      mdp = std::make_unique<RecourseMdp>(build_mdp(loaded.config));
    } else if (loaded.header.schema_hash != schema_hash) {
      throw ConfigError("viz policies use different schemas");
    }
    const StateIndex initial = parse_state(loaded.config.schema, opt.state_text);
    if (initial >= mdp->state_count()) throw ConfigError("initial state out of range");
    if (mdp->is_goal(initial))
      throw ConfigError("initial state is already favorable; nothing to visualize");
    auto figure = enumerate_traces(*mdp, loaded.table, initial, opt.top_k);
    figure.label = policy_label(loaded.header);
    panels.push_back(std::move(figure));
  }

  write_text_file(opt.out_path, render_trace_svg(*mdp, panels));
  std::cout << "wrote " << opt.out_path << " (" << panels.size() << " panels)\n";

  const nlohmann::json params = {{"policies", opt.policy_paths},
                                 {"state", opt.state_text},
                                 {"top_k", opt.top_k},
                                 {"schema_hash", hash_hex(schema_hash)}};
  write_manifest(opt.out_path + ".manifest.json",
                 make_manifest("viz", params, {fs::path(opt.out_path)}));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SafeAR: risk-aware algorithmic recourse policies for factored finite-horizon MDPs"};
  app.require_subcommand(1);

  SolveOptions solve_opt;
  auto* solve = app.add_subcommand("solve", "Compute a recourse policy from an experiment config");
  solve->add_option("--config", solve_opt.config_path, "Experiment config (.cfg)")->required();
  solve->add_option("--beta", solve_opt.beta, "Risk-aversion level (>= 0)")->required();
  solve->add_option("--horizon", solve_opt.horizon, "Horizon override (default: config)");
  solve->add_option("--variant", solve_opt.variant, "grsvi | grsevi | lpsd")
      ->check(CLI::IsMember({"grsvi", "grsevi", "lpsd"}));
  solve->add_option("--out", solve_opt.out_path, "Policy file to write")->required();
  solve->add_option("--jobs", solve_opt.jobs, "Worker threads");
  solve->add_option("--episodes", solve_opt.episodes, "grsevi: episode budget");
  solve->add_option("--decay", solve_opt.decay, "grsevi: epsilon decay per episode");
  solve->add_option("--init-epsilon", solve_opt.initial_epsilon, "grsevi: initial epsilon");
  solve->add_option("--seed", solve_opt.seed, "grsevi: RNG seed");
  solve->add_option("--state", solve_opt.state_text, "grsevi: initial state");

  EvaluateOptions eval_opt;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Monte-Carlo evaluation of policies");
  evaluate_cmd->add_option("--policy", eval_opt.policy_paths, "Policy file(s)")->required();
  evaluate_cmd->add_option("--instances", eval_opt.instances_path, "Instances file")->required();
  evaluate_cmd->add_option("--trials", eval_opt.trials, "Rollouts per instance");
  evaluate_cmd->add_option("--alpha", eval_opt.alphas, "Confidence levels (default 0.80 0.95)");
  evaluate_cmd->add_option("--seed", eval_opt.seed, "Base RNG seed");
  evaluate_cmd->add_option("--out", eval_opt.out_base, "Output base path (.csv/.json)")->required();
  evaluate_cmd->add_option("--jobs", eval_opt.jobs, "Worker threads");

  DisparityOptions disp_opt;
  auto* disparity_cmd = app.add_subcommand("disparity", "Group-disparity study over one policy");
  disparity_cmd->add_option("--policy", disp_opt.policy_path, "Policy file")->required();
  disparity_cmd->add_option("--instances", disp_opt.instances_path, "Instances file")->required();
  disparity_cmd->add_option("--group", disp_opt.group_feature, "Immutable binary feature")->required();
  disparity_cmd->add_option("--trials", disp_opt.trials, "Rollouts per instance");
  disparity_cmd->add_option("--alpha", disp_opt.alphas, "Confidence levels (default 0.80 0.95)");
  disparity_cmd->add_option("--seed", disp_opt.seed, "Base RNG seed");
  disparity_cmd->add_option("--out", disp_opt.out_base, "Output base path (.csv/.json)")->required();
  disparity_cmd->add_option("--jobs", disp_opt.jobs, "Worker threads");

  VizOptions viz_opt;
  auto* viz = app.add_subcommand("viz", "Render policy-risk traces as SVG");
  viz->add_option("--policy", viz_opt.policy_paths, "Policy file(s), one panel each")->required();
  viz->add_option("--state", viz_opt.state_text, "Initial state")->required();
  viz->add_option("--top-k", viz_opt.top_k, "Traces per panel");
  viz->add_option("--out", viz_opt.out_path, "SVG file to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (solve->parsed()) return run_solve(solve_opt);
    if (evaluate_cmd->parsed()) return run_evaluate(eval_opt);
    if (disparity_cmd->parsed()) return run_disparity(disp_opt);
    if (viz->parsed()) return run_viz(viz_opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
