// Dataset utility: generates desk-scale raw CSVs shaped like the public
// Adult Income / German Credit / insurance-premium datasets (the real files
// are user-supplied, not redistributed), and runs the preprocess -> train ->
// select pipeline that produces model and instance files for the main CLI.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "safear/dataset.hpp"
#include "safear/decision.hpp"
#include "safear/error.hpp"
#include "safear/experiment.hpp"
#include "safear/hash.hpp"
#include "safear/rng.hpp"

using namespace safear;

namespace {

double normal_draw(CounterRng& rng) {
  const double u1 = std::max(1e-12, rng.next_unit());
  const double u2 = rng.next_unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

using Weighted = std::vector<std::pair<std::string, double>>;

std::string pick(CounterRng& rng, const Weighted& options) {
  double total = 0.0;
  for (const auto& [t, w] : options) total += w;
  double u = rng.next_unit() * total;
  for (const auto& [t, w] : options) {
    u -= w;
    if (u < 0.0) return t;
  }
  return options.back().first;
}

/// Labels are assigned by thresholding a hidden score at a target quantile,
/// so the class balance is exact by construction.
std::vector<std::string> threshold_labels(const std::vector<double>& scores,
                                          double favorable_rate, const std::string& favorable,
                                          const std::string& unfavorable) {
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  const auto cut = static_cast<std::size_t>(
      std::floor((1.0 - favorable_rate) * static_cast<double>(sorted.size())));
  const double tau = sorted[std::min(cut, sorted.size() - 1)];
  std::vector<std::string> labels;
  labels.reserve(scores.size());
  for (double s : scores) labels.push_back(s >= tau ? favorable : unfavorable);
  return labels;
}

void gen_aid(std::ostream& out, int rows, std::uint64_t seed) {
  CounterRng rng(seed);
  out << "age,workclass,education,marital_status,occupation,race,gender,hours_per_week,income\n";

  const Weighted education = {
      {"Preschool", 0.01}, {"7th-8th", 0.03},    {"9th", 0.02},        {"10th", 0.04},
      {"11th", 0.05},      {"12th", 0.02},       {"HS-grad", 0.32},    {"Some-college", 0.18},
      {"Assoc-acdm", 0.03},{"Assoc-voc", 0.04},  {"Bachelors", 0.17},  {"Masters", 0.08},
      {"Prof-school", 0.02}, {"Doctorate", 0.02}};
  const Weighted workclass = {{"Private", 0.70},         {"Self-emp-not-inc", 0.08},
                              {"Self-emp-inc", 0.03},    {"Federal-gov", 0.03},
                              {"State-gov", 0.04},       {"Local-gov", 0.07},
                              {"Without-pay", 0.01},     {"Never-worked", 0.01},
                              {"?", 0.03}};
  const Weighted occupation_female = {
      {"Adm-clerical", 0.24}, {"Other-service", 0.19}, {"Prof-specialty", 0.15},
      {"Sales", 0.12},        {"Exec-managerial", 0.10}, {"Tech-support", 0.05},
      {"Machine-op-inspct", 0.05}, {"Craft-repair", 0.03}, {"Handlers-cleaners", 0.02},
      {"Priv-house-serv", 0.02},   {"Farming-fishing", 0.01}, {"Protective-serv", 0.01},
      {"?", 0.01}};
  const Weighted occupation_male = {
      {"Craft-repair", 0.19},  {"Exec-managerial", 0.14}, {"Prof-specialty", 0.12},
      {"Sales", 0.11},         {"Transport-moving", 0.08}, {"Machine-op-inspct", 0.08},
      {"Other-service", 0.07}, {"Adm-clerical", 0.06},    {"Handlers-cleaners", 0.06},
      {"Farming-fishing", 0.04}, {"Protective-serv", 0.03}, {"Tech-support", 0.01},
      {"?", 0.01}};
  const Weighted marital_female = {{"Never-married", 0.34}, {"Married-civ-spouse", 0.26},
                                   {"Divorced", 0.20},      {"Widowed", 0.10},
                                   {"Separated", 0.07},     {"Married-spouse-absent", 0.03}};
  const Weighted marital_male = {{"Married-civ-spouse", 0.56}, {"Never-married", 0.30},
                                 {"Divorced", 0.09},           {"Separated", 0.03},
                                 {"Widowed", 0.01},            {"Married-spouse-absent", 0.01}};

  const std::map<std::string, int> edu_level = {
      {"Preschool", 0}, {"7th-8th", 0}, {"9th", 0},  {"10th", 0}, {"11th", 0}, {"12th", 0},
      {"HS-grad", 1},   {"Some-college", 1}, {"Assoc-acdm", 1}, {"Assoc-voc", 1},
      {"Bachelors", 2}, {"Masters", 3}, {"Prof-school", 3}, {"Doctorate", 4}};
  const std::map<std::string, double> occ_bonus = {
      {"Prof-specialty", 1.2},  {"Exec-managerial", 1.0}, {"Adm-clerical", 1.0},
      {"Tech-support", 1.0},    {"Sales", 0.6},           {"Craft-repair", 0.45},
      {"Machine-op-inspct", 0.45}, {"Handlers-cleaners", 0.45}, {"Transport-moving", 0.45},
      {"Farming-fishing", 0.45},   {"Other-service", 0.3},      {"Protective-serv", 0.3},
      {"Priv-house-serv", 0.3},    {"?", 0.15}};

  struct Row {
    int age;
    std::string wc, edu, marital, occ, race, gender;
    int hours;
  };
  std::vector<Row> data;
  std::vector<double> scores;
  data.reserve(rows);
  for (int i = 0; i < rows; ++i) {
    Row r;
    r.gender = rng.next_unit() < 0.33 ? "Female" : "Male";
    r.race = rng.next_unit() < 0.85 ? "White" : pick(rng, {{"Black", 0.6}, {"Asian-Pac-Islander", 0.25}, {"Amer-Indian-Eskimo", 0.1}, {"Other", 0.05}});
    r.age = 17 + static_cast<int>(std::min(63.0, -14.0 * std::log(std::max(1e-9, rng.next_unit()))));
    r.edu = pick(rng, education);
    r.wc = pick(rng, workclass);
    r.occ = pick(rng, r.gender == "Female" ? occupation_female : occupation_male);
    r.marital = pick(rng, r.gender == "Female" ? marital_female : marital_male);
    const double hours_mean = r.gender == "Female" ? 36.0 : 42.5;
    r.hours = std::clamp(static_cast<int>(std::lround(hours_mean + 10.0 * normal_draw(rng))), 1, 99);
    data.push_back(r);

    const int age_lvl = r.age < 20 ? 0 : r.age < 25 ? 1 : r.age < 30 ? 2 : r.age < 40 ? 3 : r.age < 50 ? 4 : 5;
    const int hrs_lvl = r.hours < 20 ? 0 : r.hours < 35 ? 1 : r.hours < 45 ? 2 : 3;
    const double age_bonus[] = {0.0, 0.25, 0.5, 0.7, 0.7, 0.5};
    double score = 1.1 * edu_level.at(r.edu) + 0.55 * hrs_lvl + occ_bonus.at(r.occ);
    if (r.wc.find("gov") != std::string::npos) score += 0.6;
    if (r.wc.find("Self") != std::string::npos) score += 0.7;
    if (r.wc == "Private") score += 0.5;
    score += age_bonus[age_lvl];
    if (r.marital == "Married-civ-spouse" || r.marital == "Married-AF-spouse") score += 0.9;
    if (r.race == "White") score += 0.1;
    score += 0.65 * normal_draw(rng);
    scores.push_back(score);
  }
  const auto labels = threshold_labels(scores, 0.24, ">50K", "<=50K");
  for (int i = 0; i < rows; ++i) {
    const auto& r = data[i];
    out << r.age << "," << r.wc << "," << r.edu << "," << r.marital << "," << r.occ << ","
        << r.race << "," << r.gender << "," << r.hours << "," << labels[i] << "\n";
  }
}

void gen_gcd(std::ostream& out, int rows, std::uint64_t seed) {
  CounterRng rng(seed);
  out << "Age,Sex,Job,Housing,Saving accounts,Checking account,Credit amount,Duration,Purpose,Risk\n";

  const Weighted savings = {{"none", 0.18}, {"little", 0.48}, {"moderate", 0.20}, {"quite rich", 0.06}, {"rich", 0.08}};
  const Weighted checking = {{"none", 0.39}, {"little", 0.27}, {"moderate", 0.25}, {"rich", 0.09}};
  const Weighted housing = {{"own", 0.71}, {"rent", 0.18}, {"free", 0.11}};
  const Weighted purpose = {{"car", 0.33},      {"radio/TV", 0.28}, {"furniture/equipment", 0.18},
                            {"business", 0.10}, {"education", 0.06}, {"repairs", 0.02},
                            {"domestic appliances", 0.01}, {"vacation/others", 0.02}};
  const Weighted job = {{"0", 0.05}, {"1", 0.15}, {"2", 0.63}, {"3", 0.17}};

  const std::map<std::string, int> sav_lvl = {{"none", 0}, {"little", 1}, {"moderate", 2}, {"quite rich", 3}, {"rich", 3}};
  const std::map<std::string, int> chk_lvl = {{"none", 0}, {"little", 1}, {"moderate", 2}, {"rich", 3}};

  struct Row {
    int age;
    std::string sex, job, housing, sav, chk, purpose;
    int amount, duration;
  };
  std::vector<Row> data;
  std::vector<double> scores;
  for (int i = 0; i < rows; ++i) {
    Row r;
    r.sex = rng.next_unit() < 0.37 ? "female" : "male";
    r.age = std::clamp(19 + static_cast<int>(-10.0 * std::log(std::max(1e-9, rng.next_unit()))), 19, 75);
    r.job = pick(rng, job);
    r.housing = pick(rng, housing);
    r.sav = pick(rng, savings);
    r.chk = pick(rng, checking);
    r.purpose = pick(rng, purpose);
    r.amount = static_cast<int>(400.0 + 300.0 * std::exp(3.8 * rng.next_unit()));
    r.duration = 4 + static_cast<int>(66.0 * rng.next_unit() * rng.next_unit());
    data.push_back(r);

    const int age_lvl = r.age < 25 ? 0 : r.age < 35 ? 1 : r.age < 60 ? 2 : 3;
    const int dur_lvl = r.duration < 12 ? 0 : r.duration < 24 ? 1 : r.duration < 36 ? 2 : 3;
    const int credit_lvl = r.amount < 1400 ? 0 : r.amount < 2400 ? 1 : r.amount < 4000 ? 2 : 3;
    double score = 1.0 * sav_lvl.at(r.sav) + 0.9 * chk_lvl.at(r.chk) + 0.7 * std::stoi(r.job) +
                   0.4 * dur_lvl - 0.35 * credit_lvl + 0.2 * age_lvl;
    if (r.housing == "own") score += 0.8;
    if (r.housing == "rent") score += 0.3;
    if (r.purpose == "business") score += 0.2;
    if (r.purpose == "education") score += 0.1;
    if (r.sex == "male") score += 0.15;
    score += 0.7 * normal_draw(rng);
    scores.push_back(score);
  }
  const auto labels = threshold_labels(scores, 0.70, "good", "bad");
  for (int i = 0; i < rows; ++i) {
    const auto& r = data[i];
    out << r.age << "," << r.sex << "," << r.job << "," << r.housing << "," << r.sav << ","
        << r.chk << "," << r.amount << "," << r.duration << "," << r.purpose << "," << labels[i]
        << "\n";
  }
}

void gen_hipd(std::ostream& out, int rows, std::uint64_t seed) {
  CounterRng rng(seed);
  out << "age,sex,bmi,children,smoker,region,charges\n";
  const Weighted children = {{"0", 0.43}, {"1", 0.24}, {"2", 0.18}, {"3", 0.12}, {"4", 0.02}, {"5", 0.01}};
  const Weighted region = {{"southwest", 0.25}, {"southeast", 0.27}, {"northwest", 0.24}, {"northeast", 0.24}};

  for (int i = 0; i < rows; ++i) {
    const std::string sex = rng.next_unit() < 0.5 ? "female" : "male";
    const int age = 18 + static_cast<int>(rng.next_unit() * 47.0);
    const double bmi = std::clamp(30.0 + 6.0 * normal_draw(rng), 16.0, 52.0);
    const bool smoker = rng.next_unit() < (sex == "male" ? 0.24 : 0.17);
    const std::string reg = pick(rng, region);

    double charges = 1500.0 + 240.0 * age + 350.0 * rng.next_unit() * 4.0;
    if (smoker) {
      charges += 12000.0 + (bmi >= 30.0 ? 18000.0 : 4000.0);
    } else {
      charges += 180.0 * std::max(0.0, bmi - 25.0);
    }
    if (reg == "southeast") charges += 400.0;
    charges = std::max(1000.0, charges + 1500.0 * normal_draw(rng));

    char bmi_text[16], charge_text[24];
    std::snprintf(bmi_text, sizeof(bmi_text), "%.1f", bmi);
    std::snprintf(charge_text, sizeof(charge_text), "%.2f", charges);
    out << age << "," << sex << "," << bmi_text << "," << pick(rng, children) << ","
        << (smoker ? "yes" : "no") << "," << reg << "," << charge_text << "\n";
  }
}

struct GenOptions {
  std::string dataset;
  int rows = 0;
  std::uint64_t seed = 1;
  std::string out_path;
};

int run_gen(const GenOptions& opt) {
  std::ofstream out(opt.out_path);
  if (!out) throw DataError("cannot open output CSV: " + opt.out_path);
  int rows = opt.rows;
  if (opt.dataset == "aid") {
    gen_aid(out, rows > 0 ? rows : 32561, opt.seed);
  } else if (opt.dataset == "gcd") {
    gen_gcd(out, rows > 0 ? rows : 1000, opt.seed);
  } else if (opt.dataset == "hipd") {
    gen_hipd(out, rows > 0 ? rows : 1338, opt.seed);
  } else {
    throw ConfigError("unknown dataset: " + opt.dataset);
  }
  std::cout << "wrote " << opt.out_path << "\n";
  return 0;
}

struct PrepOptions {
  std::string descriptor_path;
  std::string csv_path;
  std::string out_instances;
  std::string train_model_path;
  std::string load_model_path;
  int trees = 50;
  int depth = 8;
  double subsample = 0.0;
  std::uint64_t train_seed = 7;
  std::string select = "label-unfavorable";
  std::vector<std::string> feature_eq;
  std::vector<std::string> feature_lt;
  std::optional<std::size_t> sample;
  std::uint64_t sample_seed = 0;
};

std::pair<std::size_t, std::uint32_t> parse_feature_level(const FeatureSchema& schema,
                                                          const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("expected Feature=Level, got '" + text + "'");
  const auto feature = schema.require_feature(text.substr(0, eq));
  return {feature, schema.require_level(feature, text.substr(eq + 1))};
}

int run_prep(const PrepOptions& opt) {
  const auto descriptor = DatasetDescriptor::load(opt.descriptor_path);
  const auto table = CsvTable::read_file(opt.csv_path);
  auto prep = preprocess(descriptor, table);

  std::size_t favorable = 0;
  for (const auto& inst : prep.instances)
    if (inst.label == Outcome::favorable) ++favorable;
  std::cout << "rows=" << table.rows.size() << " kept=" << prep.instances.size()
            << " rejected=" << prep.rejections.size() << " favorable=" << favorable
            << " unfavorable=" << (prep.instances.size() - favorable)
            << " cardinality=" << prep.schema.cardinality() << "\n";

  std::unique_ptr<DecisionModel> model;
  if (!opt.train_model_path.empty()) {
    TrainConfig config;
    config.n_trees = opt.trees;
    config.max_depth = opt.depth;
    config.feature_subsample = opt.subsample;
    config.seed = opt.train_seed;
    auto trained = train_tree_ensemble(prep.schema, prep.instances, config);
    std::cout << "trained ensemble: trees=" << opt.trees << " depth=" << opt.depth
              << " holdout_accuracy=" << trained.holdout_accuracy << "\n";
    save_model(*trained.model, opt.train_model_path);
    model = std::move(trained.model);
  } else if (!opt.load_model_path.empty()) {
    model = load_model(prep.schema, opt.load_model_path);
  }

  // Instance selection: by dataset label or by model classification.
  std::vector<std::size_t> selected;
  if (opt.select == "classified-unfavorable") {
    if (!model) throw ConfigError("classified-unfavorable selection needs a model");
    std::vector<LabeledInstance> classified = prep.instances;
    for (auto& inst : classified) inst.label = model->classify(inst.state);
    InstanceFilter filter;
    filter.label = Outcome::unfavorable;
    for (const auto& text : opt.feature_eq)
      filter.feature_equals.push_back(parse_feature_level(prep.schema, text));
    for (const auto& text : opt.feature_lt)
      filter.feature_below.push_back(parse_feature_level(prep.schema, text));
    selected = select_instances(classified, filter, opt.sample, opt.sample_seed);
  } else {
    InstanceFilter filter;
    if (opt.select == "label-unfavorable")
      filter.label = Outcome::unfavorable;
    else if (opt.select != "all")
      throw ConfigError("unknown --select mode: " + opt.select);
    for (const auto& text : opt.feature_eq)
      filter.feature_equals.push_back(parse_feature_level(prep.schema, text));
    for (const auto& text : opt.feature_lt)
      filter.feature_below.push_back(parse_feature_level(prep.schema, text));
    selected = select_instances(prep.instances, filter, opt.sample, opt.sample_seed);
  }

  InstancesFile file;
  file.schema = prep.schema;
  // Distinct states only; evaluation statistics weight instances equally and
  // duplicates would silently overweight common feature vectors.
  std::set<std::vector<std::uint32_t>> seen;
  for (std::size_t i : selected) {
    const auto& s = prep.instances[i].state;
    if (seen.insert(s.levels).second) file.states.push_back(s);
  }
  file.save(opt.out_instances);
  std::cout << "selected=" << selected.size() << " distinct=" << file.states.size() << " -> "
            << opt.out_instances << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SafeAR dataset utility: generate raw CSVs, preprocess, train, select instances"};
  app.require_subcommand(1);

  GenOptions gen_opt;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic raw CSV shaped like a public dataset");
  gen->add_option("--dataset", gen_opt.dataset, "aid | gcd | hipd")->required();
  gen->add_option("--rows", gen_opt.rows, "Row count (default: dataset-typical size)");
  gen->add_option("--seed", gen_opt.seed, "RNG seed");
  gen->add_option("--out", gen_opt.out_path, "CSV file to write")->required();

  PrepOptions prep_opt;
  auto* prep = app.add_subcommand("prep", "Preprocess a CSV, optionally train a model, select instances");
  prep->add_option("--descriptor", prep_opt.descriptor_path, "Dataset descriptor JSON")->required();
  prep->add_option("--csv", prep_opt.csv_path, "Raw CSV")->required();
  prep->add_option("--out-instances", prep_opt.out_instances, "Instances file to write")->required();
  prep->add_option("--train-model", prep_opt.train_model_path, "Train an ensemble and save it here");
  prep->add_option("--model", prep_opt.load_model_path, "Load an existing model instead");
  prep->add_option("--trees", prep_opt.trees, "Ensemble size");
  prep->add_option("--depth", prep_opt.depth, "Tree depth limit");
  prep->add_option("--subsample", prep_opt.subsample, "Feature fraction per split (0 = sqrt)");
  prep->add_option("--train-seed", prep_opt.train_seed, "Training RNG seed");
  prep->add_option("--select", prep_opt.select, "all | label-unfavorable | classified-unfavorable");
  prep->add_option("--feature-eq", prep_opt.feature_eq, "Keep rows with Feature=Level");
  prep->add_option("--feature-lt", prep_opt.feature_lt, "Keep rows with level(Feature) < level");
  prep->add_option("--sample", prep_opt.sample, "Seeded random subsample size");
  prep->add_option("--sample-seed", prep_opt.sample_seed, "Subsample seed");

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
    if (gen->parsed()) return run_gen(gen_opt);
    if (prep->parsed()) return run_prep(prep_opt);
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
