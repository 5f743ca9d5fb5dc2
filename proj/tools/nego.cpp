// Copyright 2026 The nego Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "nego/experiments.hpp"
#include "nego/fuzzy.hpp"
#include "nego/negotiation.hpp"
#include "nego/surrogate.hpp"
#include "nego/tariff.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

struct AppConfig {
  nego::Tariff tariff = nego::default_tariff();
  nego::FuzzySystem fuzzy = nego::default_fuzzy_system();
  nego::NegotiationConfig negotiation;
  nego::TrainConfig train;
};

nlohmann::json negotiation_to_json(const nego::NegotiationConfig& c) {
  nlohmann::json j{
      {"case", static_cast<int>(c.negotiation_case)},
      {"d_max", c.d_max},
      {"steps",
       {{"vcpu", nego::at(c.steps, nego::Resource::kVcpu)},
        {"ram", nego::at(c.steps, nego::Resource::kRam)},
        {"storage", nego::at(c.steps, nego::Resource::kStorage)}}},
      {"threshold", c.threshold},
      {"max_rounds", c.max_rounds},
      {"seed", c.seed},
  };
  nego::PerResource<double> pr{1.0, 1.0, 1.0};
  if (c.priorities) pr = *c.priorities;
  j["priorities"] = {{"vcpu", nego::at(pr, nego::Resource::kVcpu)},
                     {"ram", nego::at(pr, nego::Resource::kRam)},
                     {"storage", nego::at(pr, nego::Resource::kStorage)}};
  return j;
}

void negotiation_from_json(const nlohmann::json& j,
                           nego::NegotiationConfig& c,
                           bool& explicit_threshold) {
  if (j.contains("case")) {
    c.negotiation_case = static_cast<nego::Case>(j["case"].get<int>());
  }
  if (j.contains("d_max")) c.d_max = j["d_max"].get<double>();
  if (j.contains("steps")) {
    const auto& s = j["steps"];
    nego::at(c.steps, nego::Resource::kVcpu) = s.value("vcpu", 1);
    nego::at(c.steps, nego::Resource::kRam) = s.value("ram", 1);
    nego::at(c.steps, nego::Resource::kStorage) = s.value("storage", 10);
  }
  if (j.contains("threshold")) {
    c.threshold = j["threshold"].get<double>();
    explicit_threshold = true;
  }
  if (j.contains("max_rounds")) c.max_rounds = j["max_rounds"].get<int>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("priorities")) {
    const auto& p = j["priorities"];
    nego::PerResource<double> pr{p.value("vcpu", 1.0), p.value("ram", 1.0),
                                 p.value("storage", 1.0)};
    const bool all_one = nego::at(pr, nego::Resource::kVcpu) == 1.0 &&
                         nego::at(pr, nego::Resource::kRam) == 1.0 &&
                         nego::at(pr, nego::Resource::kStorage) == 1.0;
    // All-ones in cases 1/2 means "no priorities given"; anything else
    // outside case 3 is rejected later by validate().
    if (c.negotiation_case == nego::Case::kCase3 || !all_one) {
      c.priorities = pr;
    }
  }
}

nlohmann::json train_to_json(const nego::TrainConfig& c) {
  return nlohmann::json{
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"optimizer",
       c.optimizer == nego::Optimizer::kMomentum ? "momentum" : "sgd"},
      {"momentum", c.momentum},
      {"seed", c.seed},
  };
}

void train_from_json(const nlohmann::json& j, nego::TrainConfig& c) {
  if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
  if (j.contains("learning_rate")) {
    c.learning_rate = j["learning_rate"].get<double>();
  }
  if (j.contains("optimizer")) {
    std::string o = j["optimizer"].get<std::string>();
    if (o == "momentum") {
      c.optimizer = nego::Optimizer::kMomentum;
    } else if (o == "sgd") {
      c.optimizer = nego::Optimizer::kGradientDescent;
    } else {
      throw nego::SchemaError("config: unknown optimizer '" + o + "'");
    }
  }
  if (j.contains("momentum")) c.momentum = j["momentum"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
}

nlohmann::json app_config_to_json(const AppConfig& cfg) {
  return nlohmann::json{
      {"tariff", cfg.tariff.to_json()},
      {"fuzzy", cfg.fuzzy.to_json()},
      {"negotiation", negotiation_to_json(cfg.negotiation)},
      {"train", train_to_json(cfg.train)},
  };
}

void app_config_from_json(const nlohmann::json& j, AppConfig& cfg,
                          bool& explicit_threshold) {
  if (j.contains("tariff")) cfg.tariff = nego::Tariff::from_json(j["tariff"]);
  if (j.contains("fuzzy")) {
    cfg.fuzzy = nego::FuzzySystem::from_json(j["fuzzy"]);
  }
  if (j.contains("negotiation")) {
    negotiation_from_json(j["negotiation"], cfg.negotiation,
                          explicit_threshold);
  }
  if (j.contains("train")) train_from_json(j["train"], cfg.train);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void write_manifest(const std::string& dir, const std::string& command,
                    const AppConfig& cfg, std::uint64_t seed) {
  nlohmann::json config = app_config_to_json(cfg);
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fnv1a(config.dump())));
  nlohmann::json manifest{
      {"command", command},
      {"config", config},
      {"config_hash", hash},
      {"seed", seed},
      {"version", kVersion},
  };
  nego::write_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

void ensure_dir(const std::string& dir) {
  std::filesystem::create_directories(dir);
}

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> negotiation_case;
  std::string mf_kind;
  std::string rules_path;
  std::string mode;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file");
  cmd->add_option("--seed", f.seed, "seed override");
  cmd->add_option("--case", f.negotiation_case, "negotiation case (1|2|3)")
      ->check(CLI::Range(1, 3));
  cmd->add_option("--mf", f.mf_kind, "membership kind")
      ->check(CLI::IsMember({"triangular", "gaussian"}));
  cmd->add_option("--rules", f.rules_path, "fuzzy system JSON file");
  cmd->add_option("--mode", f.mode, "pricing mode")
      ->check(CLI::IsMember({"flat", "progressive"}));
}

AppConfig resolve_config(const CommonFlags& f) {
  AppConfig cfg;
  bool explicit_threshold = false;
  if (!f.config_path.empty()) {
    app_config_from_json(nlohmann::json::parse(nego::read_file(f.config_path)),
                         cfg, explicit_threshold);
  }
  if (!f.rules_path.empty()) {
    cfg.fuzzy =
        nego::FuzzySystem::from_json(
            nlohmann::json::parse(nego::read_file(f.rules_path)));
  }
  if (f.negotiation_case) {
    cfg.negotiation.negotiation_case =
        static_cast<nego::Case>(*f.negotiation_case);
    if (cfg.negotiation.negotiation_case != nego::Case::kCase3 &&
        cfg.negotiation.priorities) {
      const auto& pr = *cfg.negotiation.priorities;
      if (nego::at(pr, nego::Resource::kVcpu) == 1.0 &&
          nego::at(pr, nego::Resource::kRam) == 1.0 &&
          nego::at(pr, nego::Resource::kStorage) == 1.0) {
        cfg.negotiation.priorities.reset();
      }
    }
  }
  if (f.mf_kind == "gaussian" && cfg.fuzzy.kind != nego::MfKind::kGaussian) {
    cfg.fuzzy = cfg.fuzzy.as_gaussian();
  }
  if (!f.mode.empty()) {
    cfg.tariff = cfg.tariff.with_mode(f.mode == "flat"
                                          ? nego::PricingMode::kFlat
                                          : nego::PricingMode::kProgressive);
  }
  if (f.seed) {
    cfg.negotiation.seed = *f.seed;
    cfg.train.seed = *f.seed;
  }
  // An explicitly configured acceptance threshold wins over the one carried
  // by the fuzzy system file.
  if (!explicit_threshold) cfg.negotiation.threshold = cfg.fuzzy.threshold;
  return cfg;
}

int run_negotiate(const CommonFlags& flags, int vcpu, int ram, int storage,
                  const std::string& out_dir) {
  AppConfig cfg = resolve_config(flags);
  const nego::Bundle original = nego::make_bundle(vcpu, ram, storage);
  nego::Outcome out =
      nego::negotiate(original, cfg.tariff, cfg.fuzzy, cfg.negotiation);

  std::printf("original:   %d vcpu, %d GB ram, %d GB storage\n", vcpu, ram,
              storage);
  std::printf("final:      %d vcpu, %d GB ram, %d GB storage\n",
              out.final[nego::Resource::kVcpu],
              out.final[nego::Resource::kRam],
              out.final[nego::Resource::kStorage]);
  if (!out.trace.empty()) {
    std::printf("score:      %.3f\n", out.trace.back().score);
  }
  std::printf("rounds:     %d\n", out.rounds);
  std::printf("accepted:   %s\n", out.accepted ? "yes" : "no");
  std::printf("fee ratio:  %.4f\n", out.fee_ratio);

  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    nego::write_file(out_dir + "/trace.csv", nego::trace_to_csv(out));
    write_manifest(out_dir, "negotiate", cfg, cfg.negotiation.seed);
  }
  return out.success() ? 0 : 2;
}

int run_gen_dataset(const CommonFlags& flags, std::size_t n,
                    const std::string& out_path,
                    const std::string& exclude_path) {
  AppConfig cfg = resolve_config(flags);
  std::vector<nego::Bundle> exclude;
  if (!exclude_path.empty()) {
    exclude = nego::import_dataset(exclude_path, cfg.tariff).records;
  }
  nego::Dataset ds = nego::generate_dataset(n, cfg.negotiation.seed,
                                            cfg.tariff, exclude);
  nego::export_dataset(ds, out_path);
  std::printf("wrote %zu records to %s\n", ds.records.size(),
              out_path.c_str());
  return 0;
}

int run_batch(const CommonFlags& flags, const std::string& dataset_path,
              const std::string& out_dir, unsigned workers,
              const std::string& pairs_path) {
  AppConfig cfg = resolve_config(flags);
  nego::Dataset ds = nego::import_dataset(dataset_path, cfg.tariff);
  nego::BatchReport report =
      nego::run_batch(ds, cfg.tariff, cfg.fuzzy, cfg.negotiation, workers);
  ensure_dir(out_dir);
  nego::export_report(report, out_dir + "/report.csv",
                      out_dir + "/aggregate.json");
  if (!pairs_path.empty()) {
    std::vector<nego::TrainingPair> pairs;
    pairs.reserve(report.records.size());
    for (const auto& rr : report.records) {
      pairs.push_back(nego::make_training_pair(rr.original, rr.final));
    }
    nego::write_file(pairs_path, nego::pairs_to_csv(pairs));
  }
  write_manifest(out_dir, "batch", cfg, cfg.negotiation.seed);
  std::printf(
      "records: %zu  success: %.1f%%  avg fee ratio: %.3f\n"
      "negotiable: %zu  success: %.1f%%  avg fee ratio: %.3f\n",
      report.records.size(), 100.0 * report.success_rate,
      report.avg_fee_ratio, report.negotiable_count,
      100.0 * report.success_rate_negotiable,
      report.avg_fee_ratio_negotiable);
  return 0;
}

int run_calibrate(const CommonFlags& flags, std::size_t budget,
                  const std::string& anchors_path,
                  const std::string& out_path) {
  AppConfig cfg = resolve_config(flags);
  std::vector<nego::Anchor> anchors;
  if (!anchors_path.empty()) {
    auto j = nlohmann::json::parse(nego::read_file(anchors_path));
    for (const auto& a : j) {
      const auto& in = a.at("inputs");
      anchors.push_back({{in[0].get<double>(), in[1].get<double>(),
                          in[2].get<double>(), in[3].get<double>()},
                         a.at("target").get<double>()});
    }
  } else {
    anchors = {{{1.0, 1.0, 1.0, 1.0}, 50.0},
               {{1.0, 1.0, 1.0, 0.0238}, 14.79},
               {{0.389, 0.389, 0.389, 1.0}, 61.63}};
  }
  nego::CalibrationResult res = nego::calibrate_membership(
      anchors, budget, cfg.negotiation.seed, cfg.fuzzy);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    std::printf("anchor %zu: target %.2f  score %.3f  residual %.3f\n", i + 1,
                anchors[i].target,
                nego::tendency_score(res.system, anchors[i].inputs),
                res.residuals[i]);
  }
  std::printf("sse: %.4f%s\n", res.sse,
              res.budget_exhausted ? "  (budget exhausted)" : "");
  if (!out_path.empty()) {
    nego::write_file(out_path, res.system.to_json().dump(2) + "\n");
    std::printf("wrote %s\n", out_path.c_str());
  }
  return 0;
}

int run_train(const CommonFlags& flags, const std::string& model_name,
              const std::string& data_path, std::optional<int> epochs,
              const std::string& out_dir) {
  AppConfig cfg = resolve_config(flags);
  if (epochs) cfg.train.epochs = *epochs;
  std::vector<nego::TrainingPair> pairs =
      nego::pairs_from_csv_text(nego::read_file(data_path));
  nego::SurrogateModel model =
      nego::build(nego::preset_spec(model_name), cfg.train.seed);
  nego::train(model, pairs, cfg.train);
  ensure_dir(out_dir);
  nego::save_model(model, out_dir + "/model.json");
  std::string history = "epoch,mse\n";
  char line[64];
  for (std::size_t e = 0; e < model.loss_history.size(); ++e) {
    std::snprintf(line, sizeof(line), "%zu,%.9f\n", e + 1,
                  model.loss_history[e]);
    history += line;
  }
  nego::write_file(out_dir + "/loss_history.csv", history);
  write_manifest(out_dir, "train " + model_name, cfg, cfg.train.seed);
  std::printf("trained %s on %zu pairs for %d epochs, final mse %.6f\n",
              model_name.c_str(), pairs.size(), cfg.train.epochs,
              model.loss_history.back());
  return 0;
}

int run_eval(const std::string& model_path, const std::string& data_path) {
  nego::SurrogateModel model = nego::load_model(model_path);
  std::vector<nego::TrainingPair> pairs =
      nego::pairs_from_csv_text(nego::read_file(data_path));
  nego::EvalResult res = nego::evaluate(model, pairs);
  std::printf("%-14s%s\n", "dimension", "mse");
  std::printf("%-14s%.6f\n", "vcpu", res.per_dim[0]);
  std::printf("%-14s%.6f\n", "ram", res.per_dim[1]);
  std::printf("%-14s%.6f\n", "storage", res.per_dim[2]);
  std::printf("%-14s%.6f\n", "entire offer", res.whole);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fuzzy-logic resource negotiation simulator"};
  app.require_subcommand(1);

  CommonFlags flags;
  bool dump_config = false;
  app.add_flag("--dump-config", dump_config,
               "print the effective config and exit");

  // negotiate
  auto* cmd_neg = app.add_subcommand("negotiate", "run one negotiation");
  int vcpu = 0, ram = 0, storage = 0;
  std::string out_dir;
  cmd_neg->add_option("vcpu", vcpu, "requested VCPUs")->required();
  cmd_neg->add_option("ram", ram, "requested RAM (GB)")->required();
  cmd_neg->add_option("storage", storage, "requested storage (GB)")
      ->required();
  cmd_neg->add_option("--out", out_dir, "directory for trace + manifest");
  add_common_flags(cmd_neg, flags);

  // gen-dataset
  auto* cmd_gen = app.add_subcommand("gen-dataset", "sample a dataset");
  std::size_t gen_n = 200;
  std::string gen_out = "dataset.csv";
  std::string gen_exclude;
  cmd_gen->add_option("--n", gen_n, "number of records");
  cmd_gen->add_option("--out", gen_out, "output CSV");
  cmd_gen->add_option("--exclude", gen_exclude,
                      "dataset CSV whose records must not reappear");
  add_common_flags(cmd_gen, flags);

  // batch
  auto* cmd_batch = app.add_subcommand("batch", "negotiate a whole dataset");
  std::string batch_dataset;
  std::string batch_out = "batch_out";
  std::string batch_pairs;
  unsigned workers = 1;
  cmd_batch->add_option("--dataset", batch_dataset, "dataset CSV")->required();
  cmd_batch->add_option("--out", batch_out, "output directory");
  cmd_batch->add_option("--workers", workers, "worker thread count");
  cmd_batch->add_option("--pairs", batch_pairs,
                        "also write training pairs CSV");
  add_common_flags(cmd_batch, flags);

  // calibrate
  auto* cmd_cal = app.add_subcommand("calibrate",
                                     "search membership breakpoints");
  std::size_t budget = 20000;
  std::string anchors_path;
  std::string cal_out;
  cmd_cal->add_option("--budget", budget, "candidate evaluations");
  cmd_cal->add_option("--anchors", anchors_path, "anchor JSON file");
  cmd_cal->add_option("--out", cal_out, "write calibrated fuzzy JSON here");
  add_common_flags(cmd_cal, flags);

  // train
  auto* cmd_train = app.add_subcommand("train", "train a surrogate model");
  std::string model_name = "model4";
  std::string train_data;
  std::string train_out = "train_out";
  std::optional<int> epochs;
  cmd_train->add_option("--model", model_name,
                        "preset (model1|model2|model3|model4)");
  cmd_train->add_option("--data", train_data, "pairs CSV")->required();
  cmd_train->add_option("--epochs", epochs, "training epochs");
  cmd_train->add_option("--out", train_out, "output directory");
  add_common_flags(cmd_train, flags);

  // eval
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a surrogate model");
  std::string eval_model;
  std::string eval_data;
  cmd_eval->add_option("--model", eval_model, "model JSON")->required();
  cmd_eval->add_option("--data", eval_data, "pairs CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (dump_config) {
      AppConfig cfg = resolve_config(flags);
      std::printf("%s\n", app_config_to_json(cfg).dump(2).c_str());
      return 0;
    }
    if (cmd_neg->parsed()) {
      return run_negotiate(flags, vcpu, ram, storage, out_dir);
    }
    if (cmd_gen->parsed()) {
      return run_gen_dataset(flags, gen_n, gen_out, gen_exclude);
    }
    if (cmd_batch->parsed()) {
      return run_batch(flags, batch_dataset, batch_out, workers, batch_pairs);
    }
    if (cmd_cal->parsed()) {
      return run_calibrate(flags, budget, anchors_path, cal_out);
    }
    if (cmd_train->parsed()) {
      return run_train(flags, model_name, train_data, epochs, train_out);
    }
    if (cmd_eval->parsed()) {
      return run_eval(eval_model, eval_data);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
