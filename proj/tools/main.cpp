/**
 * Copyright 2026 The RankMatch Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rankmatch/bench.hpp"
#include "rankmatch/checkpoint.hpp"
#include "rankmatch/config.hpp"
#include "rankmatch/core/rng.hpp"
#include "rankmatch/metrics.hpp"
#include "rankmatch/trainer.hpp"

namespace {

using namespace rankmatch;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNanAbort = 3;

ExperimentConfig load_run_config(const std::string& path) {
  ExperimentConfig cfg = load_config(path);
  apply_env_overrides(cfg);
  return cfg;
}

/// The split evaluation and export verbs operate on: test when present,
/// otherwise validation.
const Dataset& eval_split(const DatasetSplit& split) {
  if (split.test.count() > 0) return split.test;
  if (split.validation.count() > 0) return split.validation;
  throw ConfigError("no test or validation split to evaluate");
}

ModelParams load_params_for(const Model& model, std::uint64_t seed,
                            const std::string& checkpoint_path) {
  ModelParams loaded = load_checkpoint(checkpoint_path);
  const ModelParams expected = init_params(model.spec(), seed);
  if (loaded.names != expected.names) {
    throw ConfigError("checkpoint '" + checkpoint_path +
                      "' does not match the configured model (parameter names "
                      "differ)");
  }
  for (std::size_t i = 0; i < loaded.values.size(); ++i) {
    if (!loaded.values[i].shape_equals(expected.values[i])) {
      throw ConfigError("checkpoint '" + checkpoint_path +
                        "': parameter '" + loaded.names[i] +
                        "' has the wrong shape for the configured model");
    }
  }
  return loaded;
}

int cmd_train(const std::string& config_path) {
  const ExperimentConfig cfg = load_run_config(config_path);
  const TrainReport report = run_training(cfg);
  std::cout << format_report(report);
  std::cout << "outputs = " << cfg.output_dir << '\n';
  if (report.nan_abort) {
    std::cerr << "training aborted: " << report.nan_reason << " at step "
              << report.nan_step << '\n';
    return kExitNanAbort;
  }
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& config_path) {
  const ExperimentConfig cfg = load_run_config(config_path);
  DatasetSplit split = cfg.load_dataset();
  const Dataset& target = eval_split(split);
  Model model(cfg.model_spec(split.train));
  const ModelParams params = load_params_for(model, cfg.seed, checkpoint_path);
  const Evaluation eval = evaluate(model, params, target);
  std::cout << "samples = " << eval.sample_count << '\n';
  std::cout << "accuracy = " << format_real(eval.accuracy) << '\n';
  std::cout << "error_rate = " << format_real(eval.error_rate) << '\n';
  std::filesystem::create_directories(cfg.output_dir);
  const std::string confusion_path = cfg.output_dir + "/eval_confusion.csv";
  write_confusion_csv(eval, confusion_path);
  std::cout << "confusion = " << confusion_path << '\n';
  return kExitOk;
}

int cmd_bench(const std::string& config_path) {
  const ExperimentConfig cfg = load_run_config(config_path);
  ModelSpec spec;
  spec.kind = ModelKind::kMlp;
  spec.num_classes = cfg.bench_class_count;
  spec.input_dim = cfg.bench_dim;
  spec.hidden_sizes = cfg.mlp_hidden;
  Model model(spec);
  const ModelParams params = init_params(spec, cfg.seed);
  const ObjectiveConfig objective = cfg.objective_config();

  std::vector<BenchRecord> records;
  for (const RankingVariant variant : cfg.bench_variants) {
    for (const Index n : cfg.bench_batch_sizes) {
      const BenchBatch batch =
          make_bench_batch(n, cfg.bench_class_count, cfg.bench_dim,
                           cfg.bench_confident_fraction,
                           mix_seed(cfg.seed, static_cast<std::uint64_t>(n)));
      records.push_back(time_loss_variant(variant, model, params, batch, objective,
                                          cfg.bench_repetitions));
    }
  }
  std::filesystem::create_directories(cfg.output_dir);
  const std::string csv_path = cfg.output_dir + "/bench.csv";
  write_bench_csv(records, csv_path);
  std::cout << "records = " << records.size() << '\n';
  std::cout << "bench_csv = " << csv_path << '\n';
  return kExitOk;
}

int cmd_export_logits(const std::string& checkpoint_path,
                      const std::string& config_path) {
  const ExperimentConfig cfg = load_run_config(config_path);
  DatasetSplit split = cfg.load_dataset();
  const Dataset& target = eval_split(split);
  Model model(cfg.model_spec(split.train));
  const ModelParams params = load_params_for(model, cfg.seed, checkpoint_path);
  std::filesystem::create_directories(cfg.output_dir);
  const std::string path = cfg.output_dir + "/logits.csv";
  export_logits(model, params, target, path);
  std::cout << "rows = " << target.count() << '\n';
  std::cout << "logits_csv = " << path << '\n';
  return kExitOk;
}

int cmd_census(const std::string& config_path) {
  const ExperimentConfig cfg = load_run_config(config_path);
  const int k = cfg.bench_class_count;
  std::cout << "batch_size,batch_all,batch_hard,batch_mean,contrastive_pairs,"
               "pairwise_terms\n";
  const std::vector<loss::TripletCensus> table = census_scaling(
      [k](Index n) { return balanced_labels(n, k); }, cfg.bench_batch_sizes);
  for (std::size_t i = 0; i < table.size(); ++i) {
    const loss::TripletCensus& c = table[i];
    std::cout << cfg.bench_batch_sizes[i] << ',' << c.batch_all_triplets << ','
              << c.batch_hard_triplets << ',' << c.batch_mean_triplets << ','
              << c.contrastive_pairs << ',' << c.pairwise_terms << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rankmatch: semi-supervised training with ranking losses"};
  app.require_subcommand(1);

  std::string config_path;
  std::string checkpoint_path;

  CLI::App* train = app.add_subcommand("train", "run a training experiment");
  train->add_option("config", config_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("checkpoint", checkpoint_path, "model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("config", config_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* bench = app.add_subcommand("bench", "time the loss variants");
  bench->add_option("config", config_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* export_logits_cmd =
      app.add_subcommand("export-logits", "dump logits and representations");
  export_logits_cmd->add_option("checkpoint", checkpoint_path, "model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  export_logits_cmd->add_option("config", config_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* census = app.add_subcommand("census", "triplet census scaling table");
  census->add_option("config", config_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(config_path);
    if (eval->parsed()) return cmd_eval(checkpoint_path, config_path);
    if (bench->parsed()) return cmd_bench(config_path);
    if (export_logits_cmd->parsed()) {
      return cmd_export_logits(checkpoint_path, config_path);
    }
    if (census->parsed()) return cmd_census(config_path);
    std::cerr << "no subcommand given\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}
