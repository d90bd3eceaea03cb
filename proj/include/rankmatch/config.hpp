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
#ifndef RANKMATCH_CONFIG_HPP_
#define RANKMATCH_CONFIG_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rankmatch/augment.hpp"
#include "rankmatch/data.hpp"
#include "rankmatch/model.hpp"
#include "rankmatch/objective.hpp"
#include "rankmatch/optim.hpp"

namespace rankmatch {

enum class DatasetKind { kSynthetic, kCifar10, kSplitFile };
enum class AugmentKind { kAuto, kVector, kImage, kNone };

/// Flat `key = value` experiment file; `#` starts a comment, unknown keys are
/// rejected. Field-by-field reference lives in the README.
struct ExperimentConfig {
  // run
  std::uint64_t seed = 1;
  std::string output_dir = "runs/out";
  Index epochs = 10;
  Index batch_size = 64;
  Index mu = 7;
  Index num_labels = 40;
  Index eval_every_steps = 0;  // 0 = once per epoch
  bool log_wall_time = false;

  // objective
  RankingVariant variant = RankingVariant::kBatchMean;
  Real tau = 0.95;
  Real margin = 0.5;
  Real temperature = 0.2;
  Real lambda_u = 1.0;
  Real lambda_r = 1.0;
  bool normalize_logits = true;
  bool mask_ranking = false;
  bool soft_margin = true;
  loss::PositiveNormalization positive_normalization =
      loss::PositiveNormalization::kBatchSize;

  // optimizer
  Real lr = 0.03;
  Real momentum = 0.9;
  Real weight_decay = 0.0005;
  Real ema_decay = 0.999;

  // dataset
  DatasetKind dataset = DatasetKind::kSynthetic;
  int synthetic_classes = 4;
  Index synthetic_dim = 16;
  Index synthetic_train = 4000;
  Index synthetic_validation = 400;
  Index synthetic_test = 2000;
  Real synthetic_stdev = 0.5;
  Real synthetic_mean_scale = 2.0;
  std::uint64_t synthetic_seed = 0;  // 0 = reuse `seed`
  std::string split_path;
  std::vector<std::string> cifar10_train;
  std::string cifar10_test;

  // model
  ModelKind model = ModelKind::kMlp;
  std::vector<Index> mlp_hidden = {64, 64};
  std::vector<Index> conv_channels = {8, 16, 32};

  // augmentation
  AugmentKind augment = AugmentKind::kAuto;
  Real aug_sigma_weak = 0.05;
  Real aug_sigma_strong = 0.2;
  Real aug_drop_fraction = 0.25;

  // bench
  std::vector<Index> bench_batch_sizes = {8, 12, 16, 24, 32, 40, 48, 64};
  int bench_class_count = 10;
  Index bench_dim = 16;
  Real bench_confident_fraction = 1.0;
  int bench_repetitions = 7;
  std::vector<RankingVariant> bench_variants = {
      RankingVariant::kBatchAll, RankingVariant::kBatchHard,
      RankingVariant::kBatchMean, RankingVariant::kContrastive};

  void validate() const;

  ObjectiveConfig objective_config() const;
  OptimConfig optim_config() const;
  SyntheticSpec synthetic_spec() const;

  /// Loads / generates the configured dataset and draws the labeled subset.
  DatasetSplit load_dataset() const;

  /// Model spec sized to the dataset's geometry and class count.
  ModelSpec model_spec(const Dataset& train) const;

  /// Augmenter matching augment= (kAuto picks image for image datasets,
  /// vector otherwise).
  std::unique_ptr<Augmenter> make_augmenter(const Dataset& train) const;
};

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& source_name);
ExperimentConfig load_config(const std::string& path);

/// RANKMATCH_OUTPUT_DIR, when set and nonempty, replaces output_dir.
void apply_env_overrides(ExperimentConfig& cfg);

}  // namespace rankmatch

#endif  // RANKMATCH_CONFIG_HPP_
