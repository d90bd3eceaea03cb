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
#ifndef RANKMATCH_TRAINER_HPP_
#define RANKMATCH_TRAINER_HPP_

#include <string>
#include <vector>

#include "rankmatch/config.hpp"
#include "rankmatch/metrics.hpp"

namespace rankmatch {

struct TrainReport {
  Index steps_run = 0;
  Index epochs_run = 0;
  Index steps_per_epoch = 0;

  bool nan_abort = false;
  Index nan_step = 0;  // 1-based step at which the run aborted
  std::string nan_reason;

  Real best_validation_accuracy = 0;  // EMA model
  Index best_validation_step = 0;
  Real final_train_accuracy = 0;       // EMA model
  Real final_validation_accuracy = 0;  // EMA model
  Real final_test_accuracy = 0;        // EMA model
  Real final_validation_accuracy_raw = 0;
  Real final_test_accuracy_raw = 0;
  Real max_pair_distance = 0;  // max over all steps

  std::vector<MetricsRow> rows;
};

/// Full training loop: augment -> forward -> total loss -> backward -> SGD
/// step -> EMA update, with EMA-model evaluation on the configured cadence.
/// Writes metrics.csv, report.txt, best_ema.ckpt, final_ema.ckpt, and
/// final_raw.ckpt under cfg.output_dir. A non-finite loss term or gradient
/// aborts the run, recording the 1-based step; everything produced up to the
/// abort is still written.
TrainReport run_training(const ExperimentConfig& cfg);

/// key = value serialization of the report (mirrors report.txt).
std::string format_report(const TrainReport& report);

}  // namespace rankmatch

#endif  // RANKMATCH_TRAINER_HPP_
