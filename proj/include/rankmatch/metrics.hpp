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
#ifndef RANKMATCH_METRICS_HPP_
#define RANKMATCH_METRICS_HPP_

#include <string>
#include <vector>

#include "rankmatch/core/types.hpp"
#include "rankmatch/data.hpp"
#include "rankmatch/model.hpp"

namespace rankmatch {

/// One training-step record. Accuracies are the latest EMA-model evaluation
/// (refreshed on the eval cadence, carried forward between evals).
struct MetricsRow {
  Index step = 0;   // 1-based global step
  Index epoch = 0;  // 0-based
  Real lr = 0;
  Real supervised_ce = 0;
  Real unsupervised_ce = 0;
  Real supervised_rank = 0;
  Real unsupervised_rank = 0;
  Real total = 0;
  Real confident_fraction = 0;
  Real train_accuracy = 0;
  Real validation_accuracy = 0;
  Real test_accuracy = 0;
  long long wall_time_ns = 0;
};

/// Two-line versioned header; `metrics_header()` returns it byte-for-byte.
std::string metrics_header();

/// 17-significant-digit decimal; round-trips doubles exactly.
std::string format_real(Real v);

std::string format_metrics_row(const MetricsRow& row);

/// Writes rows as CSV. Rows must be nonempty. If the file already exists with
/// a valid header, rows whose step is already present are skipped and the
/// rest are appended (resume-safe, no duplicates); otherwise the file is
/// created fresh.
void emit_metrics(const std::vector<MetricsRow>& rows, const std::string& path);

/// Parses a metrics CSV written by emit_metrics (used by tests and tooling).
std::vector<MetricsRow> read_metrics(const std::string& path);

struct Evaluation {
  Real accuracy = 0;
  Real error_rate = 1;
  std::vector<std::vector<long long>> confusion;  // [true][predicted]
  Index sample_count = 0;
};

/// Argmax classification of `split` under `params`; confusion rows are true
/// classes, so each row sums to that class's sample count.
Evaluation evaluate(const Model& model, const ModelParams& params,
                    const Dataset& split);

void write_confusion_csv(const Evaluation& eval, const std::string& path);

/// CSV: sample_index,true_label,predicted_label,logit_0..K-1,repr_0..R-1.
void export_logits(const Model& model, const ModelParams& params,
                   const Dataset& split, const std::string& path);

}  // namespace rankmatch

#endif  // RANKMATCH_METRICS_HPP_
