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
#ifndef RANKMATCH_BENCH_HPP_
#define RANKMATCH_BENCH_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rankmatch/loss/types.hpp"
#include "rankmatch/model.hpp"
#include "rankmatch/objective.hpp"

namespace rankmatch {

/// Synthetic timing batch: balanced labels (row i gets class i mod k) and
/// standard-normal features. The first round(confident_fraction * n) rows
/// count as confidence-masked for the CE term.
struct BenchBatch {
  MatrixXr features;
  std::vector<int> labels;
  Real confident_fraction = 1.0;
};

BenchBatch make_bench_batch(Index batch_size, int class_count, Index dim,
                            Real confident_fraction, std::uint64_t seed);

struct BenchRecord {
  RankingVariant variant = RankingVariant::kBatchMean;
  Index batch_size = 0;
  int class_count = 0;
  Real confident_fraction = 0;
  loss::TripletCensus census;
  long long wall_time_ns = 0;  // median over repetitions, harness overhead removed
  int repetitions = 0;
};

/// Times one training-step pipeline — model forward, CE, the ranking variant,
/// and the full backward pass — on `batch`. Repetitions >= 5; the first
/// (warmup) run is discarded, the median of the rest is reported after
/// subtracting an empty-closure harness baseline (clamped at zero). The
/// census is deterministic; only the timing is statistical.
BenchRecord time_loss_variant(RankingVariant variant, const Model& model,
                              const ModelParams& params, const BenchBatch& batch,
                              const ObjectiveConfig& cfg, int repetitions);

/// Census per batch size for labels produced by `labels_for`.
std::vector<loss::TripletCensus> census_scaling(
    const std::function<std::vector<int>(Index)>& labels_for,
    const std::vector<Index>& sizes);

/// Balanced k-class label pattern (i mod k) for census_scaling.
std::vector<int> balanced_labels(Index n, int k);

/// Fraction of `unlabeled` rows whose weak-branch softmax max reaches tau, at
/// each entry of `param_history` (a time series of model parameters).
std::vector<Real> confidence_sweep(const Model& model,
                                   const std::vector<ModelParams>& param_history,
                                   const MatrixXr& unlabeled, Real tau);

/// CSV: variant,batch_size,class_count,confident_fraction,triplets,
/// pairwise_terms,wall_time_ns_median,repetitions. The triplets column is the
/// count the variant actually materializes (BA/BH/BM triplets, CT pairs).
void write_bench_csv(const std::vector<BenchRecord>& records,
                     const std::string& path);

}  // namespace rankmatch

#endif  // RANKMATCH_BENCH_HPP_
