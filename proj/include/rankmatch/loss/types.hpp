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
#ifndef RANKMATCH_LOSS_TYPES_HPP_
#define RANKMATCH_LOSS_TYPES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rankmatch/core/error.hpp"
#include "rankmatch/core/types.hpp"

namespace rankmatch::loss {

/// Exact combinatorial workload of a labeled batch. For an anchor row a,
/// P(a) are other rows with the same label and N(a) the rows with a
/// different label.
struct TripletCensus {
  std::int64_t batch_all_triplets = 0;   // sum over anchors of |P(a)|*|N(a)|
  std::int64_t batch_hard_triplets = 0;  // anchors with P and N both non-empty
  std::int64_t batch_mean_triplets = 0;  // anchors with N non-empty
  std::int64_t contrastive_pairs = 0;    // ordered same-label pairs (a != p)
  std::int64_t pairwise_terms = 0;       // distance/similarity entries, n^2

  bool operator==(const TripletCensus&) const = default;

  TripletCensus& operator+=(const TripletCensus& o) {
    batch_all_triplets += o.batch_all_triplets;
    batch_hard_triplets += o.batch_hard_triplets;
    batch_mean_triplets += o.batch_mean_triplets;
    contrastive_pairs += o.contrastive_pairs;
    pairwise_terms += o.pairwise_terms;
    return *this;
  }
};

/// Closed-form census from labels alone; O(n + #classes).
inline TripletCensus count_triplets(const std::vector<int>& labels) {
  TripletCensus census;
  const auto n = static_cast<std::int64_t>(labels.size());
  census.pairwise_terms = n * n;
  if (n == 0) return census;
  int max_label = 0;
  for (const int y : labels) {
    if (y < 0) throw ShapeError("count_triplets: negative label");
    max_label = std::max(max_label, y);
  }
  std::vector<std::int64_t> per_class(static_cast<std::size_t>(max_label) + 1, 0);
  for (const int y : labels) ++per_class[static_cast<std::size_t>(y)];
  for (const std::int64_t m : per_class) {
    if (m == 0) continue;
    const std::int64_t pos = m - 1;      // positives per anchor of this class
    const std::int64_t neg = n - m;      // negatives per anchor of this class
    census.batch_all_triplets += m * pos * neg;
    census.contrastive_pairs += m * pos;
    if (pos > 0 && neg > 0) census.batch_hard_triplets += m;
    if (neg > 0) census.batch_mean_triplets += m;
  }
  return census;
}

/// Inner normalization of the BatchMean sums: kBatchSize divides the
/// positive/negative distance sums by the anchor count |C| (the literal
/// published form); kPositiveCount divides by |P(a)| and |N(a)|.
enum class PositiveNormalization { kBatchSize, kPositiveCount };

/// Shared knobs of the ranking losses.
struct RankingLossConfig {
  double margin = 0.5;        // triplet margin m
  double temperature = 0.2;   // contrastive temperature T
  bool soft_margin = true;    // softplus(t) if true, max(0, t) otherwise
  PositiveNormalization positive_normalization =
      PositiveNormalization::kBatchSize;
  // Restrict the unlabeled ranking loss to confidently pseudo-labeled rows
  // (ablation; the default objective ranks every unlabeled row).
  bool apply_confidence_mask = false;

  void validate() const {
    if (!(margin >= 0.0)) {
      throw ConfigError("ranking loss: margin must be >= 0, got " +
                        std::to_string(margin));
    }
    if (!(temperature > 0.0)) {
      throw ConfigError("ranking loss: temperature must be > 0, got " +
                        std::to_string(temperature));
    }
  }
};

/// Row-normalizes x; raises NumericError naming the first zero-norm row.
template <typename Scalar>
MatrixX<Scalar> l2_normalize_rows_matrix(const MatrixX<Scalar>& x) {
  MatrixX<Scalar> y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const Scalar n = x.row(r).norm();
    if (n <= Scalar(1e-12)) {
      throw NumericError("l2_normalize_rows: zero-norm row " +
                         std::to_string(static_cast<long long>(r)));
    }
    y.row(r) = x.row(r) / n;
  }
  return y;
}

/// A batch of logits prepared for the ranking losses: one row per sample,
/// L2-normalized unless the no-normalization ablation is requested.
template <typename Scalar>
struct NormalizedLogitsBatchT {
  MatrixX<Scalar> logits;
  std::vector<int> labels;
  bool normalized = true;

  /// Builds from raw logits, normalizing rows unless normalize == false.
  static NormalizedLogitsBatchT from_logits(const MatrixX<Scalar>& raw,
                                            std::vector<int> labels,
                                            bool normalize = true) {
    NormalizedLogitsBatchT batch;
    batch.logits = normalize ? l2_normalize_rows_matrix(raw) : raw;
    batch.labels = std::move(labels);
    batch.normalized = normalize;
    batch.validate();
    return batch;
  }

  Index count() const { return logits.rows(); }

  void validate() const {
    if (static_cast<Index>(labels.size()) != logits.rows()) {
      throw ShapeError("logits batch: " + std::to_string(labels.size()) +
                       " labels for " + std::to_string(logits.rows()) +
                       " rows");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || labels[i] >= logits.cols()) {
        throw ShapeError("logits batch: label " + std::to_string(labels[i]) +
                         " at row " + std::to_string(i) +
                         " outside [0, " + std::to_string(logits.cols()) + ")");
      }
    }
    if (normalized) {
      for (Index r = 0; r < logits.rows(); ++r) {
        if (std::abs(logits.row(r).norm() - Scalar(1)) > Scalar(1e-6)) {
          throw NumericError("logits batch: row " +
                             std::to_string(static_cast<long long>(r)) +
                             " is not unit-norm");
        }
      }
    }
  }
};

using NormalizedLogitsBatch = NormalizedLogitsBatchT<Real>;

template <typename Scalar>
struct RankingLossValue {
  Scalar value = 0;
  TripletCensus census;
};

template <typename Scalar>
struct ContrastiveLossValue {
  Scalar value = 0;
  std::int64_t pair_count = 0;
};

}  // namespace rankmatch::loss

#endif  // RANKMATCH_LOSS_TYPES_HPP_
