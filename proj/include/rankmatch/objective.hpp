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
#ifndef RANKMATCH_OBJECTIVE_HPP_
#define RANKMATCH_OBJECTIVE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "rankmatch/augment.hpp"
#include "rankmatch/loss/types.hpp"
#include "rankmatch/model.hpp"

namespace rankmatch {

enum class RankingVariant { kNone, kBatchMean, kBatchHard, kBatchAll, kContrastive };

std::string variant_name(RankingVariant v);
RankingVariant variant_from_name(const std::string& name);

struct LabeledBatch {
  MatrixXr samples;   // B x input-dims
  MatrixXr one_hot;   // B x num_classes
  std::vector<int> labels;

  static LabeledBatch make(MatrixXr samples, std::vector<int> labels,
                           int num_classes);
  void validate() const;  // one 1 per row, rest 0
};

struct UnlabeledBatch {
  MatrixXr samples;  // mu*B x input-dims
};

struct PseudoLabelOutcome {
  MatrixXr probabilities;    // mu*B x K, rows sum to 1
  std::vector<int> hard_labels;
  std::vector<bool> confidence_mask;  // max prob >= tau (inclusive)
  Index confident_count = 0;
  Real confident_fraction = 0;
};

/// Row-stable softmax (max subtraction) and clamped cross-entropy, the
/// value-level counterparts of the differentiable graph ops.
VectorXr softmax_row(const VectorXr& logits);
MatrixXr softmax_rows_matrix(const MatrixXr& logits);
Real cross_entropy_row(const VectorXr& one_hot_target, const VectorXr& probs);

MatrixXr one_hot_matrix(const std::vector<int>& labels, int num_classes);

/// Hard labels = per-row argmax (lowest index on ties); mask true iff the max
/// probability is >= tau. Targets derived from this are constants to the
/// graph: no gradient flows through pseudo-labels.
PseudoLabelOutcome pseudo_label(const MatrixXr& weak_logits, Real tau);

struct ObjectiveConfig {
  RankingVariant variant = RankingVariant::kBatchMean;
  Real lambda_u = 1.0;
  Real lambda_r = 1.0;
  Real tau = 0.95;
  Index mu = 7;
  bool normalize_logits = true;
  /// Algorithm default: the unlabeled ranking loss sees all mu*B rows. When
  /// set, it is restricted to confidence-masked rows instead (ablation).
  bool mask_ranking = false;
  loss::RankingLossConfig ranking;

  void validate() const;
};

struct LossBreakdown {
  Real supervised_ce = 0;
  Real unsupervised_ce = 0;
  Real supervised_rank = 0;
  Real unsupervised_rank = 0;
  Real total = 0;
  Real confident_fraction = 0;
  Index confident_count = 0;
  /// Largest pairwise distance seen by the triplet losses this step (0 for
  /// contrastive / none).
  Real max_pair_distance = 0;
  loss::TripletCensus census;  // summed over labeled + unlabeled branches
};

/// Branch tags for deriving per-step augmentation streams; shared by
/// total_loss and the standalone loss ops so they compose bit-exactly.
inline constexpr std::uint64_t kLabeledWeakStream = 1;
inline constexpr std::uint64_t kUnlabeledWeakStream = 2;
inline constexpr std::uint64_t kUnlabeledStrongStream = 3;

/// Mean over B of H(l_b, softmax(model(weak(x_b)))).
Real supervised_ce_loss(const LabeledBatch& batch, const Model& model,
                        const ModelParams& params, const Augmenter& augmenter,
                        std::uint64_t step_seed);

/// (1/(mu*B)) * sum_b mask_b * H(pseudo_b, softmax(model(strong(u_b)))); the
/// normalizer stays mu*B regardless of how many rows pass the threshold.
struct UnsupervisedCeResult {
  Real loss = 0;
  PseudoLabelOutcome pseudo;
};
UnsupervisedCeResult unsupervised_ce_loss(const UnlabeledBatch& batch,
                                          const Model& model,
                                          const ModelParams& params,
                                          const Augmenter& augmenter, Real tau,
                                          std::uint64_t step_seed);

struct StepResult {
  LossBreakdown breakdown;
  PseudoLabelOutcome pseudo;  // empty when the unlabeled branch is skipped
  std::vector<ad::Tensor> param_grads;  // ModelParams order; empty if !want_grads
};

/// One full objective evaluation: weak labeled branch (CE + ranking on true
/// labels), weak unlabeled branch (detached pseudo-labels), strong unlabeled
/// branch (masked CE + ranking on pseudo-labels), combined as
///   total = s_ce + lambda_u * u_ce + lambda_r * (s_rank + u_rank)
/// in exactly that association. The unlabeled branches are skipped when
/// nothing references them (lambda_u == 0 and ranking disabled).
StepResult total_loss(const LabeledBatch& labeled, const UnlabeledBatch& unlabeled,
                      const Model& model, const ModelParams& params,
                      const Augmenter& augmenter, const ObjectiveConfig& cfg,
                      std::uint64_t step_seed, bool want_grads);

}  // namespace rankmatch

#endif  // RANKMATCH_OBJECTIVE_HPP_
