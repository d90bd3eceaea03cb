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
#ifndef RANKMATCH_LOSS_TRIPLET_HPP_
#define RANKMATCH_LOSS_TRIPLET_HPP_

#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rankmatch/ad/graph.hpp"
#include "rankmatch/loss/pairwise.hpp"
#include "rankmatch/loss/types.hpp"

namespace rankmatch::loss {

// Triplet losses over a precomputed distance matrix. Conventions shared by
// all three variants:
//  - anchors index rows; P(a) = same-label rows != a, N(a) = other-label rows;
//  - f is softplus by default, hinge max(0, .) when soft_margin is off;
//  - empty censuses give a zero loss instead of dividing by zero;
//  - argmax/argmin ties resolve to the lowest row index, and gradients flow
//    only through the entries the forward pass actually used.

/// BatchAll: mean of f(m + d_ap - d_an) over every valid (a, p, n).
template <typename Scalar>
Scalar batch_all_distance_loss(const MatrixX<Scalar>& dist,
                               const std::vector<int>& labels,
                               const RankingLossConfig& cfg,
                               TripletCensus* census_out = nullptr) {
  cfg.validate();
  const TripletCensus census = count_triplets(labels);
  if (census_out) *census_out = census;
  if (census.batch_all_triplets == 0) return Scalar(0);
  const Scalar m = static_cast<Scalar>(cfg.margin);
  const Index n = dist.rows();
  Scalar acc(0);
  for (Index a = 0; a < n; ++a) {
    const int ya = labels[static_cast<std::size_t>(a)];
    for (Index p = 0; p < n; ++p) {
      if (p == a || labels[static_cast<std::size_t>(p)] != ya) continue;
      const Scalar dap = dist(a, p);
      for (Index q = 0; q < n; ++q) {
        if (labels[static_cast<std::size_t>(q)] == ya) continue;
        acc += margin_fn(m + dap - dist(a, q), cfg.soft_margin);
      }
    }
  }
  return acc / static_cast<Scalar>(census.batch_all_triplets);
}

template <typename Scalar>
void batch_all_distance_backward(const MatrixX<Scalar>& dist,
                                 const std::vector<int>& labels,
                                 const RankingLossConfig& cfg, Scalar seed,
                                 Eigen::Ref<MatrixX<Scalar>> ddist) {
  const TripletCensus census = count_triplets(labels);
  if (census.batch_all_triplets == 0) return;
  const Scalar m = static_cast<Scalar>(cfg.margin);
  const Scalar inv = seed / static_cast<Scalar>(census.batch_all_triplets);
  const Index n = dist.rows();
  for (Index a = 0; a < n; ++a) {
    const int ya = labels[static_cast<std::size_t>(a)];
    for (Index p = 0; p < n; ++p) {
      if (p == a || labels[static_cast<std::size_t>(p)] != ya) continue;
      const Scalar dap = dist(a, p);
      for (Index q = 0; q < n; ++q) {
        if (labels[static_cast<std::size_t>(q)] == ya) continue;
        const Scalar c =
            inv * margin_grad(m + dap - dist(a, q), cfg.soft_margin);
        ddist(a, p) += c;
        ddist(a, q) -= c;
      }
    }
  }
}

/// BatchHard: per valid anchor (P and N both non-empty), the hardest
/// positive (max d_ap) against the nearest negative (min d_an).
template <typename Scalar>
Scalar batch_hard_distance_loss(const MatrixX<Scalar>& dist,
                                const std::vector<int>& labels,
                                const RankingLossConfig& cfg,
                                TripletCensus* census_out = nullptr) {
  cfg.validate();
  const TripletCensus census = count_triplets(labels);
  if (census_out) *census_out = census;
  if (census.batch_hard_triplets == 0) return Scalar(0);
  const Scalar m = static_cast<Scalar>(cfg.margin);
  const Index n = dist.rows();
  Scalar acc(0);
  for (Index a = 0; a < n; ++a) {
    const int ya = labels[static_cast<std::size_t>(a)];
    Scalar dp = -std::numeric_limits<Scalar>::infinity();
    Scalar dn = std::numeric_limits<Scalar>::infinity();
    bool has_p = false, has_n = false;
    for (Index j = 0; j < n; ++j) {
      if (j == a) continue;
      if (labels[static_cast<std::size_t>(j)] == ya) {
        if (!has_p || dist(a, j) > dp) dp = dist(a, j);
        has_p = true;
      } else {
        if (!has_n || dist(a, j) < dn) dn = dist(a, j);
        has_n = true;
      }
    }
    if (!has_p || !has_n) continue;
    acc += margin_fn(m + dp - dn, cfg.soft_margin);
  }
  return acc / static_cast<Scalar>(census.batch_hard_triplets);
}

template <typename Scalar>
void batch_hard_distance_backward(const MatrixX<Scalar>& dist,
                                  const std::vector<int>& labels,
                                  const RankingLossConfig& cfg, Scalar seed,
                                  Eigen::Ref<MatrixX<Scalar>> ddist) {
  const TripletCensus census = count_triplets(labels);
  if (census.batch_hard_triplets == 0) return;
  const Scalar m = static_cast<Scalar>(cfg.margin);
  const Scalar inv = seed / static_cast<Scalar>(census.batch_hard_triplets);
  const Index n = dist.rows();
  for (Index a = 0; a < n; ++a) {
    const int ya = labels[static_cast<std::size_t>(a)];
    Index pi = -1, ni = -1;
    for (Index j = 0; j < n; ++j) {
      if (j == a) continue;
      if (labels[static_cast<std::size_t>(j)] == ya) {
        if (pi < 0 || dist(a, j) > dist(a, pi)) pi = j;
      } else {
        if (ni < 0 || dist(a, j) < dist(a, ni)) ni = j;
      }
    }
    if (pi < 0 || ni < 0) continue;
    const Scalar c =
        inv * margin_grad(m + dist(a, pi) - dist(a, ni), cfg.soft_margin);
    ddist(a, pi) += c;
    ddist(a, ni) -= c;
  }
}

/// BatchMean: per anchor with N non-empty, f(m + mean_pos - mean_neg).
/// kBatchSize divides both distance sums by the valid-anchor count |C| (the
/// literal published normalization); kPositiveCount divides by |P(a)| and
/// |N(a)|. An anchor without positives contributes an empty (zero) positive
/// sum either way.
template <typename Scalar>
Scalar batch_mean_distance_loss(const MatrixX<Scalar>& dist,
                                const std::vector<int>& labels,
                                const RankingLossConfig& cfg,
                                TripletCensus* census_out = nullptr) {
  cfg.validate();
  const TripletCensus census = count_triplets(labels);
  if (census_out) *census_out = census;
  const std::int64_t valid = census.batch_mean_triplets;
  if (valid == 0) return Scalar(0);
  const Scalar m = static_cast<Scalar>(cfg.margin);
  const Index n = dist.rows();
  Scalar acc(0);
  for (Index a = 0; a < n; ++a) {
    const int ya = labels[static_cast<std::size_t>(a)];
    Scalar pos_sum(0), neg_sum(0);
    std::int64_t pos_cnt = 0, neg_cnt = 0;
    for (Index j = 0; j < n; ++j) {
      if (j == a) continue;
      if (labels[static_cast<std::size_t>(j)] == ya) {
        pos_sum += dist(a, j);
        ++pos_cnt;
      } else {
        neg_sum += dist(a, j);
        ++neg_cnt;
      }
    }
    if (neg_cnt == 0) continue;
    Scalar pos_term, neg_term;
    if (cfg.positive_normalization == PositiveNormalization::kBatchSize) {
      pos_term = pos_sum / static_cast<Scalar>(valid);
      neg_term = neg_sum / static_cast<Scalar>(valid);
    } else {
      pos_term = pos_cnt > 0 ? pos_sum / static_cast<Scalar>(pos_cnt) : Scalar(0);
      neg_term = neg_sum / static_cast<Scalar>(neg_cnt);
    }
    acc += margin_fn(m + pos_term - neg_term, cfg.soft_margin);
  }
  return acc / static_cast<Scalar>(valid);
}

template <typename Scalar>
void batch_mean_distance_backward(const MatrixX<Scalar>& dist,
                                  const std::vector<int>& labels,
                                  const RankingLossConfig& cfg, Scalar seed,
                                  Eigen::Ref<MatrixX<Scalar>> ddist) {
  const TripletCensus census = count_triplets(labels);
  const std::int64_t valid = census.batch_mean_triplets;
  if (valid == 0) return;
  const Scalar m = static_cast<Scalar>(cfg.margin);
  const Scalar outer = seed / static_cast<Scalar>(valid);
  const Index n = dist.rows();
  for (Index a = 0; a < n; ++a) {
    const int ya = labels[static_cast<std::size_t>(a)];
    Scalar pos_sum(0), neg_sum(0);
    std::int64_t pos_cnt = 0, neg_cnt = 0;
    for (Index j = 0; j < n; ++j) {
      if (j == a) continue;
      if (labels[static_cast<std::size_t>(j)] == ya) {
        pos_sum += dist(a, j);
        ++pos_cnt;
      } else {
        neg_sum += dist(a, j);
        ++neg_cnt;
      }
    }
    if (neg_cnt == 0) continue;
    Scalar pos_term, neg_term, pos_coeff, neg_coeff;
    if (cfg.positive_normalization == PositiveNormalization::kBatchSize) {
      pos_term = pos_sum / static_cast<Scalar>(valid);
      neg_term = neg_sum / static_cast<Scalar>(valid);
      pos_coeff = Scalar(1) / static_cast<Scalar>(valid);
      neg_coeff = pos_coeff;
    } else {
      pos_term = pos_cnt > 0 ? pos_sum / static_cast<Scalar>(pos_cnt) : Scalar(0);
      neg_term = neg_sum / static_cast<Scalar>(neg_cnt);
      pos_coeff = pos_cnt > 0 ? Scalar(1) / static_cast<Scalar>(pos_cnt) : Scalar(0);
      neg_coeff = Scalar(1) / static_cast<Scalar>(neg_cnt);
    }
    const Scalar c =
        outer * margin_grad(m + pos_term - neg_term, cfg.soft_margin);
    for (Index j = 0; j < n; ++j) {
      if (j == a) continue;
      if (labels[static_cast<std::size_t>(j)] == ya) {
        ddist(a, j) += c * pos_coeff;
      } else {
        ddist(a, j) -= c * neg_coeff;
      }
    }
  }
}

// --- graph nodes ---------------------------------------------------------------

enum class TripletVariant { kBatchAll, kBatchHard, kBatchMean };

/// Scalar triplet-loss node over a distance matrix. The census of the batch
/// it last saw is kept for diagnostics.
template <typename Scalar>
class TripletLossOp final : public ad::OpT<Scalar> {
 public:
  TripletLossOp(TripletVariant variant, std::vector<int> labels,
                RankingLossConfig cfg)
      : variant_(variant), labels_(std::move(labels)), cfg_(cfg) {}

  std::string_view kind() const override {
    switch (variant_) {
      case TripletVariant::kBatchAll:
        return "batch_all_loss";
      case TripletVariant::kBatchHard:
        return "batch_hard_loss";
      default:
        return "batch_mean_loss";
    }
  }

  ad::TensorT<Scalar> forward(
      const std::vector<const ad::TensorT<Scalar>*>& in) override {
    const auto dist = in[0]->matrix();
    Scalar v(0);
    switch (variant_) {
      case TripletVariant::kBatchAll:
        v = batch_all_distance_loss<Scalar>(dist, labels_, cfg_, &census_);
        break;
      case TripletVariant::kBatchHard:
        v = batch_hard_distance_loss<Scalar>(dist, labels_, cfg_, &census_);
        break;
      case TripletVariant::kBatchMean:
        v = batch_mean_distance_loss<Scalar>(dist, labels_, cfg_, &census_);
        break;
    }
    return ad::TensorT<Scalar>::scalar(v);
  }

  void backward(const std::vector<const ad::TensorT<Scalar>*>& in,
                const ad::TensorT<Scalar>&,
                const ad::TensorT<Scalar>& out_grad,
                const std::vector<ad::TensorT<Scalar>*>& in_grads) override {
    if (!in_grads[0]) return;
    const auto dist = in[0]->matrix();
    auto ddist = in_grads[0]->matrix();
    const Scalar seed = out_grad[0];
    switch (variant_) {
      case TripletVariant::kBatchAll:
        batch_all_distance_backward<Scalar>(dist, labels_, cfg_, seed, ddist);
        break;
      case TripletVariant::kBatchHard:
        batch_hard_distance_backward<Scalar>(dist, labels_, cfg_, seed, ddist);
        break;
      case TripletVariant::kBatchMean:
        batch_mean_distance_backward<Scalar>(dist, labels_, cfg_, seed, ddist);
        break;
    }
  }

  const TripletCensus& census() const { return census_; }

 private:
  TripletVariant variant_;
  std::vector<int> labels_;
  RankingLossConfig cfg_;
  TripletCensus census_;
};

template <typename Scalar>
ad::NodeRef triplet_loss(ad::GraphT<Scalar>& g, ad::NodeRef dist,
                         TripletVariant variant, std::vector<int> labels,
                         const RankingLossConfig& cfg) {
  cfg.validate();
  const auto& s = g.shape(dist);
  if (s.size() != 2 || s[0] != s[1]) {
    throw ShapeError("triplet_loss: '" + g.label(dist) +
                     "' must be a square distance matrix, got " +
                     ad::shape_string(s));
  }
  if (static_cast<Index>(labels.size()) != s[0]) {
    throw ShapeError("triplet_loss: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(s[0]) + " rows");
  }
  return g.apply(
      std::make_unique<TripletLossOp<Scalar>>(variant, std::move(labels), cfg),
      {dist}, {1, 1});
}

// --- batch-level conveniences ------------------------------------------------------

template <typename Scalar>
RankingLossValue<Scalar> batch_all_triplet_loss(
    const NormalizedLogitsBatchT<Scalar>& batch, const RankingLossConfig& cfg) {
  batch.validate();
  const MatrixX<Scalar> dist = pairwise_euclidean(batch);
  RankingLossValue<Scalar> out;
  out.value = batch_all_distance_loss(dist, batch.labels, cfg, &out.census);
  return out;
}

template <typename Scalar>
RankingLossValue<Scalar> batch_hard_triplet_loss(
    const NormalizedLogitsBatchT<Scalar>& batch, const RankingLossConfig& cfg) {
  batch.validate();
  const MatrixX<Scalar> dist = pairwise_euclidean(batch);
  RankingLossValue<Scalar> out;
  out.value = batch_hard_distance_loss(dist, batch.labels, cfg, &out.census);
  return out;
}

template <typename Scalar>
RankingLossValue<Scalar> batch_mean_triplet_loss(
    const NormalizedLogitsBatchT<Scalar>& batch, const RankingLossConfig& cfg) {
  batch.validate();
  const MatrixX<Scalar> dist = pairwise_euclidean(batch);
  RankingLossValue<Scalar> out;
  out.value = batch_mean_distance_loss(dist, batch.labels, cfg, &out.census);
  return out;
}

}  // namespace rankmatch::loss

#endif  // RANKMATCH_LOSS_TRIPLET_HPP_
