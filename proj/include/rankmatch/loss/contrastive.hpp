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
#ifndef RANKMATCH_LOSS_CONTRASTIVE_HPP_
#define RANKMATCH_LOSS_CONTRASTIVE_HPP_

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rankmatch/ad/graph.hpp"
#include "rankmatch/loss/pairwise.hpp"
#include "rankmatch/loss/types.hpp"

namespace rankmatch::loss {

// NT-Xent-style loss on a similarity matrix. One term per ordered same-label
// pair (a, p), a != p:
//   -log( exp(s_ap / T) / (exp(s_ap / T) + sum_{n in N(a)} exp(s_an / T)) )
// The denominator holds the pair's own positive plus the anchor's negatives;
// other positives of the anchor are excluded. Each term subtracts its row
// max before exponentiation. The loss is the mean over the N ordered pairs,
// and 0 when N == 0. A pair with no negatives contributes -log(1) = 0.

template <typename Scalar>
Scalar contrastive_similarity_loss(const MatrixX<Scalar>& sims,
                                   const std::vector<int>& labels,
                                   const RankingLossConfig& cfg,
                                   std::int64_t* pair_count_out = nullptr) {
  cfg.validate();
  const TripletCensus census = count_triplets(labels);
  if (pair_count_out) *pair_count_out = census.contrastive_pairs;
  if (census.contrastive_pairs == 0) return Scalar(0);
  const Scalar inv_t = Scalar(1) / static_cast<Scalar>(cfg.temperature);
  const Index n = sims.rows();
  Scalar acc(0);
  std::vector<Scalar> zneg;
  for (Index a = 0; a < n; ++a) {
    const int ya = labels[static_cast<std::size_t>(a)];
    zneg.clear();
    Scalar zneg_max = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < n; ++j) {
      if (labels[static_cast<std::size_t>(j)] == ya) continue;
      const Scalar z = sims(a, j) * inv_t;
      zneg.push_back(z);
      zneg_max = std::max(zneg_max, z);
    }
    for (Index p = 0; p < n; ++p) {
      if (p == a || labels[static_cast<std::size_t>(p)] != ya) continue;
      const Scalar zp = sims(a, p) * inv_t;
      const Scalar m = zneg.empty() ? zp : std::max(zp, zneg_max);
      Scalar denom = std::exp(zp - m);
      for (const Scalar z : zneg) denom += std::exp(z - m);
      acc += -(zp - m) + std::log(denom);
    }
  }
  return acc / static_cast<Scalar>(census.contrastive_pairs);
}

template <typename Scalar>
void contrastive_similarity_backward(const MatrixX<Scalar>& sims,
                                     const std::vector<int>& labels,
                                     const RankingLossConfig& cfg, Scalar seed,
                                     Eigen::Ref<MatrixX<Scalar>> dsims) {
  const TripletCensus census = count_triplets(labels);
  if (census.contrastive_pairs == 0) return;
  const Scalar inv_t = Scalar(1) / static_cast<Scalar>(cfg.temperature);
  const Scalar c = seed / static_cast<Scalar>(census.contrastive_pairs);
  const Index n = sims.rows();
  std::vector<Index> negs;
  std::vector<Scalar> zneg;
  for (Index a = 0; a < n; ++a) {
    const int ya = labels[static_cast<std::size_t>(a)];
    negs.clear();
    zneg.clear();
    Scalar zneg_max = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < n; ++j) {
      if (labels[static_cast<std::size_t>(j)] == ya) continue;
      negs.push_back(j);
      const Scalar z = sims(a, j) * inv_t;
      zneg.push_back(z);
      zneg_max = std::max(zneg_max, z);
    }
    for (Index p = 0; p < n; ++p) {
      if (p == a || labels[static_cast<std::size_t>(p)] != ya) continue;
      const Scalar zp = sims(a, p) * inv_t;
      const Scalar m = zneg.empty() ? zp : std::max(zp, zneg_max);
      const Scalar ep = std::exp(zp - m);
      Scalar denom = ep;
      for (const Scalar z : zneg) denom += std::exp(z - m);
      // d(term)/dz_j = softmax weight, minus 1 on the positive.
      dsims(a, p) += c * inv_t * (ep / denom - Scalar(1));
      for (std::size_t k = 0; k < negs.size(); ++k) {
        dsims(a, negs[k]) += c * inv_t * (std::exp(zneg[k] - m) / denom);
      }
    }
  }
}

template <typename Scalar>
class ContrastiveLossOp final : public ad::OpT<Scalar> {
 public:
  ContrastiveLossOp(std::vector<int> labels, RankingLossConfig cfg)
      : labels_(std::move(labels)), cfg_(cfg) {}

  std::string_view kind() const override { return "contrastive_loss"; }

  ad::TensorT<Scalar> forward(
      const std::vector<const ad::TensorT<Scalar>*>& in) override {
    census_ = count_triplets(labels_);
    const Scalar v = contrastive_similarity_loss<Scalar>(
        in[0]->matrix(), labels_, cfg_, nullptr);
    return ad::TensorT<Scalar>::scalar(v);
  }

  void backward(const std::vector<const ad::TensorT<Scalar>*>& in,
                const ad::TensorT<Scalar>&,
                const ad::TensorT<Scalar>& out_grad,
                const std::vector<ad::TensorT<Scalar>*>& in_grads) override {
    if (!in_grads[0]) return;
    contrastive_similarity_backward<Scalar>(in[0]->matrix(), labels_, cfg_,
                                            out_grad[0],
                                            in_grads[0]->matrix());
  }

  const TripletCensus& census() const { return census_; }

 private:
  std::vector<int> labels_;
  RankingLossConfig cfg_;
  TripletCensus census_;
};

template <typename Scalar>
ad::NodeRef contrastive_loss(ad::GraphT<Scalar>& g, ad::NodeRef sims,
                             std::vector<int> labels,
                             const RankingLossConfig& cfg) {
  cfg.validate();
  const auto& s = g.shape(sims);
  if (s.size() != 2 || s[0] != s[1]) {
    throw ShapeError("contrastive_loss: '" + g.label(sims) +
                     "' must be a square similarity matrix, got " +
                     ad::shape_string(s));
  }
  if (static_cast<Index>(labels.size()) != s[0]) {
    throw ShapeError("contrastive_loss: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(s[0]) + " rows");
  }
  return g.apply(
      std::make_unique<ContrastiveLossOp<Scalar>>(std::move(labels), cfg),
      {sims}, {1, 1});
}

template <typename Scalar>
ContrastiveLossValue<Scalar> contrastive_loss(
    const NormalizedLogitsBatchT<Scalar>& batch, const RankingLossConfig& cfg) {
  batch.validate();
  const MatrixX<Scalar> sims = pairwise_cosine(batch);
  ContrastiveLossValue<Scalar> out;
  out.value =
      contrastive_similarity_loss(sims, batch.labels, cfg, &out.pair_count);
  return out;
}

}  // namespace rankmatch::loss

#endif  // RANKMATCH_LOSS_CONTRASTIVE_HPP_
