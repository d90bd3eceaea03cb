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
#ifndef RANKMATCH_LOSS_PAIRWISE_HPP_
#define RANKMATCH_LOSS_PAIRWISE_HPP_

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "rankmatch/ad/graph.hpp"
#include "rankmatch/ad/ops.hpp"
#include "rankmatch/loss/types.hpp"

namespace rankmatch::loss {

/// softplus margin wrapper, ln(1 + e^x); overflow-safe.
template <typename Scalar>
Scalar soft_margin(Scalar x) {
  return ad::softplus_value(x);
}

template <typename Scalar>
Scalar margin_fn(Scalar t, bool soft) {
  return soft ? ad::softplus_value(t) : std::max(t, Scalar(0));
}

template <typename Scalar>
Scalar margin_grad(Scalar t, bool soft) {
  return soft ? ad::logistic_value(t) : (t > Scalar(0) ? Scalar(1) : Scalar(0));
}

/// Dense Euclidean distance matrix, computed entry by entry from the row
/// differences (no gram-matrix shortcut, so the result matches a naive
/// recomputation bit for bit). Symmetric with a zero diagonal.
template <typename Scalar>
MatrixX<Scalar> pairwise_euclidean_matrix(const MatrixX<Scalar>& x) {
  const Index n = x.rows();
  MatrixX<Scalar> d(n, n);
  for (Index i = 0; i < n; ++i) {
    d(i, i) = Scalar(0);
    for (Index j = i + 1; j < n; ++j) {
      const Scalar v = (x.row(i) - x.row(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

/// Accumulates dL/dx given dL/dD. The distance derivative is guarded as
/// (x_i - x_j) / max(d_ij, 1e-6), i.e. sqrt(max(d^2, 1e-12)), so coincident
/// rows cannot produce non-finite gradients. Zero entries of ddist are
/// skipped, which keeps the sparse selections of BatchHard cheap.
template <typename Scalar>
void pairwise_euclidean_backward(const MatrixX<Scalar>& x,
                                 const MatrixX<Scalar>& dist,
                                 const MatrixX<Scalar>& ddist,
                                 Eigen::Ref<MatrixX<Scalar>> dx) {
  const Index n = x.rows();
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const Scalar g = ddist(i, j);
      if (g == Scalar(0)) continue;
      const Scalar denom = std::max(dist(i, j), Scalar(1e-6));
      const auto u = (x.row(i) - x.row(j)) / denom;
      dx.row(i) += g * u;
      dx.row(j) -= g * u;
    }
  }
}

/// Cosine-style similarity matrix on (normalized) rows: S = X X^T.
template <typename Scalar>
MatrixX<Scalar> gram_matrix(const MatrixX<Scalar>& x) {
  MatrixX<Scalar> s(x.rows(), x.rows());
  s.noalias() = x * x.transpose();
  return s;
}

/// Batch-level conveniences on prepared logits batches.
template <typename Scalar>
MatrixX<Scalar> pairwise_euclidean(const NormalizedLogitsBatchT<Scalar>& batch) {
  return pairwise_euclidean_matrix(batch.logits);
}

template <typename Scalar>
MatrixX<Scalar> pairwise_cosine(const NormalizedLogitsBatchT<Scalar>& batch) {
  return gram_matrix(batch.logits);
}

// --- graph nodes --------------------------------------------------------------

template <typename Scalar>
class PairwiseEuclideanOp final : public ad::OpT<Scalar> {
 public:
  std::string_view kind() const override { return "pairwise_euclidean"; }

  ad::TensorT<Scalar> forward(
      const std::vector<const ad::TensorT<Scalar>*>& in) override {
    return ad::TensorT<Scalar>::from_matrix(
        pairwise_euclidean_matrix<Scalar>(in[0]->matrix()));
  }

  void backward(const std::vector<const ad::TensorT<Scalar>*>& in,
                const ad::TensorT<Scalar>& value,
                const ad::TensorT<Scalar>& out_grad,
                const std::vector<ad::TensorT<Scalar>*>& in_grads) override {
    if (!in_grads[0]) return;
    pairwise_euclidean_backward<Scalar>(in[0]->matrix(), value.matrix(),
                                        out_grad.matrix(),
                                        in_grads[0]->matrix());
  }
};

template <typename Scalar>
ad::NodeRef pairwise_euclidean(ad::GraphT<Scalar>& g, ad::NodeRef x) {
  const auto& s = g.shape(x);
  if (s.size() != 2) {
    throw ShapeError("pairwise_euclidean: '" + g.label(x) + "' must be rank 2");
  }
  return g.apply(std::make_unique<PairwiseEuclideanOp<Scalar>>(), {x},
                 {s[0], s[0]});
}

template <typename Scalar>
class RowGramOp final : public ad::OpT<Scalar> {
 public:
  std::string_view kind() const override { return "row_gram"; }

  ad::TensorT<Scalar> forward(
      const std::vector<const ad::TensorT<Scalar>*>& in) override {
    return ad::TensorT<Scalar>::from_matrix(gram_matrix<Scalar>(in[0]->matrix()));
  }

  void backward(const std::vector<const ad::TensorT<Scalar>*>& in,
                const ad::TensorT<Scalar>&,
                const ad::TensorT<Scalar>& out_grad,
                const std::vector<ad::TensorT<Scalar>*>& in_grads) override {
    if (!in_grads[0]) return;
    const auto g = out_grad.matrix();
    in_grads[0]->matrix().noalias() +=
        (g + g.transpose()) * in[0]->matrix();
  }
};

template <typename Scalar>
ad::NodeRef row_gram(ad::GraphT<Scalar>& g, ad::NodeRef x) {
  const auto& s = g.shape(x);
  if (s.size() != 2) {
    throw ShapeError("row_gram: '" + g.label(x) + "' must be rank 2");
  }
  return g.apply(std::make_unique<RowGramOp<Scalar>>(), {x}, {s[0], s[0]});
}

}  // namespace rankmatch::loss

#endif  // RANKMATCH_LOSS_PAIRWISE_HPP_
