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
#ifndef RANKMATCH_AD_OPS_HPP_
#define RANKMATCH_AD_OPS_HPP_

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rankmatch/ad/graph.hpp"
#include "rankmatch/ad/tensor.hpp"

namespace rankmatch::ad {

// --- scalar helpers ---------------------------------------------------------

/// Overflow-safe ln(1 + e^x).
template <typename Scalar>
Scalar softplus_value(Scalar x) {
  const Scalar ax = std::abs(x);
  return std::max(x, Scalar(0)) + std::log1p(std::exp(-ax));
}

/// d/dx softplus = 1 / (1 + e^-x).
template <typename Scalar>
Scalar logistic_value(Scalar x) {
  if (x >= Scalar(0)) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
  }
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

namespace detail {

template <typename Scalar>
void require_rank2(const GraphT<Scalar>& g, NodeRef ref, const char* op) {
  if (g.shape(ref).size() != 2) {
    throw ShapeError(std::string(op) + ": node '" + g.label(ref) +
                     "' must be rank 2, got " + shape_string(g.shape(ref)));
  }
}

}  // namespace detail

// --- matmul -----------------------------------------------------------------

template <typename Scalar>
class MatMulOp final : public OpT<Scalar> {
 public:
  std::string_view kind() const override { return "matmul"; }

  TensorT<Scalar> forward(const std::vector<const TensorT<Scalar>*>& in) override {
    const auto a = in[0]->matrix();
    const auto b = in[1]->matrix();
    TensorT<Scalar> out({a.rows(), b.cols()});
    out.matrix().noalias() = a * b;
    return out;
  }

  void backward(const std::vector<const TensorT<Scalar>*>& in,
                const TensorT<Scalar>&, const TensorT<Scalar>& out_grad,
                const std::vector<TensorT<Scalar>*>& in_grads) override {
    const auto a = in[0]->matrix();
    const auto b = in[1]->matrix();
    const auto g = out_grad.matrix();
    if (in_grads[0]) in_grads[0]->matrix().noalias() += g * b.transpose();
    if (in_grads[1]) in_grads[1]->matrix().noalias() += a.transpose() * g;
  }
};

template <typename Scalar>
NodeRef matmul(GraphT<Scalar>& g, NodeRef a, NodeRef b) {
  detail::require_rank2(g, a, "matmul");
  detail::require_rank2(g, b, "matmul");
  const auto& sa = g.shape(a);
  const auto& sb = g.shape(b);
  if (sa[1] != sb[0]) {
    throw ShapeError("matmul: inner dimensions disagree for '" + g.label(a) +
                     "' " + shape_string(sa) + " x '" + g.label(b) + "' " +
                     shape_string(sb));
  }
  return g.apply(std::make_unique<MatMulOp<Scalar>>(), {a, b}, {sa[0], sb[1]});
}

// --- add (same shape, or row-broadcast bias {1, c}) --------------------------

template <typename Scalar>
class AddOp final : public OpT<Scalar> {
 public:
  explicit AddOp(bool broadcast_rows) : broadcast_rows_(broadcast_rows) {}

  std::string_view kind() const override { return "add"; }

  TensorT<Scalar> forward(const std::vector<const TensorT<Scalar>*>& in) override {
    TensorT<Scalar> out(in[0]->shape());
    if (broadcast_rows_) {
      out.matrix() = in[0]->matrix().rowwise() + in[1]->matrix().row(0);
    } else {
      out.flat() = in[0]->flat() + in[1]->flat();
    }
    return out;
  }

  void backward(const std::vector<const TensorT<Scalar>*>&,
                const TensorT<Scalar>&, const TensorT<Scalar>& out_grad,
                const std::vector<TensorT<Scalar>*>& in_grads) override {
    if (in_grads[0]) in_grads[0]->flat() += out_grad.flat();
    if (in_grads[1]) {
      if (broadcast_rows_) {
        in_grads[1]->matrix().row(0) += out_grad.matrix().colwise().sum();
      } else {
        in_grads[1]->flat() += out_grad.flat();
      }
    }
  }

 private:
  bool broadcast_rows_;
};

template <typename Scalar>
NodeRef add(GraphT<Scalar>& g, NodeRef a, NodeRef b) {
  detail::require_rank2(g, a, "add");
  detail::require_rank2(g, b, "add");
  const auto& sa = g.shape(a);
  const auto& sb = g.shape(b);
  const bool broadcast = (sb[0] == 1 && sa[0] != 1 && sa[1] == sb[1]);
  if (!broadcast && sa != sb) {
    throw ShapeError("add: shapes " + shape_string(sa) + " and " +
                     shape_string(sb) + " are incompatible ('" + g.label(a) +
                     "' + '" + g.label(b) + "')");
  }
  return g.apply(std::make_unique<AddOp<Scalar>>(broadcast), {a, b}, sa);
}

// --- scale ------------------------------------------------------------------

template <typename Scalar>
class ScaleOp final : public OpT<Scalar> {
 public:
  explicit ScaleOp(Scalar alpha) : alpha_(alpha) {}

  std::string_view kind() const override { return "scale"; }

  TensorT<Scalar> forward(const std::vector<const TensorT<Scalar>*>& in) override {
    TensorT<Scalar> out(in[0]->shape());
    out.flat() = alpha_ * in[0]->flat();
    return out;
  }

  void backward(const std::vector<const TensorT<Scalar>*>&,
                const TensorT<Scalar>&, const TensorT<Scalar>& out_grad,
                const std::vector<TensorT<Scalar>*>& in_grads) override {
    if (in_grads[0]) in_grads[0]->flat() += alpha_ * out_grad.flat();
  }

 private:
  Scalar alpha_;
};

template <typename Scalar>
NodeRef scale(GraphT<Scalar>& g, NodeRef a, Scalar alpha) {
  return g.apply(std::make_unique<ScaleOp<Scalar>>(alpha), {a}, g.shape(a));
}

// --- elementwise multiply ----------------------------------------------------

template <typename Scalar>
class MultiplyOp final : public OpT<Scalar> {
 public:
  std::string_view kind() const override { return "multiply"; }

  TensorT<Scalar> forward(const std::vector<const TensorT<Scalar>*>& in) override {
    TensorT<Scalar> out(in[0]->shape());
    out.flat() = in[0]->flat().cwiseProduct(in[1]->flat());
    return out;
  }

  void backward(const std::vector<const TensorT<Scalar>*>& in,
                const TensorT<Scalar>&, const TensorT<Scalar>& out_grad,
                const std::vector<TensorT<Scalar>*>& in_grads) override {
    if (in_grads[0]) {
      in_grads[0]->flat() += out_grad.flat().cwiseProduct(in[1]->flat());
    }
    if (in_grads[1]) {
      in_grads[1]->flat() += out_grad.flat().cwiseProduct(in[0]->flat());
    }
  }
};

template <typename Scalar>
NodeRef multiply(GraphT<Scalar>& g, NodeRef a, NodeRef b) {
  if (g.shape(a) != g.shape(b)) {
    throw ShapeError("multiply: shapes " + shape_string(g.shape(a)) + " and " +
                     shape_string(g.shape(b)) + " differ");
  }
  return g.apply(std::make_unique<MultiplyOp<Scalar>>(), {a, b}, g.shape(a));
}

// --- relu / softplus ----------------------------------------------------------

template <typename Scalar>
class ReluOp final : public OpT<Scalar> {
 public:
  std::string_view kind() const override { return "relu"; }

  TensorT<Scalar> forward(const std::vector<const TensorT<Scalar>*>& in) override {
    TensorT<Scalar> out(in[0]->shape());
    out.flat() = in[0]->flat().cwiseMax(Scalar(0));
    return out;
  }

  void backward(const std::vector<const TensorT<Scalar>*>& in,
                const TensorT<Scalar>&, const TensorT<Scalar>& out_grad,
                const std::vector<TensorT<Scalar>*>& in_grads) override {
    if (!in_grads[0]) return;
    const auto x = in[0]->flat();
    auto gin = in_grads[0]->flat();
    const auto gout = out_grad.flat();
    for (Index i = 0; i < x.size(); ++i) {
      if (x[i] > Scalar(0)) gin[i] += gout[i];
    }
  }
};

template <typename Scalar>
NodeRef relu(GraphT<Scalar>& g, NodeRef a) {
  return g.apply(std::make_unique<ReluOp<Scalar>>(), {a}, g.shape(a));
}

template <typename Scalar>
class SoftplusOp final : public OpT<Scalar> {
 public:
  std::string_view kind() const override { return "softplus"; }

  TensorT<Scalar> forward(const std::vector<const TensorT<Scalar>*>& in) override {
    TensorT<Scalar> out(in[0]->shape());
    const auto x = in[0]->flat();
    auto y = out.flat();
    for (Index i = 0; i < x.size(); ++i) y[i] = softplus_value(x[i]);
    return out;
  }

  void backward(const std::vector<const TensorT<Scalar>*>& in,
                const TensorT<Scalar>&, const TensorT<Scalar>& out_grad,
                const std::vector<TensorT<Scalar>*>& in_grads) override {
    if (!in_grads[0]) return;
    const auto x = in[0]->flat();
    auto gin = in_grads[0]->flat();
    const auto gout = out_grad.flat();
    for (Index i = 0; i < x.size(); ++i) gin[i] += logistic_value(x[i]) * gout[i];
  }
};

template <typename Scalar>
NodeRef softplus(GraphT<Scalar>& g, NodeRef a) {
  return g.apply(std::make_unique<SoftplusOp<Scalar>>(), {a}, g.shape(a));
}

// --- reductions ---------------------------------------------------------------

template <typename Scalar>
class SumOp final : public OpT<Scalar> {
 public:
  std::string_view kind() const override { return "sum"; }

  TensorT<Scalar> forward(const std::vector<const TensorT<Scalar>*>& in) override {
    return TensorT<Scalar>::scalar(in[0]->flat().sum());
  }

  void backward(const std::vector<const TensorT<Scalar>*>&,
                const TensorT<Scalar>&, const TensorT<Scalar>& out_grad,
                const std::vector<TensorT<Scalar>*>& in_grads) override {
    if (in_grads[0]) {
      in_grads[0]->flat().array() += out_grad[0];
    }
  }
};

template <typename Scalar>
NodeRef sum_all(GraphT<Scalar>& g, NodeRef a) {
  return g.apply(std::make_unique<SumOp<Scalar>>(), {a}, {1, 1});
}

template <typename Scalar>
class MeanOp final : public OpT<Scalar> {
 public:
  std::string_view kind() const override { return "mean"; }

  TensorT<Scalar> forward(const std::vector<const TensorT<Scalar>*>& in) override {
    return TensorT<Scalar>::scalar(in[0]->flat().mean());
  }

  void backward(const std::vector<const TensorT<Scalar>*>& in,
                const TensorT<Scalar>&, const TensorT<Scalar>& out_grad,
                const std::vector<TensorT<Scalar>*>& in_grads) override {
    if (in_grads[0]) {
      in_grads[0]->flat().array() +=
          out_grad[0] / static_cast<Scalar>(in[0]->size());
    }
  }
};

template <typename Scalar>
NodeRef mean_all(GraphT<Scalar>& g, NodeRef a) {
  return g.apply(std::make_unique<MeanOp<Scalar>>(), {a}, {1, 1});
}

// --- weighted sum of scalars ---------------------------------------------------

template <typename Scalar>
class WeightedSumOp final : public OpT<Scalar> {
 public:
  explicit WeightedSumOp(std::vector<Scalar> coeffs)
      : coeffs_(std::move(coeffs)) {}

  std::string_view kind() const override { return "weighted_sum"; }

  TensorT<Scalar> forward(const std::vector<const TensorT<Scalar>*>& in) override {
    Scalar acc(0);
    for (std::size_t i = 0; i < in.size(); ++i) acc += coeffs_[i] * (*in[i])[0];
    return TensorT<Scalar>::scalar(acc);
  }

  void backward(const std::vector<const TensorT<Scalar>*>&,
                const TensorT<Scalar>&, const TensorT<Scalar>& out_grad,
                const std::vector<TensorT<Scalar>*>& in_grads) override {
    for (std::size_t i = 0; i < in_grads.size(); ++i) {
      if (in_grads[i]) (*in_grads[i])[0] += coeffs_[i] * out_grad[0];
    }
  }

 private:
  std::vector<Scalar> coeffs_;
};

template <typename Scalar>
NodeRef weighted_sum(GraphT<Scalar>& g, const std::vector<NodeRef>& terms,
                     std::vector<Scalar> coeffs) {
  if (terms.empty() || terms.size() != coeffs.size()) {
    throw ShapeError("weighted_sum: term/coefficient counts disagree");
  }
  for (const NodeRef t : terms) {
    if (TensorT<Scalar>::element_count(g.shape(t)) != 1) {
      throw ShapeError("weighted_sum: node '" + g.label(t) + "' is not scalar");
    }
  }
  return g.apply(std::make_unique<WeightedSumOp<Scalar>>(std::move(coeffs)),
                 terms, {1, 1});
}

// --- softmax over rows ----------------------------------------------------------

template <typename Scalar>
class SoftmaxRowsOp final : public OpT<Scalar> {
 public:
  std::string_view kind() const override { return "softmax_rows"; }

  TensorT<Scalar> forward(const std::vector<const TensorT<Scalar>*>& in) override {
    const auto x = in[0]->matrix();
    TensorT<Scalar> out(in[0]->shape());
    auto y = out.matrix();
    for (Index r = 0; r < x.rows(); ++r) {
      const Scalar m = x.row(r).maxCoeff();
      y.row(r) = (x.row(r).array() - m).exp();
      y.row(r) /= y.row(r).sum();
    }
    return out;
  }

  void backward(const std::vector<const TensorT<Scalar>*>&,
                const TensorT<Scalar>& value, const TensorT<Scalar>& out_grad,
                const std::vector<TensorT<Scalar>*>& in_grads) override {
    if (!in_grads[0]) return;
    const auto y = value.matrix();
    const auto g = out_grad.matrix();
    auto gin = in_grads[0]->matrix();
    for (Index r = 0; r < y.rows(); ++r) {
      const Scalar dot = g.row(r).cwiseProduct(y.row(r)).sum();
      gin.row(r) += y.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
  }
};

template <typename Scalar>
NodeRef softmax_rows(GraphT<Scalar>& g, NodeRef a) {
  detail::require_rank2(g, a, "softmax_rows");
  return g.apply(std::make_unique<SoftmaxRowsOp<Scalar>>(), {a}, g.shape(a));
}

// --- l2 normalize rows -----------------------------------------------------------

template <typename Scalar>
class L2NormalizeRowsOp final : public OpT<Scalar> {
 public:
  std::string_view kind() const override { return "l2_normalize_rows"; }

  TensorT<Scalar> forward(const std::vector<const TensorT<Scalar>*>& in) override {
    const auto x = in[0]->matrix();
    TensorT<Scalar> out(in[0]->shape());
    auto y = out.matrix();
    norms_.resize(static_cast<std::size_t>(x.rows()));
    for (Index r = 0; r < x.rows(); ++r) {
      const Scalar n = x.row(r).norm();
      if (n <= Scalar(1e-12)) {
        throw NumericError("l2_normalize_rows: zero-norm row " +
                           std::to_string(static_cast<long long>(r)));
      }
      norms_[static_cast<std::size_t>(r)] = n;
      y.row(r) = x.row(r) / n;
    }
    return out;
  }

  void backward(const std::vector<const TensorT<Scalar>*>&,
                const TensorT<Scalar>& value, const TensorT<Scalar>& out_grad,
                const std::vector<TensorT<Scalar>*>& in_grads) override {
    if (!in_grads[0]) return;
    const auto y = value.matrix();
    const auto g = out_grad.matrix();
    auto gin = in_grads[0]->matrix();
    for (Index r = 0; r < y.rows(); ++r) {
      const Scalar dot = g.row(r).cwiseProduct(y.row(r)).sum();
      gin.row(r) += (g.row(r) - dot * y.row(r)) / norms_[static_cast<std::size_t>(r)];
    }
  }

 private:
  std::vector<Scalar> norms_;
};

template <typename Scalar>
NodeRef l2_normalize_rows(GraphT<Scalar>& g, NodeRef a) {
  detail::require_rank2(g, a, "l2_normalize_rows");
  return g.apply(std::make_unique<L2NormalizeRowsOp<Scalar>>(), {a}, g.shape(a));
}

// --- gather rows -------------------------------------------------------------------

template <typename Scalar>
class GatherRowsOp final : public OpT<Scalar> {
 public:
  explicit GatherRowsOp(std::vector<Index> rows) : rows_(std::move(rows)) {}

  std::string_view kind() const override { return "gather_rows"; }

  TensorT<Scalar> forward(const std::vector<const TensorT<Scalar>*>& in) override {
    const auto x = in[0]->matrix();
    TensorT<Scalar> out({static_cast<Index>(rows_.size()), x.cols()});
    auto y = out.matrix();
    for (Index i = 0; i < y.rows(); ++i) {
      y.row(i) = x.row(rows_[static_cast<std::size_t>(i)]);
    }
    return out;
  }

  void backward(const std::vector<const TensorT<Scalar>*>&,
                const TensorT<Scalar>&, const TensorT<Scalar>& out_grad,
                const std::vector<TensorT<Scalar>*>& in_grads) override {
    if (!in_grads[0]) return;
    const auto g = out_grad.matrix();
    auto gin = in_grads[0]->matrix();
    for (Index i = 0; i < g.rows(); ++i) {
      gin.row(rows_[static_cast<std::size_t>(i)]) += g.row(i);
    }
  }

 private:
  std::vector<Index> rows_;
};

template <typename Scalar>
NodeRef gather_rows(GraphT<Scalar>& g, NodeRef a, std::vector<Index> rows) {
  detail::require_rank2(g, a, "gather_rows");
  const auto& sa = g.shape(a);
  for (const Index r : rows) {
    if (r < 0 || r >= sa[0]) {
      throw ShapeError("gather_rows: row index " +
                       std::to_string(static_cast<long long>(r)) +
                       " out of range for '" + g.label(a) + "' " +
                       shape_string(sa));
    }
  }
  const Index n = static_cast<Index>(rows.size());
  return g.apply(std::make_unique<GatherRowsOp<Scalar>>(std::move(rows)), {a},
                 {n, sa[1]});
}

// --- fused masked softmax cross-entropy -----------------------------------------------

/// loss = (1/divisor) * sum_r w_r * (logsumexp(z_r) - z_r . t_r).
/// Targets are expected to be fixed rows summing to 1 (one-hot labels or
/// pseudo-labels); they never receive gradients.
template <typename Scalar>
class SoftmaxCrossEntropyOp final : public OpT<Scalar> {
 public:
  SoftmaxCrossEntropyOp(std::vector<Scalar> row_weights, Scalar divisor)
      : row_weights_(std::move(row_weights)), divisor_(divisor) {}

  std::string_view kind() const override { return "softmax_cross_entropy"; }

  TensorT<Scalar> forward(const std::vector<const TensorT<Scalar>*>& in) override {
    const auto z = in[0]->matrix();
    const auto t = in[1]->matrix();
    probs_.resize(z.rows(), z.cols());
    Scalar acc(0);
    for (Index r = 0; r < z.rows(); ++r) {
      const Scalar m = z.row(r).maxCoeff();
      probs_.row(r) = (z.row(r).array() - m).exp();
      const Scalar denom = probs_.row(r).sum();
      probs_.row(r) /= denom;
      const Scalar lse = m + std::log(denom);
      acc += row_weights_[static_cast<std::size_t>(r)] *
             (lse - z.row(r).cwiseProduct(t.row(r)).sum());
    }
    return TensorT<Scalar>::scalar(acc / divisor_);
  }

  void backward(const std::vector<const TensorT<Scalar>*>& in,
                const TensorT<Scalar>&, const TensorT<Scalar>& out_grad,
                const std::vector<TensorT<Scalar>*>& in_grads) override {
    if (!in_grads[0]) return;
    const auto t = in[1]->matrix();
    auto gin = in_grads[0]->matrix();
    const Scalar s = out_grad[0] / divisor_;
    for (Index r = 0; r < gin.rows(); ++r) {
      const Scalar w = row_weights_[static_cast<std::size_t>(r)];
      if (w == Scalar(0)) continue;
      gin.row(r) += (w * s) * (probs_.row(r) - t.row(r));
    }
  }

 private:
  std::vector<Scalar> row_weights_;
  Scalar divisor_;
  MatrixX<Scalar> probs_;
};

template <typename Scalar>
NodeRef softmax_cross_entropy(GraphT<Scalar>& g, NodeRef logits, NodeRef targets,
                              std::vector<Scalar> row_weights, Scalar divisor) {
  detail::require_rank2(g, logits, "softmax_cross_entropy");
  detail::require_rank2(g, targets, "softmax_cross_entropy");
  if (g.shape(logits) != g.shape(targets)) {
    throw ShapeError("softmax_cross_entropy: logits " +
                     shape_string(g.shape(logits)) + " and targets " +
                     shape_string(g.shape(targets)) + " differ");
  }
  if (g.requires_grad(targets)) {
    throw ShapeError("softmax_cross_entropy: targets must be detached");
  }
  if (static_cast<Index>(row_weights.size()) != g.shape(logits)[0]) {
    throw ShapeError("softmax_cross_entropy: row weight count " +
                     std::to_string(row_weights.size()) +
                     " does not match batch rows");
  }
  if (!(divisor > Scalar(0))) {
    throw ShapeError("softmax_cross_entropy: divisor must be positive");
  }
  return g.apply(std::make_unique<SoftmaxCrossEntropyOp<Scalar>>(
                     std::move(row_weights), divisor),
                 {logits, targets}, {1, 1});
}

// --- convolution (im2col) ----------------------------------------------------------------

struct Conv2dShape {
  Index in_channels = 0;
  Index height = 0;
  Index width = 0;
  Index out_channels = 0;
  Index ksize = 3;
  Index stride = 1;
  Index pad = 1;

  Index out_height() const { return (height + 2 * pad - ksize) / stride + 1; }
  Index out_width() const { return (width + 2 * pad - ksize) / stride + 1; }
};

/// 2-D convolution on flattened channel-major rows. Sample rows are
/// (c, y, x) flattened; the op runs one im2col + matmul per sample and caches
/// the column matrices for backward.
template <typename Scalar>
class Conv2dOp final : public OpT<Scalar> {
 public:
  explicit Conv2dOp(Conv2dShape s) : s_(s) {}

  std::string_view kind() const override { return "conv2d"; }

  TensorT<Scalar> forward(const std::vector<const TensorT<Scalar>*>& in) override {
    const auto x = in[0]->matrix();
    const auto w = in[1]->matrix();
    const auto b = in[2]->matrix();
    const Index n = x.rows();
    const Index oh = s_.out_height(), ow = s_.out_width();
    TensorT<Scalar> out({n, s_.out_channels * oh * ow});
    auto y = out.matrix();
    cols_.assign(static_cast<std::size_t>(n),
                 MatrixX<Scalar>(s_.in_channels * s_.ksize * s_.ksize, oh * ow));
    MatrixX<Scalar> omat(s_.out_channels, oh * ow);
    for (Index i = 0; i < n; ++i) {
      auto& cols = cols_[static_cast<std::size_t>(i)];
      im2col(x.row(i).data(), cols);
      omat.noalias() = w * cols;
      omat.colwise() += b.row(0).transpose();
      y.row(i) = Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(
          omat.data(), omat.size());
    }
    return out;
  }

  void backward(const std::vector<const TensorT<Scalar>*>& in,
                const TensorT<Scalar>&, const TensorT<Scalar>& out_grad,
                const std::vector<TensorT<Scalar>*>& in_grads) override {
    const auto w = in[1]->matrix();
    const Index n = in[0]->matrix().rows();
    const Index oh = s_.out_height(), ow = s_.out_width();
    const auto g = out_grad.matrix();
    MatrixX<Scalar> dcols(s_.in_channels * s_.ksize * s_.ksize, oh * ow);
    for (Index i = 0; i < n; ++i) {
      const Eigen::Map<const MatrixX<Scalar>> gmat(g.row(i).data(),
                                                   s_.out_channels, oh * ow);
      const auto& cols = cols_[static_cast<std::size_t>(i)];
      if (in_grads[1]) in_grads[1]->matrix().noalias() += gmat * cols.transpose();
      if (in_grads[2]) {
        in_grads[2]->matrix().row(0) += gmat.rowwise().sum().transpose();
      }
      if (in_grads[0]) {
        dcols.noalias() = w.transpose() * gmat;
        col2im_add(dcols, in_grads[0]->matrix().row(i).data());
      }
    }
  }

 private:
  void im2col(const Scalar* x, MatrixX<Scalar>& cols) const {
    const Index k = s_.ksize, oh = s_.out_height(), ow = s_.out_width();
    for (Index c = 0; c < s_.in_channels; ++c) {
      for (Index ki = 0; ki < k; ++ki) {
        for (Index kj = 0; kj < k; ++kj) {
          const Index row = (c * k + ki) * k + kj;
          for (Index oy = 0; oy < oh; ++oy) {
            const Index yy = oy * s_.stride - s_.pad + ki;
            for (Index ox = 0; ox < ow; ++ox) {
              const Index xx = ox * s_.stride - s_.pad + kj;
              const bool inside =
                  yy >= 0 && yy < s_.height && xx >= 0 && xx < s_.width;
              cols(row, oy * ow + ox) =
                  inside ? x[(c * s_.height + yy) * s_.width + xx] : Scalar(0);
            }
          }
        }
      }
    }
  }

  void col2im_add(const MatrixX<Scalar>& dcols, Scalar* dx) const {
    const Index k = s_.ksize, oh = s_.out_height(), ow = s_.out_width();
    for (Index c = 0; c < s_.in_channels; ++c) {
      for (Index ki = 0; ki < k; ++ki) {
        for (Index kj = 0; kj < k; ++kj) {
          const Index row = (c * k + ki) * k + kj;
          for (Index oy = 0; oy < oh; ++oy) {
            const Index yy = oy * s_.stride - s_.pad + ki;
            if (yy < 0 || yy >= s_.height) continue;
            for (Index ox = 0; ox < ow; ++ox) {
              const Index xx = ox * s_.stride - s_.pad + kj;
              if (xx < 0 || xx >= s_.width) continue;
              dx[(c * s_.height + yy) * s_.width + xx] += dcols(row, oy * ow + ox);
            }
          }
        }
      }
    }
  }

  Conv2dShape s_;
  std::vector<MatrixX<Scalar>> cols_;
};

template <typename Scalar>
NodeRef conv2d(GraphT<Scalar>& g, NodeRef input, NodeRef weight, NodeRef bias,
               const Conv2dShape& s) {
  detail::require_rank2(g, input, "conv2d");
  if (s.in_channels <= 0 || s.height <= 0 || s.width <= 0 ||
      s.out_channels <= 0 || s.ksize <= 0 || s.stride <= 0 || s.pad < 0) {
    throw ShapeError("conv2d: invalid geometry");
  }
  if ((s.height + 2 * s.pad - s.ksize) % s.stride != 0 ||
      (s.width + 2 * s.pad - s.ksize) % s.stride != 0 ||
      s.height + 2 * s.pad < s.ksize || s.width + 2 * s.pad < s.ksize) {
    throw ShapeError("conv2d: kernel/stride/pad do not tile the input");
  }
  const std::vector<Index> want_in = {g.shape(input)[0],
                                      s.in_channels * s.height * s.width};
  if (g.shape(input) != want_in) {
    throw ShapeError("conv2d: input '" + g.label(input) + "' has shape " +
                     shape_string(g.shape(input)) + ", expected " +
                     shape_string(want_in));
  }
  const std::vector<Index> want_w = {s.out_channels,
                                     s.in_channels * s.ksize * s.ksize};
  if (g.shape(weight) != want_w) {
    throw ShapeError("conv2d: weight '" + g.label(weight) + "' has shape " +
                     shape_string(g.shape(weight)) + ", expected " +
                     shape_string(want_w));
  }
  const std::vector<Index> want_b = {Index(1), s.out_channels};
  if (g.shape(bias) != want_b) {
    throw ShapeError("conv2d: bias '" + g.label(bias) + "' has shape " +
                     shape_string(g.shape(bias)) + ", expected " +
                     shape_string(want_b));
  }
  return g.apply(std::make_unique<Conv2dOp<Scalar>>(s), {input, weight, bias},
                 {g.shape(input)[0], s.out_channels * s.out_height() * s.out_width()});
}

// --- pooling -------------------------------------------------------------------------------

/// 2x2 stride-2 average pooling over channel-major rows.
template <typename Scalar>
class AvgPool2Op final : public OpT<Scalar> {
 public:
  AvgPool2Op(Index channels, Index height, Index width)
      : c_(channels), h_(height), w_(width) {}

  std::string_view kind() const override { return "avg_pool2"; }

  TensorT<Scalar> forward(const std::vector<const TensorT<Scalar>*>& in) override {
    const auto x = in[0]->matrix();
    const Index oh = h_ / 2, ow = w_ / 2;
    TensorT<Scalar> out({x.rows(), c_ * oh * ow});
    auto y = out.matrix();
    for (Index i = 0; i < x.rows(); ++i) {
      const Scalar* px = x.row(i).data();
      Scalar* py = y.row(i).data();
      for (Index c = 0; c < c_; ++c) {
        for (Index oy = 0; oy < oh; ++oy) {
          for (Index ox = 0; ox < ow; ++ox) {
            const Index base = (c * h_ + 2 * oy) * w_ + 2 * ox;
            py[(c * oh + oy) * ow + ox] =
                (px[base] + px[base + 1] + px[base + w_] + px[base + w_ + 1]) /
                Scalar(4);
          }
        }
      }
    }
    return out;
  }

  void backward(const std::vector<const TensorT<Scalar>*>&,
                const TensorT<Scalar>&, const TensorT<Scalar>& out_grad,
                const std::vector<TensorT<Scalar>*>& in_grads) override {
    if (!in_grads[0]) return;
    const auto g = out_grad.matrix();
    auto gin = in_grads[0]->matrix();
    const Index oh = h_ / 2, ow = w_ / 2;
    for (Index i = 0; i < g.rows(); ++i) {
      const Scalar* pg = g.row(i).data();
      Scalar* pin = gin.row(i).data();
      for (Index c = 0; c < c_; ++c) {
        for (Index oy = 0; oy < oh; ++oy) {
          for (Index ox = 0; ox < ow; ++ox) {
            const Scalar v = pg[(c * oh + oy) * ow + ox] / Scalar(4);
            const Index base = (c * h_ + 2 * oy) * w_ + 2 * ox;
            pin[base] += v;
            pin[base + 1] += v;
            pin[base + w_] += v;
            pin[base + w_ + 1] += v;
          }
        }
      }
    }
  }

 private:
  Index c_, h_, w_;
};

template <typename Scalar>
NodeRef avg_pool2(GraphT<Scalar>& g, NodeRef input, Index channels, Index height,
                  Index width) {
  detail::require_rank2(g, input, "avg_pool2");
  if (height % 2 != 0 || width % 2 != 0) {
    throw ShapeError("avg_pool2: spatial dims must be even");
  }
  const std::vector<Index> want = {g.shape(input)[0], channels * height * width};
  if (g.shape(input) != want) {
    throw ShapeError("avg_pool2: input '" + g.label(input) + "' has shape " +
                     shape_string(g.shape(input)) + ", expected " +
                     shape_string(want));
  }
  return g.apply(std::make_unique<AvgPool2Op<Scalar>>(channels, height, width),
                 {input}, {g.shape(input)[0], channels * (height / 2) * (width / 2)});
}

template <typename Scalar>
class GlobalAvgPoolOp final : public OpT<Scalar> {
 public:
  GlobalAvgPoolOp(Index channels, Index height, Index width)
      : c_(channels), h_(height), w_(width) {}

  std::string_view kind() const override { return "global_avg_pool"; }

  TensorT<Scalar> forward(const std::vector<const TensorT<Scalar>*>& in) override {
    const auto x = in[0]->matrix();
    TensorT<Scalar> out({x.rows(), c_});
    auto y = out.matrix();
    const Index hw = h_ * w_;
    for (Index i = 0; i < x.rows(); ++i) {
      for (Index c = 0; c < c_; ++c) {
        y(i, c) = x.row(i).segment(c * hw, hw).sum() / static_cast<Scalar>(hw);
      }
    }
    return out;
  }

  void backward(const std::vector<const TensorT<Scalar>*>&,
                const TensorT<Scalar>&, const TensorT<Scalar>& out_grad,
                const std::vector<TensorT<Scalar>*>& in_grads) override {
    if (!in_grads[0]) return;
    const auto g = out_grad.matrix();
    auto gin = in_grads[0]->matrix();
    const Index hw = h_ * w_;
    for (Index i = 0; i < g.rows(); ++i) {
      for (Index c = 0; c < c_; ++c) {
        gin.row(i).segment(c * hw, hw).array() +=
            g(i, c) / static_cast<Scalar>(hw);
      }
    }
  }

 private:
  Index c_, h_, w_;
};

template <typename Scalar>
NodeRef global_avg_pool(GraphT<Scalar>& g, NodeRef input, Index channels,
                        Index height, Index width) {
  detail::require_rank2(g, input, "global_avg_pool");
  const std::vector<Index> want = {g.shape(input)[0], channels * height * width};
  if (g.shape(input) != want) {
    throw ShapeError("global_avg_pool: input '" + g.label(input) +
                     "' has shape " + shape_string(g.shape(input)) +
                     ", expected " + shape_string(want));
  }
  return g.apply(std::make_unique<GlobalAvgPoolOp<Scalar>>(channels, height, width),
                 {input}, {g.shape(input)[0], channels});
}

}  // namespace rankmatch::ad

#endif  // RANKMATCH_AD_OPS_HPP_
