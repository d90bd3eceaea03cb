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
#ifndef RANKMATCH_AD_TENSOR_HPP_
#define RANKMATCH_AD_TENSOR_HPP_

#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rankmatch/core/error.hpp"
#include "rankmatch/core/types.hpp"

namespace rankmatch::ad {

inline std::string shape_string(const std::vector<Index>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

/// Dense value with shape, flat row-major storage, and an optional same-shape
/// gradient slot. Everything in the engine is rank 1 or rank 2; samples are
/// rows and a scalar is a 1x1 tensor.
template <typename Scalar>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<Index> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(element_count(shape_)), Scalar(0));
  }

  TensorT(std::vector<Index> shape, std::vector<Scalar> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<Index>(data_.size()) != element_count(shape_)) {
      throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  static TensorT scalar(Scalar v) { return TensorT({1, 1}, {v}); }

  static TensorT from_matrix(const MatrixX<Scalar>& m) {
    TensorT t({m.rows(), m.cols()});
    t.matrix() = m;
    return t;
  }

  const std::vector<Index>& shape() const { return shape_; }
  Index ndim() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return static_cast<Index>(data_.size()); }
  Index rows() const { return shape_.empty() ? 0 : shape_[0]; }
  Index cols() const { return ndim() < 2 ? (ndim() == 1 ? 1 : 0) : shape_[1]; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
  Scalar operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }

  /// Value of a 1x1 tensor.
  Scalar value() const {
    if (size() != 1) {
      throw ShapeError("value() on non-scalar tensor of shape " +
                       shape_string(shape_));
    }
    return data_[0];
  }

  Eigen::Map<MatrixX<Scalar>> matrix() {
    require_rank2("matrix()");
    return {data_.data(), shape_[0], shape_[1]};
  }
  Eigen::Map<const MatrixX<Scalar>> matrix() const {
    require_rank2("matrix()");
    return {data_.data(), shape_[0], shape_[1]};
  }

  Eigen::Map<VectorX<Scalar>> flat() {
    return {data_.data(), static_cast<Index>(data_.size())};
  }
  Eigen::Map<const VectorX<Scalar>> flat() const {
    return {data_.data(), static_cast<Index>(data_.size())};
  }

  bool shape_equals(const TensorT& other) const {
    return shape_ == other.shape_;
  }

  bool all_finite() const {
    for (const Scalar v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  // --- gradient slot -------------------------------------------------------

  bool has_grad() const { return grad_.has_value(); }

  void zero_grad() {
    grad_.emplace(data_.size(), Scalar(0));
  }

  void drop_grad() { grad_.reset(); }

  void set_grad(std::vector<Scalar> g) {
    if (g.size() != data_.size()) {
      throw ShapeError("gradient size does not match tensor shape " +
                       shape_string(shape_));
    }
    grad_ = std::move(g);
  }

  Eigen::Map<VectorX<Scalar>> grad_flat() {
    require_grad();
    return {grad_->data(), static_cast<Index>(grad_->size())};
  }
  Eigen::Map<const VectorX<Scalar>> grad_flat() const {
    require_grad();
    return {grad_->data(), static_cast<Index>(grad_->size())};
  }

  Eigen::Map<MatrixX<Scalar>> grad_matrix() {
    require_grad();
    require_rank2("grad_matrix()");
    return {grad_->data(), shape_[0], shape_[1]};
  }
  Eigen::Map<const MatrixX<Scalar>> grad_matrix() const {
    require_grad();
    require_rank2("grad_matrix()");
    return {grad_->data(), shape_[0], shape_[1]};
  }

  /// Gradient copied out as a tensor of the same shape.
  TensorT grad_tensor() const {
    require_grad();
    return TensorT(shape_, *grad_);
  }

  static Index element_count(const std::vector<Index>& shape) {
    Index n = 1;
    for (const Index d : shape) {
      if (d < 0) throw ShapeError("negative dimension in " + shape_string(shape));
      n *= d;
    }
    return shape.empty() ? 0 : n;
  }

 private:
  void require_rank2(const char* what) const {
    if (ndim() != 2) {
      throw ShapeError(std::string(what) + " requires a rank-2 tensor, got " +
                       shape_string(shape_));
    }
  }
  void require_grad() const {
    if (!grad_) throw Error("tensor gradient accessed before backward");
  }

  std::vector<Index> shape_;
  std::vector<Scalar> data_;
  std::optional<std::vector<Scalar>> grad_;
};

using Tensor = TensorT<Real>;

}  // namespace rankmatch::ad

#endif  // RANKMATCH_AD_TENSOR_HPP_
