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
#ifndef RANKMATCH_MODEL_HPP_
#define RANKMATCH_MODEL_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rankmatch/ad/graph.hpp"
#include "rankmatch/ad/ops.hpp"
#include "rankmatch/core/error.hpp"
#include "rankmatch/core/types.hpp"

namespace rankmatch {

enum class ModelKind { kMlp, kMiniConv };

/// Architecture description. The MLP maps flat vectors through ReLU hidden
/// layers; representation = last hidden activation. The mini conv net runs
/// 3x3 conv blocks (conv -> ReLU -> 2x2 average pool) and a global average
/// pool; representation = pooled channel vector. Both end in a linear head.
struct ModelSpec {
  ModelKind kind = ModelKind::kMlp;
  int num_classes = 10;

  // kMlp
  Index input_dim = 16;
  std::vector<Index> hidden_sizes = {64, 64};

  // kMiniConv
  Index in_channels = 3;
  Index image_height = 32;
  Index image_width = 32;
  std::vector<Index> conv_channels = {8, 16, 32};

  void validate() const;
  Index input_size() const;
  Index representation_size() const;
};

/// Named parameter tensors in a fixed order (the optimizer state and the
/// checkpoint format both align with this order).
struct ModelParams {
  std::vector<std::string> names;
  std::vector<ad::Tensor> values;

  Index parameter_count() const {
    Index n = 0;
    for (const auto& t : values) n += t.size();
    return n;
  }

  Index find(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return static_cast<Index>(i);
    }
    return -1;
  }
};

/// He-normal weights (std = sqrt(2 / fan_in)), zero biases; deterministic in
/// the seed.
ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);

struct ModelForward {
  ad::NodeRef representation;
  ad::NodeRef logits;
};

class Model {
 public:
  explicit Model(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }

  /// Declares one graph input per parameter (bound immediately) and returns
  /// the refs in ModelParams order.
  std::vector<ad::NodeRef> declare_params(ad::Graph& g, const ModelParams& params,
                                          bool requires_grad,
                                          const std::string& prefix = "") const;

  /// Builds the forward graph from `input` using the declared param nodes.
  ModelForward forward(ad::Graph& g, ad::NodeRef input,
                       const std::vector<ad::NodeRef>& params) const;

  /// Gradient-free inference; returns (representation, logits) values.
  std::pair<MatrixXr, MatrixXr> forward_values(const ModelParams& params,
                                               const MatrixXr& inputs) const;

 private:
  ModelSpec spec_;
};

}  // namespace rankmatch

#endif  // RANKMATCH_MODEL_HPP_
