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
#ifndef RANKMATCH_OPTIM_HPP_
#define RANKMATCH_OPTIM_HPP_

#include <string>
#include <vector>

#include "rankmatch/core/error.hpp"
#include "rankmatch/core/types.hpp"
#include "rankmatch/model.hpp"

namespace rankmatch {

/// Half-cosine decay: lr(s) = base * cos(7*pi*s / (16*total)). Reaches
/// cos(7pi/16) of base at the final step, never zero.
Real cosine_lr(Real base_lr, Index step, Index total_steps);

struct OptimConfig {
  Real base_lr = 0.03;
  Real momentum = 0.9;
  Real weight_decay = 0.0005;
  bool nesterov = true;

  void validate() const {
    if (base_lr <= 0) throw ConfigError("optim: base_lr must be positive");
    if (momentum < 0 || momentum >= 1)
      throw ConfigError("optim: momentum must be in [0, 1)");
    if (weight_decay < 0)
      throw ConfigError("optim: weight_decay must be non-negative");
  }
};

/// SGD with Nesterov momentum and coupled weight decay. Per parameter:
///   g = grad + weight_decay * theta
///   v = momentum * v + g
///   theta -= lr * (g + momentum * v)      (nesterov)
///   theta -= lr * v                        (plain momentum)
/// Velocity buffers are zero-initialized and keyed by parameter order.
class SgdNesterov {
 public:
  explicit SgdNesterov(OptimConfig cfg);

  /// Applies one update. grads must align 1:1 with params.values; any
  /// non-finite gradient entry raises NumericError naming the parameter.
  void step(ModelParams& params, const std::vector<ad::Tensor>& grads, Real lr);

  const std::vector<ad::Tensor>& velocity() const { return velocity_; }
  const OptimConfig& config() const { return cfg_; }

 private:
  OptimConfig cfg_;
  std::vector<ad::Tensor> velocity_;
};

/// Exponential moving average of parameters:
///   shadow = decay * shadow + (1 - decay) * value
/// Initialized to a copy of the first update's parameters scaled into the
/// same recurrence (shadow starts at the initial params).
class EmaAverager {
 public:
  explicit EmaAverager(Real decay = 0.999);

  void update(const ModelParams& params);
  bool initialized() const { return initialized_; }
  const ModelParams& shadow() const;
  Real decay() const { return decay_; }

 private:
  Real decay_;
  bool initialized_ = false;
  ModelParams shadow_;
};

}  // namespace rankmatch

#endif  // RANKMATCH_OPTIM_HPP_
