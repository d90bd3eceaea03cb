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
#include "rankmatch/optim.hpp"

#include <cmath>
#include <cstddef>

namespace rankmatch {

Real cosine_lr(Real base_lr, Index step, Index total_steps) {
  if (total_steps <= 0) throw ConfigError("cosine_lr: total_steps must be positive");
  if (step < 0 || step > total_steps) {
    throw ConfigError("cosine_lr: step " + std::to_string(step) +
                      " outside [0, " + std::to_string(total_steps) + "]");
  }
  constexpr Real kPi = Real(3.14159265358979323846L);
  const Real frac = static_cast<Real>(step) / static_cast<Real>(total_steps);
  return base_lr * std::cos(Real(7) * kPi * frac / Real(16));
}

SgdNesterov::SgdNesterov(OptimConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void SgdNesterov::step(ModelParams& params, const std::vector<ad::Tensor>& grads,
                       Real lr) {
  if (grads.size() != params.values.size()) {
    throw ShapeError("optim step: " + std::to_string(grads.size()) +
                     " gradients for " + std::to_string(params.values.size()) +
                     " parameters");
  }
  if (velocity_.empty()) {
    velocity_.reserve(params.values.size());
    for (const auto& t : params.values) velocity_.emplace_back(t.shape());
  } else if (velocity_.size() != params.values.size()) {
    throw ShapeError("optim step: parameter count changed mid-run");
  }
  if (!(lr > 0) || !std::isfinite(lr)) {
    throw ConfigError("optim step: learning rate must be finite and positive");
  }
  const Real mu = cfg_.momentum;
  const Real wd = cfg_.weight_decay;
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    ad::Tensor& theta = params.values[i];
    const ad::Tensor& grad = grads[i];
    ad::Tensor& vel = velocity_[i];
    if (!grad.shape_equals(theta)) {
      throw ShapeError("optim step: gradient shape mismatch for parameter '" +
                       params.names[i] + "'");
    }
    if (!grad.all_finite()) {
      throw NumericError("optim step: non-finite gradient for parameter '" +
                         params.names[i] + "'");
    }
    for (Index j = 0; j < theta.size(); ++j) {
      const Real g = grad.data()[j] + wd * theta.data()[j];
      const Real v = mu * vel.data()[j] + g;
      vel.data()[j] = v;
      theta.data()[j] -= cfg_.nesterov ? lr * (g + mu * v) : lr * v;
    }
  }
}

EmaAverager::EmaAverager(Real decay) : decay_(decay) {
  if (decay < 0 || decay >= 1) throw ConfigError("ema: decay must be in [0, 1)");
}

void EmaAverager::update(const ModelParams& params) {
  if (!initialized_) {
    shadow_.names = params.names;
    shadow_.values = params.values;
    initialized_ = true;
    return;
  }
  if (shadow_.values.size() != params.values.size()) {
    throw ShapeError("ema: parameter count changed mid-run");
  }
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    ad::Tensor& s = shadow_.values[i];
    const ad::Tensor& v = params.values[i];
    if (!v.shape_equals(s)) {
      throw ShapeError("ema: shape mismatch for parameter '" + params.names[i] + "'");
    }
    for (Index j = 0; j < s.size(); ++j) {
      s.data()[j] = decay_ * s.data()[j] + (Real(1) - decay_) * v.data()[j];
    }
  }
}

const ModelParams& EmaAverager::shadow() const {
  if (!initialized_) throw Error("ema: shadow read before any update");
  return shadow_;
}

}  // namespace rankmatch
