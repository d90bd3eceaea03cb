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
#ifndef RANKMATCH_AD_GRAD_CHECK_HPP_
#define RANKMATCH_AD_GRAD_CHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>

#include "rankmatch/ad/tensor.hpp"
#include "rankmatch/core/error.hpp"

namespace rankmatch::ad {

/// Central-difference gradient check for a scalar-valued function.
/// Returns max over coordinates of
///   |analytic_i - central_i| / max(|analytic_i|, |central_i|, 1e-12).
/// `analytic` is the gradient of f at x computed by the caller (normally via
/// a graph backward pass). Non-finite function values raise NumericError.
template <typename Scalar>
Scalar finite_difference_check(
    const std::function<Scalar(const TensorT<Scalar>&)>& f,
    const TensorT<Scalar>& x, const TensorT<Scalar>& analytic, Scalar step) {
  if (!x.shape_equals(analytic)) {
    throw ShapeError("finite_difference_check: analytic gradient shape " +
                     shape_string(analytic.shape()) + " does not match x " +
                     shape_string(x.shape()));
  }
  if (!(step > Scalar(0))) {
    throw Error("finite_difference_check: step must be positive");
  }
  TensorT<Scalar> probe = x;
  Scalar worst(0);
  for (Index i = 0; i < x.size(); ++i) {
    const Scalar keep = probe[i];
    probe[i] = keep + step;
    const Scalar hi = f(probe);
    probe[i] = keep - step;
    const Scalar lo = f(probe);
    probe[i] = keep;
    if (!std::isfinite(static_cast<double>(hi)) ||
        !std::isfinite(static_cast<double>(lo))) {
      throw NumericError("finite_difference_check: non-finite value at "
                         "coordinate " +
                         std::to_string(static_cast<long long>(i)));
    }
    const Scalar central = (hi - lo) / (Scalar(2) * step);
    const Scalar denom = std::max(
        {std::abs(analytic[i]), std::abs(central), Scalar(1e-12)});
    worst = std::max(worst, std::abs(analytic[i] - central) / denom);
  }
  return worst;
}

}  // namespace rankmatch::ad

#endif  // RANKMATCH_AD_GRAD_CHECK_HPP_
