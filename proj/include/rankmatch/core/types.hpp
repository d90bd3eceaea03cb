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
#ifndef RANKMATCH_CORE_TYPES_HPP_
#define RANKMATCH_CORE_TYPES_HPP_

#include <Eigen/Core>

namespace rankmatch {

/// Scalar used by the compiled engine. The templated core (ad::, loss::)
/// works for float or double; the app layer is built against Real.
#if defined(RANKMATCH_FLOAT32)
using Real = float;
#else
using Real = double;
#endif

using Index = Eigen::Index;

/// Dense row-major matrix; rows are samples throughout the engine.
template <typename Scalar>
using MatrixX =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXr = MatrixX<Real>;
using VectorXr = VectorX<Real>;

}  // namespace rankmatch

#endif  // RANKMATCH_CORE_TYPES_HPP_
