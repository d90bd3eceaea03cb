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
#ifndef RANKMATCH_CORE_ERROR_HPP_
#define RANKMATCH_CORE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace rankmatch {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor/operator shape violations; the message names the offending node.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (bad key, value out of range, inconsistent setup).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed external data (dataset files, checkpoints, CSV artifacts).
class DataFormatError : public Error {
 public:
  using Error::Error;
};

/// Numeric failures: non-finite values, zero-norm rows, degenerate inputs.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace rankmatch

#endif  // RANKMATCH_CORE_ERROR_HPP_
