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
#ifndef RANKMATCH_CHECKPOINT_HPP_
#define RANKMATCH_CHECKPOINT_HPP_

#include <string>

#include "rankmatch/model.hpp"

namespace rankmatch {

/// Binary checkpoint: magic "RMCKPT01", little-endian u32 tensor count, then
/// per tensor {u32 name length, name bytes, u32 rows, u32 cols, rows*cols f64
/// little-endian}. save overwrites; load validates magic, counts, and sizes
/// and throws DataFormatError with the byte offset on any mismatch.
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace rankmatch

#endif  // RANKMATCH_CHECKPOINT_HPP_
