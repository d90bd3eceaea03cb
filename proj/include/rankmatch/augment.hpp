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
#ifndef RANKMATCH_AUGMENT_HPP_
#define RANKMATCH_AUGMENT_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rankmatch/core/error.hpp"
#include "rankmatch/core/rng.hpp"
#include "rankmatch/core/types.hpp"

namespace rankmatch {

/// Channel-major (c, y, x) image with pixel values in [0, 1].
struct ImageTensor {
  Index channels = 0;
  Index height = 0;
  Index width = 0;
  std::vector<Real> pixels;

  ImageTensor() = default;
  ImageTensor(Index c, Index h, Index w)
      : channels(c), height(h), width(w),
        pixels(static_cast<std::size_t>(c * h * w), Real(0)) {}

  Real& at(Index c, Index y, Index x) {
    return pixels[static_cast<std::size_t>((c * height + y) * width + x)];
  }
  Real at(Index c, Index y, Index x) const {
    return pixels[static_cast<std::size_t>((c * height + y) * width + x)];
  }
  Index size() const { return channels * height * width; }
};

/// The strong-augmentation pool. Geometric transforms resample with bilinear
/// interpolation and zero fill; enhancement transforms blend against a
/// degenerate image (the usual convention: factor 1 is identity). Exact
/// fidelity to any particular image library is a non-goal; the semantics of
/// each transform are documented at its implementation.
enum class TransformId {
  kAutocontrast,
  kBrightness,
  kColor,
  kContrast,
  kEqualize,
  kIdentity,
  kPosterize,
  kRotate,
  kSharpness,
  kShearX,
  kShearY,
  kSolarize,
  kTranslateX,
  kTranslateY,
};

struct TransformRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct TransformInfo {
  TransformId id;
  std::string_view name;
  TransformRange range;  // magnitude sampling range for strong augmentation
};

/// All 14 transforms with their default magnitude ranges.
const std::vector<TransformInfo>& transform_registry();

/// Name lookup; unregistered names raise ConfigError.
TransformId transform_from_name(std::string_view name);
std::string_view transform_name(TransformId id);
TransformRange transform_range(TransformId id);

/// Applies one transform at the given magnitude. rng is part of the
/// interface for forward-compatible stochastic transforms; the current 14
/// are deterministic given (image, magnitude).
ImageTensor apply_transform(TransformId id, const ImageTensor& img,
                            double magnitude, Rng& rng);

struct ImageAugmentPolicy {
  Index pad = 4;               // weak: reflect-pad then random crop
  bool reflect_pad = true;     // false: zero padding
  bool horizontal_flip = true; // weak: flip with probability 1/2
  int strong_transform_count = 2;
  Index cutout_size = 16;      // strong: square cutout; 0 disables
  double cutout_fill = 0.5;
  std::vector<TransformId> strong_pool;  // empty: all 14

  void validate(Index height, Index width) const;
};

/// Weak policy: pad -> random crop -> optional horizontal flip.
ImageTensor weak_augment(const ImageTensor& img, const ImageAugmentPolicy& policy,
                         Rng& rng);

/// Strong policy: `strong_transform_count` distinct transforms drawn from the
/// pool with uniform magnitudes, then cutout filled with gray.
ImageTensor strong_augment(const ImageTensor& img,
                           const ImageAugmentPolicy& policy, Rng& rng);

/// Vector-data analog used for desk-scale synthetic runs.
struct VectorAugmentParams {
  double sigma_weak = 0.05;    // weak: additive Gaussian noise
  double sigma_strong = 0.2;   // strong: heavier noise ...
  double drop_fraction = 0.25; // ... plus zeroing a fraction of coordinates

  void validate() const;
};

VectorXr vector_weak_augment(const VectorXr& sample,
                             const VectorAugmentParams& params, Rng& rng);
VectorXr vector_strong_augment(const VectorXr& sample,
                               const VectorAugmentParams& params, Rng& rng);

/// Batch-level augmentation interface. Each row is augmented from an
/// independent stream derived from (stream_seed, row index), so outputs do
/// not depend on processing order and whole branches replay exactly from one
/// seed.
class Augmenter {
 public:
  virtual ~Augmenter() = default;
  virtual MatrixXr weak(const MatrixXr& samples,
                        std::uint64_t stream_seed) const = 0;
  virtual MatrixXr strong(const MatrixXr& samples,
                          std::uint64_t stream_seed) const = 0;
};

class NoAugmenter final : public Augmenter {
 public:
  MatrixXr weak(const MatrixXr& samples, std::uint64_t) const override {
    return samples;
  }
  MatrixXr strong(const MatrixXr& samples, std::uint64_t) const override {
    return samples;
  }
};

class VectorAugmenter final : public Augmenter {
 public:
  explicit VectorAugmenter(VectorAugmentParams params);
  MatrixXr weak(const MatrixXr& samples, std::uint64_t seed) const override;
  MatrixXr strong(const MatrixXr& samples, std::uint64_t seed) const override;

 private:
  VectorAugmentParams params_;
};

class ImageAugmenter final : public Augmenter {
 public:
  ImageAugmenter(Index channels, Index height, Index width,
                 ImageAugmentPolicy policy);
  MatrixXr weak(const MatrixXr& samples, std::uint64_t seed) const override;
  MatrixXr strong(const MatrixXr& samples, std::uint64_t seed) const override;

 private:
  ImageTensor to_image(const MatrixXr& samples, Index row) const;
  Index channels_, height_, width_;
  ImageAugmentPolicy policy_;
};

}  // namespace rankmatch

#endif  // RANKMATCH_AUGMENT_HPP_
