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
#include "rankmatch/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace rankmatch {

namespace {

Real clamp01(Real v) { return std::clamp(v, Real(0), Real(1)); }

/// Per-pixel luma for 3-channel images; channel mean otherwise.
Real luma_at(const ImageTensor& img, Index y, Index x) {
  if (img.channels == 3) {
    return Real(0.299) * img.at(0, y, x) + Real(0.587) * img.at(1, y, x) +
           Real(0.114) * img.at(2, y, x);
  }
  Real acc(0);
  for (Index c = 0; c < img.channels; ++c) acc += img.at(c, y, x);
  return acc / static_cast<Real>(img.channels);
}

/// Bilinear sample at float coords (y, x) with zero outside the image.
Real sample_bilinear(const ImageTensor& img, Index c, double y, double x) {
  const auto y0 = static_cast<Index>(std::floor(y));
  const auto x0 = static_cast<Index>(std::floor(x));
  const double fy = y - static_cast<double>(y0);
  const double fx = x - static_cast<double>(x0);
  Real acc(0);
  for (int dy = 0; dy < 2; ++dy) {
    for (int dx = 0; dx < 2; ++dx) {
      const Index yy = y0 + dy;
      const Index xx = x0 + dx;
      if (yy < 0 || yy >= img.height || xx < 0 || xx >= img.width) continue;
      const double w = (dy ? fy : 1.0 - fy) * (dx ? fx : 1.0 - fx);
      acc += static_cast<Real>(w) * img.at(c, yy, xx);
    }
  }
  return acc;
}

/// Inverse-maps every output pixel through the 2x2 matrix `inv` (plus a
/// translation) about the image center.
ImageTensor affine_inverse(const ImageTensor& img, const std::array<double, 4>& inv,
                           double shift_y, double shift_x) {
  ImageTensor out(img.channels, img.height, img.width);
  const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
  for (Index y = 0; y < img.height; ++y) {
    for (Index x = 0; x < img.width; ++x) {
      const double ry = static_cast<double>(y) - cy - shift_y;
      const double rx = static_cast<double>(x) - cx - shift_x;
      const double sy = inv[0] * ry + inv[1] * rx + cy;
      const double sx = inv[2] * ry + inv[3] * rx + cx;
      for (Index c = 0; c < img.channels; ++c) {
        out.at(c, y, x) = sample_bilinear(img, c, sy, sx);
      }
    }
  }
  return out;
}

ImageTensor autocontrast(const ImageTensor& img) {
  ImageTensor out = img;
  for (Index c = 0; c < img.channels; ++c) {
    Real lo = img.at(c, 0, 0), hi = lo;
    for (Index y = 0; y < img.height; ++y) {
      for (Index x = 0; x < img.width; ++x) {
        lo = std::min(lo, img.at(c, y, x));
        hi = std::max(hi, img.at(c, y, x));
      }
    }
    if (hi <= lo) continue;
    const Real inv = Real(1) / (hi - lo);
    for (Index y = 0; y < img.height; ++y) {
      for (Index x = 0; x < img.width; ++x) {
        out.at(c, y, x) = (img.at(c, y, x) - lo) * inv;
      }
    }
  }
  return out;
}

/// Histogram equalization on the 8-bit quantization of each channel;
/// lut(v) = 255 * (cdf(v) - cdf_min) / (count - cdf_min).
ImageTensor equalize(const ImageTensor& img) {
  ImageTensor out = img;
  const Index count = img.height * img.width;
  std::array<std::int64_t, 256> hist{};
  for (Index c = 0; c < img.channels; ++c) {
    hist.fill(0);
    for (Index y = 0; y < img.height; ++y) {
      for (Index x = 0; x < img.width; ++x) {
        const int v = std::clamp(
            static_cast<int>(std::lround(img.at(c, y, x) * Real(255))), 0, 255);
        ++hist[static_cast<std::size_t>(v)];
      }
    }
    std::array<std::int64_t, 256> cdf{};
    std::int64_t run = 0;
    std::int64_t cdf_min = -1;
    for (int v = 0; v < 256; ++v) {
      run += hist[static_cast<std::size_t>(v)];
      cdf[static_cast<std::size_t>(v)] = run;
      if (cdf_min < 0 && run > 0) cdf_min = run;
    }
    if (cdf_min < 0 || cdf_min == count) continue;  // empty or flat channel
    for (Index y = 0; y < img.height; ++y) {
      for (Index x = 0; x < img.width; ++x) {
        const int v = std::clamp(
            static_cast<int>(std::lround(img.at(c, y, x) * Real(255))), 0, 255);
        const double mapped =
            255.0 * static_cast<double>(cdf[static_cast<std::size_t>(v)] - cdf_min) /
            static_cast<double>(count - cdf_min);
        out.at(c, y, x) = static_cast<Real>(mapped / 255.0);
      }
    }
  }
  return out;
}

/// factor 1 keeps the image; factor 0 gives the degenerate image.
ImageTensor blend_with(const ImageTensor& img, const ImageTensor& degenerate,
                       double factor) {
  ImageTensor out(img.channels, img.height, img.width);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    out.pixels[i] = clamp01(static_cast<Real>(
        degenerate.pixels[i] +
        factor * (img.pixels[i] - degenerate.pixels[i])));
  }
  return out;
}

ImageTensor brightness(const ImageTensor& img, double factor) {
  ImageTensor black(img.channels, img.height, img.width);
  return blend_with(img, black, factor);
}

ImageTensor color(const ImageTensor& img, double factor) {
  if (img.channels != 3) return img;
  ImageTensor gray(img.channels, img.height, img.width);
  for (Index y = 0; y < img.height; ++y) {
    for (Index x = 0; x < img.width; ++x) {
      const Real g = luma_at(img, y, x);
      for (Index c = 0; c < 3; ++c) gray.at(c, y, x) = g;
    }
  }
  return blend_with(img, gray, factor);
}

ImageTensor contrast(const ImageTensor& img, double factor) {
  Real mean(0);
  for (Index y = 0; y < img.height; ++y) {
    for (Index x = 0; x < img.width; ++x) mean += luma_at(img, y, x);
  }
  mean /= static_cast<Real>(img.height * img.width);
  ImageTensor flat(img.channels, img.height, img.width);
  std::fill(flat.pixels.begin(), flat.pixels.end(), mean);
  return blend_with(img, flat, factor);
}

/// 3x3 smoothing kernel (center 5, neighbors 1, /13) with clamp-to-edge.
ImageTensor sharpness(const ImageTensor& img, double factor) {
  ImageTensor smooth(img.channels, img.height, img.width);
  for (Index c = 0; c < img.channels; ++c) {
    for (Index y = 0; y < img.height; ++y) {
      for (Index x = 0; x < img.width; ++x) {
        Real acc(0);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const Index yy = std::clamp<Index>(y + dy, 0, img.height - 1);
            const Index xx = std::clamp<Index>(x + dx, 0, img.width - 1);
            const Real w = (dy == 0 && dx == 0) ? Real(5) : Real(1);
            acc += w * img.at(c, yy, xx);
          }
        }
        smooth.at(c, y, x) = acc / Real(13);
      }
    }
  }
  return blend_with(img, smooth, factor);
}

ImageTensor posterize(const ImageTensor& img, int bits) {
  bits = std::clamp(bits, 1, 8);
  const int mask = 0xff & ~((1 << (8 - bits)) - 1);
  ImageTensor out(img.channels, img.height, img.width);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const int v = std::clamp(
        static_cast<int>(std::lround(img.pixels[i] * Real(255))), 0, 255);
    out.pixels[i] = static_cast<Real>(v & mask) / Real(255);
  }
  return out;
}

ImageTensor solarize(const ImageTensor& img, double threshold) {
  ImageTensor out = img;
  for (auto& v : out.pixels) {
    if (v > static_cast<Real>(threshold)) v = Real(1) - v;
  }
  return out;
}

ImageTensor rotate(const ImageTensor& img, double degrees) {
  const double rad = degrees * M_PI / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  // Inverse of a rotation is its transpose.
  return affine_inverse(img, {c, -s, s, c}, 0.0, 0.0);
}

ImageTensor shear_x(const ImageTensor& img, double s) {
  // Forward map x' = x + s*y; inverse subtracts.
  return affine_inverse(img, {1.0, 0.0, -s, 1.0}, 0.0, 0.0);
}

ImageTensor shear_y(const ImageTensor& img, double s) {
  return affine_inverse(img, {1.0, -s, 0.0, 1.0}, 0.0, 0.0);
}

ImageTensor translate_x(const ImageTensor& img, double frac) {
  return affine_inverse(img, {1.0, 0.0, 0.0, 1.0}, 0.0,
                        frac * static_cast<double>(img.width));
}

ImageTensor translate_y(const ImageTensor& img, double frac) {
  return affine_inverse(img, {1.0, 0.0, 0.0, 1.0},
                        frac * static_cast<double>(img.height), 0.0);
}

/// Reflected index without edge repetition (mirror about the border pixel).
Index reflect_index(Index t, Index dim) {
  while (t < 0 || t >= dim) {
    if (t < 0) t = -t;
    if (t >= dim) t = 2 * dim - 2 - t;
  }
  return t;
}

}  // namespace

const std::vector<TransformInfo>& transform_registry() {
  static const std::vector<TransformInfo> registry = {
      {TransformId::kAutocontrast, "Autocontrast", {0.0, 0.0}},
      {TransformId::kBrightness, "Brightness", {0.05, 1.95}},
      {TransformId::kColor, "Color", {0.05, 1.95}},
      {TransformId::kContrast, "Contrast", {0.05, 1.95}},
      {TransformId::kEqualize, "Equalize", {0.0, 0.0}},
      {TransformId::kIdentity, "Identity", {0.0, 0.0}},
      {TransformId::kPosterize, "Posterize", {4.0, 8.0}},
      {TransformId::kRotate, "Rotate", {-30.0, 30.0}},
      {TransformId::kSharpness, "Sharpness", {0.05, 1.95}},
      {TransformId::kShearX, "ShearX", {-0.3, 0.3}},
      {TransformId::kShearY, "ShearY", {-0.3, 0.3}},
      {TransformId::kSolarize, "Solarize", {0.0, 1.0}},
      {TransformId::kTranslateX, "TranslateX", {-0.3, 0.3}},
      {TransformId::kTranslateY, "TranslateY", {-0.3, 0.3}},
  };
  return registry;
}

TransformId transform_from_name(std::string_view name) {
  for (const auto& info : transform_registry()) {
    if (info.name == name) return info.id;
  }
  throw ConfigError("unregistered transform name '" + std::string(name) + "'");
}

std::string_view transform_name(TransformId id) {
  for (const auto& info : transform_registry()) {
    if (info.id == id) return info.name;
  }
  throw ConfigError("unknown transform id");
}

TransformRange transform_range(TransformId id) {
  for (const auto& info : transform_registry()) {
    if (info.id == id) return info.range;
  }
  throw ConfigError("unknown transform id");
}

ImageTensor apply_transform(TransformId id, const ImageTensor& img,
                            double magnitude, Rng&) {
  switch (id) {
    case TransformId::kAutocontrast:
      return autocontrast(img);
    case TransformId::kBrightness:
      return brightness(img, magnitude);
    case TransformId::kColor:
      return color(img, magnitude);
    case TransformId::kContrast:
      return contrast(img, magnitude);
    case TransformId::kEqualize:
      return equalize(img);
    case TransformId::kIdentity:
      return img;
    case TransformId::kPosterize:
      return posterize(img, static_cast<int>(std::lround(magnitude)));
    case TransformId::kRotate:
      return rotate(img, magnitude);
    case TransformId::kSharpness:
      return sharpness(img, magnitude);
    case TransformId::kShearX:
      return shear_x(img, magnitude);
    case TransformId::kShearY:
      return shear_y(img, magnitude);
    case TransformId::kSolarize:
      return solarize(img, magnitude);
    case TransformId::kTranslateX:
      return translate_x(img, magnitude);
    case TransformId::kTranslateY:
      return translate_y(img, magnitude);
  }
  throw ConfigError("unknown transform id");
}

void ImageAugmentPolicy::validate(Index height, Index width) const {
  if (pad < 0) throw ConfigError("augment: pad must be >= 0");
  if (pad >= height || pad >= width) {
    throw ConfigError("augment: pad " + std::to_string(pad) +
                      " exceeds image dimensions " + std::to_string(height) +
                      "x" + std::to_string(width));
  }
  if (cutout_size < 0) throw ConfigError("augment: cutout size must be >= 0");
  if (strong_transform_count < 0) {
    throw ConfigError("augment: strong transform count must be >= 0");
  }
  const std::size_t pool =
      strong_pool.empty() ? transform_registry().size() : strong_pool.size();
  if (static_cast<std::size_t>(strong_transform_count) > pool) {
    throw ConfigError("augment: cannot draw " +
                      std::to_string(strong_transform_count) +
                      " distinct transforms from a pool of " +
                      std::to_string(pool));
  }
  if (cutout_fill < 0.0 || cutout_fill > 1.0) {
    throw ConfigError("augment: cutout fill must be in [0, 1]");
  }
}

ImageTensor weak_augment(const ImageTensor& img, const ImageAugmentPolicy& policy,
                         Rng& rng) {
  policy.validate(img.height, img.width);
  ImageTensor out = img;
  if (policy.pad > 0) {
    const Index p = policy.pad;
    const Index dy = static_cast<Index>(rng.uniform_int(0, 2 * p));
    const Index dx = static_cast<Index>(rng.uniform_int(0, 2 * p));
    ImageTensor crop(img.channels, img.height, img.width);
    for (Index c = 0; c < img.channels; ++c) {
      for (Index y = 0; y < img.height; ++y) {
        const Index sy = y + dy - p;  // coordinate in the unpadded image
        for (Index x = 0; x < img.width; ++x) {
          const Index sx = x + dx - p;
          Real v(0);
          if (policy.reflect_pad) {
            v = img.at(c, reflect_index(sy, img.height),
                       reflect_index(sx, img.width));
          } else if (sy >= 0 && sy < img.height && sx >= 0 && sx < img.width) {
            v = img.at(c, sy, sx);
          }
          crop.at(c, y, x) = v;
        }
      }
    }
    out = std::move(crop);
  }
  if (policy.horizontal_flip && rng.bernoulli(0.5)) {
    ImageTensor flipped(out.channels, out.height, out.width);
    for (Index c = 0; c < out.channels; ++c) {
      for (Index y = 0; y < out.height; ++y) {
        for (Index x = 0; x < out.width; ++x) {
          flipped.at(c, y, x) = out.at(c, y, out.width - 1 - x);
        }
      }
    }
    out = std::move(flipped);
  }
  return out;
}

ImageTensor strong_augment(const ImageTensor& img,
                           const ImageAugmentPolicy& policy, Rng& rng) {
  policy.validate(img.height, img.width);
  std::vector<TransformId> pool = policy.strong_pool;
  if (pool.empty()) {
    for (const auto& info : transform_registry()) pool.push_back(info.id);
  }
  ImageTensor out = img;
  // Draw `strong_transform_count` distinct pool indices.
  std::vector<std::size_t> chosen;
  for (int k = 0; k < policy.strong_transform_count; ++k) {
    auto idx = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(pool.size() - chosen.size()) - 1));
    for (const std::size_t used : chosen) {
      if (idx >= used) ++idx;
    }
    chosen.push_back(idx);
    std::sort(chosen.begin(), chosen.end());
    const TransformId id = pool[idx];
    const TransformRange range = transform_range(id);
    const double magnitude = rng.uniform(range.lo, range.hi);
    out = apply_transform(id, out, magnitude, rng);
  }
  if (policy.cutout_size > 0) {
    const Index cy = static_cast<Index>(rng.uniform_int(0, out.height - 1));
    const Index cx = static_cast<Index>(rng.uniform_int(0, out.width - 1));
    const Index half = policy.cutout_size / 2;
    const Index y0 = std::max<Index>(0, cy - half);
    const Index y1 = std::min(out.height, cy - half + policy.cutout_size);
    const Index x0 = std::max<Index>(0, cx - half);
    const Index x1 = std::min(out.width, cx - half + policy.cutout_size);
    for (Index c = 0; c < out.channels; ++c) {
      for (Index y = y0; y < y1; ++y) {
        for (Index x = x0; x < x1; ++x) {
          out.at(c, y, x) = static_cast<Real>(policy.cutout_fill);
        }
      }
    }
  }
  return out;
}

void VectorAugmentParams::validate() const {
  if (sigma_weak < 0.0 || sigma_strong < 0.0) {
    throw ConfigError("augment: noise sigmas must be >= 0");
  }
  if (drop_fraction < 0.0 || drop_fraction > 1.0) {
    throw ConfigError("augment: drop fraction must be in [0, 1]");
  }
}

VectorXr vector_weak_augment(const VectorXr& sample,
                             const VectorAugmentParams& params, Rng& rng) {
  params.validate();
  VectorXr out = sample;
  for (Index i = 0; i < out.size(); ++i) {
    out[i] += static_cast<Real>(params.sigma_weak * rng.normal());
  }
  return out;
}

VectorXr vector_strong_augment(const VectorXr& sample,
                               const VectorAugmentParams& params, Rng& rng) {
  params.validate();
  VectorXr out = sample;
  for (Index i = 0; i < out.size(); ++i) {
    out[i] += static_cast<Real>(params.sigma_strong * rng.normal());
  }
  // Zero a fraction of coordinates: partial Fisher-Yates over indices.
  const auto drop =
      std::clamp<Index>(static_cast<Index>(std::llround(
                            params.drop_fraction * static_cast<double>(out.size()))),
                        0, out.size());
  std::vector<Index> order(static_cast<std::size_t>(out.size()));
  for (Index i = 0; i < out.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  for (Index k = 0; k < drop; ++k) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(k, static_cast<std::int64_t>(out.size()) - 1));
    std::swap(order[static_cast<std::size_t>(k)], order[j]);
    out[order[static_cast<std::size_t>(k)]] = Real(0);
  }
  return out;
}

VectorAugmenter::VectorAugmenter(VectorAugmentParams params) : params_(params) {
  params_.validate();
}

MatrixXr VectorAugmenter::weak(const MatrixXr& samples,
                               std::uint64_t seed) const {
  MatrixXr out(samples.rows(), samples.cols());
  for (Index r = 0; r < samples.rows(); ++r) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
    out.row(r) = vector_weak_augment(samples.row(r).transpose(), params_, rng)
                     .transpose();
  }
  return out;
}

MatrixXr VectorAugmenter::strong(const MatrixXr& samples,
                                 std::uint64_t seed) const {
  MatrixXr out(samples.rows(), samples.cols());
  for (Index r = 0; r < samples.rows(); ++r) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
    out.row(r) = vector_strong_augment(samples.row(r).transpose(), params_, rng)
                     .transpose();
  }
  return out;
}

ImageAugmenter::ImageAugmenter(Index channels, Index height, Index width,
                               ImageAugmentPolicy policy)
    : channels_(channels), height_(height), width_(width),
      policy_(std::move(policy)) {
  policy_.validate(height_, width_);
}

ImageTensor ImageAugmenter::to_image(const MatrixXr& samples, Index row) const {
  if (samples.cols() != channels_ * height_ * width_) {
    throw ShapeError("image augmenter: row width " +
                     std::to_string(samples.cols()) + " does not match " +
                     std::to_string(channels_) + "x" + std::to_string(height_) +
                     "x" + std::to_string(width_));
  }
  ImageTensor img(channels_, height_, width_);
  for (Index i = 0; i < img.size(); ++i) img.pixels[static_cast<std::size_t>(i)] = samples(row, i);
  return img;
}

MatrixXr ImageAugmenter::weak(const MatrixXr& samples,
                              std::uint64_t seed) const {
  MatrixXr out(samples.rows(), samples.cols());
  for (Index r = 0; r < samples.rows(); ++r) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
    const ImageTensor img = weak_augment(to_image(samples, r), policy_, rng);
    for (Index i = 0; i < img.size(); ++i) out(r, i) = img.pixels[static_cast<std::size_t>(i)];
  }
  return out;
}

MatrixXr ImageAugmenter::strong(const MatrixXr& samples,
                                std::uint64_t seed) const {
  MatrixXr out(samples.rows(), samples.cols());
  for (Index r = 0; r < samples.rows(); ++r) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
    const ImageTensor img = strong_augment(to_image(samples, r), policy_, rng);
    for (Index i = 0; i < img.size(); ++i) out(r, i) = img.pixels[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace rankmatch
