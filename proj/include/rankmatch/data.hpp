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
#ifndef RANKMATCH_DATA_HPP_
#define RANKMATCH_DATA_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rankmatch/augment.hpp"
#include "rankmatch/core/error.hpp"
#include "rankmatch/core/types.hpp"

namespace rankmatch {

/// One CIFAR-10 binary record: label byte then 32x32 red/green/blue planes.
struct Cifar10Record {
  std::uint8_t label = 0;
  std::array<std::uint8_t, 3072> pixels{};  // channel-major planes
};

constexpr std::size_t kCifar10RecordBytes = 3073;

/// Parses the 3073-byte-record binary format. Rejects lengths that are not a
/// whole number of records (error names the byte offset of the ragged tail)
/// and labels >= 10 (error names the record index).
std::vector<Cifar10Record> parse_cifar10_binary(
    const std::vector<unsigned char>& bytes, const std::string& source_name);

std::vector<unsigned char> serialize_cifar10(
    const std::vector<Cifar10Record>& records);

/// Pixels as channel-major planes normalized to [0,1].
ImageTensor record_to_image(const Cifar10Record& record);

/// Sample/label collection for one split. Image datasets keep their geometry;
/// rows store pixels flattened channel-major. Vector datasets leave the
/// geometry fields at zero.
struct Dataset {
  MatrixXr features;  // count x dim
  std::vector<int> labels;
  int num_classes = 0;
  Index channels = 0;
  Index height = 0;
  Index width = 0;

  Index count() const { return features.rows(); }
  Index dim() const { return features.cols(); }
  bool is_image() const { return channels > 0; }
  void validate() const;
};

/// Row-subset copy preserving metadata; indices must be in range.
Dataset gather(const Dataset& source, const std::vector<Index>& indices);

struct DatasetSplit {
  Dataset train;
  Dataset validation;
  Dataset test;
  /// Subset of train rows whose labels the trainer may see. Every train row
  /// (labeled ones included) stays in the unlabeled pool.
  std::vector<Index> labeled_indices;

  void validate() const;
};

Dataset cifar10_to_dataset(const std::vector<Cifar10Record>& records);

/// Reads and concatenates CIFAR-10 binary files in the given order.
Dataset load_cifar10(const std::vector<std::string>& paths);

/// Gaussian-blob generator. When class_means is empty, K x D means are drawn
/// from the seed with per-coordinate stdev mean_scale.
struct SyntheticSpec {
  int num_classes = 4;
  Index dim = 16;
  MatrixXr class_means;  // K x D, or empty to derive from the seed
  Real mean_scale = 2.0;
  Real stdev = 0.5;
  Index train_count = 4000;
  Index validation_count = 400;
  Index test_count = 2000;
  std::uint64_t seed = 1;

  void validate() const;
};

DatasetSplit make_synthetic_blobs(const SyntheticSpec& spec);

/// Versioned binary serialization of a synthetic (vector) split. Layout:
/// magic "RMBLOBS1"; u32 num_classes, dim, train, validation, test, labeled
/// counts; u32 labeled indices; then per split u32 labels followed by the
/// feature matrix as little-endian f64, column by column.
void save_split(const std::string& path, const DatasetSplit& split);
DatasetSplit load_split(const std::string& path);

/// Class-balanced labeled subset of `train`, uniform per seed: num_labels/K
/// rows per class. num_labels must be positive and divisible by the class
/// count; classes short on samples raise an error naming the class. Returned
/// indices are sorted.
std::vector<Index> split_labeled_unlabeled(const Dataset& train, Index num_labels,
                                           std::uint64_t seed);

struct StepBatch {
  std::vector<Index> labeled;    // train row indices, size B
  std::vector<Index> unlabeled;  // train row indices, size mu*B
};

/// Per-epoch batch stream: every step yields B labeled and mu*B unlabeled
/// train rows. The unlabeled pool is the whole train split, shuffled once per
/// epoch; the ragged remainder that cannot fill a final mu*B batch is
/// dropped, so steps_per_epoch = floor(train / (mu*B)). The labeled list is
/// cycled, reshuffling at each wrap. Deterministic per (seed, epoch).
class BatchIterator {
 public:
  BatchIterator(const DatasetSplit& split, Index batch_size, Index mu,
                std::uint64_t seed);

  Index steps_per_epoch() const { return steps_per_epoch_; }
  void begin_epoch(Index epoch);
  bool has_next() const { return step_ < steps_per_epoch_; }
  StepBatch next();

 private:
  std::vector<Index> labeled_pool_;
  Index train_count_;
  Index batch_size_;
  Index mu_;
  std::uint64_t seed_;
  Index steps_per_epoch_;

  Index epoch_ = -1;
  Index step_ = 0;
  std::uint64_t labeled_wraps_ = 0;
  std::vector<Index> unlabeled_order_;
  std::vector<Index> labeled_order_;
  std::size_t labeled_cursor_ = 0;
};

}  // namespace rankmatch

#endif  // RANKMATCH_DATA_HPP_
