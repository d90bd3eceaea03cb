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
#include "rankmatch/data.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>

#include "rankmatch/core/rng.hpp"

namespace rankmatch {
namespace {

constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;      // labeled draw
constexpr std::uint64_t kBlobMeanStream = 0x6d65616e73ULL;   // class means
constexpr std::uint64_t kIterLabeled = 1;
constexpr std::uint64_t kIterUnlabeled = 2;

constexpr char kSplitMagic[8] = {'R', 'M', 'B', 'L', 'O', 'B', 'S', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

class Reader {
 public:
  Reader(std::istream& is, const std::string& path) : is_(is), path_(path) {}

  std::uint64_t offset() const { return offset_; }

  void bytes(char* out, std::size_t n, const char* what) {
    is_.read(out, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw DataFormatError("split file '" + path_ + "': truncated while reading " +
                            what + " at byte offset " + std::to_string(offset_));
    }
    offset_ += n;
  }

  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  }

  double f64(const char* what) {
    unsigned char b[8];
    bytes(reinterpret_cast<char*>(b), 8, what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

 private:
  std::istream& is_;
  std::string path_;
  std::uint64_t offset_ = 0;
};

void write_dataset_body(std::ostream& os, const Dataset& d) {
  for (int label : d.labels) write_u32(os, static_cast<std::uint32_t>(label));
  for (Index j = 0; j < d.dim(); ++j) {
    for (Index i = 0; i < d.count(); ++i) {
      write_f64(os, static_cast<double>(d.features(i, j)));
    }
  }
}

Dataset read_dataset_body(Reader& r, std::uint32_t count, std::uint32_t dim,
                          std::uint32_t num_classes, const std::string& path) {
  Dataset d;
  d.num_classes = static_cast<int>(num_classes);
  d.features.resize(count, dim);
  d.labels.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t at = r.offset();
    const std::uint32_t label = r.u32("label");
    if (label >= num_classes) {
      throw DataFormatError("split file '" + path + "': label " +
                            std::to_string(label) + " >= num_classes " +
                            std::to_string(num_classes) + " at byte offset " +
                            std::to_string(at));
    }
    d.labels[i] = static_cast<int>(label);
  }
  for (std::uint32_t j = 0; j < dim; ++j) {
    for (std::uint32_t i = 0; i < count; ++i) {
      d.features(i, j) = static_cast<Real>(r.f64("feature"));
    }
  }
  return d;
}

}  // namespace

std::vector<Cifar10Record> parse_cifar10_binary(
    const std::vector<unsigned char>& bytes, const std::string& source_name) {
  const std::size_t n = bytes.size() / kCifar10RecordBytes;
  const std::size_t tail = bytes.size() % kCifar10RecordBytes;
  if (tail != 0) {
    throw DataFormatError("cifar10 '" + source_name + "': " + std::to_string(tail) +
                          " trailing bytes after " + std::to_string(n) +
                          " records (ragged tail starts at byte offset " +
                          std::to_string(n * kCifar10RecordBytes) + ")");
  }
  std::vector<Cifar10Record> records(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t base = i * kCifar10RecordBytes;
    const std::uint8_t label = bytes[base];
    if (label >= 10) {
      throw DataFormatError("cifar10 '" + source_name + "': label byte " +
                            std::to_string(label) + " in record " +
                            std::to_string(i) + " (byte offset " +
                            std::to_string(base) + ") is not a class in 0..9");
    }
    records[i].label = label;
    std::memcpy(records[i].pixels.data(), bytes.data() + base + 1, 3072);
  }
  return records;
}

std::vector<unsigned char> serialize_cifar10(
    const std::vector<Cifar10Record>& records) {
  std::vector<unsigned char> bytes;
  bytes.reserve(records.size() * kCifar10RecordBytes);
  for (const auto& rec : records) {
    bytes.push_back(rec.label);
    bytes.insert(bytes.end(), rec.pixels.begin(), rec.pixels.end());
  }
  return bytes;
}

ImageTensor record_to_image(const Cifar10Record& record) {
  ImageTensor img;
  img.channels = 3;
  img.height = 32;
  img.width = 32;
  img.pixels.resize(3072);
  for (std::size_t i = 0; i < 3072; ++i) {
    img.pixels[i] = static_cast<Real>(record.pixels[i]) / Real(255);
  }
  return img;
}

void Dataset::validate() const {
  if (static_cast<Index>(labels.size()) != features.rows()) {
    throw ShapeError("dataset: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(features.rows()) + " rows");
  }
  if (num_classes < 1) throw ConfigError("dataset: num_classes must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw ShapeError("dataset: label " + std::to_string(labels[i]) + " at row " +
                       std::to_string(i) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
  }
  if (is_image() && channels * height * width != features.cols()) {
    throw ShapeError("dataset: image geometry does not match feature width");
  }
}

Dataset gather(const Dataset& source, const std::vector<Index>& indices) {
  Dataset out;
  out.num_classes = source.num_classes;
  out.channels = source.channels;
  out.height = source.height;
  out.width = source.width;
  out.features.resize(static_cast<Index>(indices.size()), source.dim());
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Index r = indices[i];
    if (r < 0 || r >= source.count()) {
      throw ShapeError("gather: index " + std::to_string(r) + " outside dataset of " +
                       std::to_string(source.count()) + " rows");
    }
    out.features.row(static_cast<Index>(i)) = source.features.row(r);
    out.labels[i] = source.labels[static_cast<std::size_t>(r)];
  }
  return out;
}

void DatasetSplit::validate() const {
  train.validate();
  validation.validate();
  test.validate();
  for (Index idx : labeled_indices) {
    if (idx < 0 || idx >= train.count()) {
      throw ShapeError("split: labeled index " + std::to_string(idx) +
                       " outside train set of " + std::to_string(train.count()) +
                       " rows");
    }
  }
}

Dataset cifar10_to_dataset(const std::vector<Cifar10Record>& records) {
  Dataset d;
  d.num_classes = 10;
  d.channels = 3;
  d.height = 32;
  d.width = 32;
  d.features.resize(static_cast<Index>(records.size()), 3072);
  d.labels.resize(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    d.labels[i] = records[i].label;
    for (Index j = 0; j < 3072; ++j) {
      d.features(static_cast<Index>(i), j) =
          static_cast<Real>(records[i].pixels[static_cast<std::size_t>(j)]) / Real(255);
    }
  }
  return d;
}

Dataset load_cifar10(const std::vector<std::string>& paths) {
  if (paths.empty()) throw ConfigError("cifar10: no input files given");
  std::vector<Cifar10Record> all;
  for (const auto& path : paths) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataFormatError("cifar10: cannot open '" + path + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
    std::vector<Cifar10Record> recs = parse_cifar10_binary(bytes, path);
    all.insert(all.end(), recs.begin(), recs.end());
  }
  return cifar10_to_dataset(all);
}

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw ConfigError("synthetic: num_classes must be >= 2");
  if (dim < 1) throw ConfigError("synthetic: dim must be >= 1");
  if (stdev < 0) throw ConfigError("synthetic: stdev must be non-negative");
  if (mean_scale <= 0) throw ConfigError("synthetic: mean_scale must be positive");
  if (train_count <= 0) throw ConfigError("synthetic: train_count must be positive");
  if (validation_count < 0 || test_count < 0) {
    throw ConfigError("synthetic: split counts must be non-negative");
  }
  const Index k = num_classes;
  if (train_count % k != 0 || validation_count % k != 0 || test_count % k != 0) {
    throw ConfigError("synthetic: split counts must be divisible by num_classes");
  }
  if (class_means.size() != 0 &&
      (class_means.rows() != k || class_means.cols() != dim)) {
    throw ShapeError("synthetic: class_means must be num_classes x dim, got " +
                     std::to_string(class_means.rows()) + "x" +
                     std::to_string(class_means.cols()));
  }
}

namespace {

Dataset blob_split(const SyntheticSpec& spec, const MatrixXr& means, Index count,
                   std::uint64_t split_tag) {
  Dataset d;
  d.num_classes = spec.num_classes;
  d.features.resize(count, spec.dim);
  d.labels.resize(static_cast<std::size_t>(count));
  const Index per_class = count / spec.num_classes;
  Index row = 0;
  for (int c = 0; c < spec.num_classes; ++c) {
    Rng rng(mix_seed(spec.seed, split_tag, static_cast<std::uint64_t>(c)));
    for (Index s = 0; s < per_class; ++s, ++row) {
      for (Index j = 0; j < spec.dim; ++j) {
        d.features(row, j) = means(c, j) + spec.stdev * rng.normal();
      }
      d.labels[static_cast<std::size_t>(row)] = c;
    }
  }
  // Mix class blocks so contiguous consumers never see label-sorted rows.
  std::vector<Index> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), Index{0});
  Rng perm(mix_seed(spec.seed, split_tag, 0x7065726dULL));
  shuffle(order, perm);
  return gather(d, order);
}

}  // namespace

DatasetSplit make_synthetic_blobs(const SyntheticSpec& spec) {
  spec.validate();
  MatrixXr means = spec.class_means;
  if (means.size() == 0) {
    means.resize(spec.num_classes, spec.dim);
    Rng rng(mix_seed(spec.seed, kBlobMeanStream));
    for (Index c = 0; c < spec.num_classes; ++c) {
      for (Index j = 0; j < spec.dim; ++j) {
        means(c, j) = spec.mean_scale * rng.normal();
      }
    }
  }
  DatasetSplit split;
  split.train = blob_split(spec, means, spec.train_count, 1);
  split.validation = blob_split(spec, means, spec.validation_count, 2);
  split.test = blob_split(spec, means, spec.test_count, 3);
  return split;
}

void save_split(const std::string& path, const DatasetSplit& split) {
  split.validate();
  if (split.train.is_image()) {
    throw ConfigError("save_split: only vector datasets are serialized here");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("save_split: cannot open '" + path + "' for writing");
  os.write(kSplitMagic, sizeof(kSplitMagic));
  write_u32(os, static_cast<std::uint32_t>(split.train.num_classes));
  write_u32(os, static_cast<std::uint32_t>(split.train.dim()));
  write_u32(os, static_cast<std::uint32_t>(split.train.count()));
  write_u32(os, static_cast<std::uint32_t>(split.validation.count()));
  write_u32(os, static_cast<std::uint32_t>(split.test.count()));
  write_u32(os, static_cast<std::uint32_t>(split.labeled_indices.size()));
  for (Index idx : split.labeled_indices) {
    write_u32(os, static_cast<std::uint32_t>(idx));
  }
  write_dataset_body(os, split.train);
  write_dataset_body(os, split.validation);
  write_dataset_body(os, split.test);
  os.flush();
  if (!os) throw Error("save_split: write to '" + path + "' failed");
}

DatasetSplit load_split(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataFormatError("split file: cannot open '" + path + "'");
  Reader r(is, path);
  char magic[8];
  r.bytes(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kSplitMagic, sizeof(kSplitMagic)) != 0) {
    throw DataFormatError("split file '" + path +
                          "': bad magic at byte offset 0 (not a split file, or "
                          "unsupported version)");
  }
  const std::uint32_t k = r.u32("num_classes");
  const std::uint32_t dim = r.u32("dim");
  const std::uint32_t n_train = r.u32("train count");
  const std::uint32_t n_val = r.u32("validation count");
  const std::uint32_t n_test = r.u32("test count");
  const std::uint32_t n_labeled = r.u32("labeled count");
  if (k < 1 || dim < 1) {
    throw DataFormatError("split file '" + path + "': bad header (K=" +
                          std::to_string(k) + ", D=" + std::to_string(dim) + ")");
  }
  if (n_labeled > n_train) {
    throw DataFormatError("split file '" + path + "': " + std::to_string(n_labeled) +
                          " labeled indices for " + std::to_string(n_train) +
                          " train rows");
  }
  DatasetSplit split;
  split.labeled_indices.reserve(n_labeled);
  for (std::uint32_t i = 0; i < n_labeled; ++i) {
    const std::uint64_t at = r.offset();
    const std::uint32_t idx = r.u32("labeled index");
    if (idx >= n_train) {
      throw DataFormatError("split file '" + path + "': labeled index " +
                            std::to_string(idx) + " >= train count at byte offset " +
                            std::to_string(at));
    }
    split.labeled_indices.push_back(static_cast<Index>(idx));
  }
  split.train = read_dataset_body(r, n_train, dim, k, path);
  split.validation = read_dataset_body(r, n_val, dim, k, path);
  split.test = read_dataset_body(r, n_test, dim, k, path);
  char trailing;
  is.read(&trailing, 1);
  if (is.gcount() != 0) {
    throw DataFormatError("split file '" + path + "': trailing bytes at offset " +
                          std::to_string(r.offset()));
  }
  return split;
}

std::vector<Index> split_labeled_unlabeled(const Dataset& train, Index num_labels,
                                           std::uint64_t seed) {
  train.validate();
  if (num_labels <= 0 || num_labels > train.count()) {
    throw ConfigError("label split: num_labels " + std::to_string(num_labels) +
                      " outside [1, " + std::to_string(train.count()) + "]");
  }
  if (num_labels % train.num_classes != 0) {
    throw ConfigError("label split: num_labels " + std::to_string(num_labels) +
                      " not divisible by " + std::to_string(train.num_classes) +
                      " classes");
  }
  const Index per_class = num_labels / train.num_classes;
  std::vector<std::vector<Index>> by_class(
      static_cast<std::size_t>(train.num_classes));
  for (Index i = 0; i < train.count(); ++i) {
    by_class[static_cast<std::size_t>(train.labels[static_cast<std::size_t>(i)])]
        .push_back(i);
  }
  std::vector<Index> labeled;
  labeled.reserve(static_cast<std::size_t>(num_labels));
  for (int c = 0; c < train.num_classes; ++c) {
    auto& rows = by_class[static_cast<std::size_t>(c)];
    if (static_cast<Index>(rows.size()) < per_class) {
      throw Error("label split: class " + std::to_string(c) + " has only " +
                  std::to_string(rows.size()) + " samples, need " +
                  std::to_string(per_class));
    }
    Rng rng(mix_seed(seed, kSplitStream, static_cast<std::uint64_t>(c)));
    shuffle(rows, rng);
    labeled.insert(labeled.end(), rows.begin(), rows.begin() + per_class);
  }
  std::sort(labeled.begin(), labeled.end());
  return labeled;
}

BatchIterator::BatchIterator(const DatasetSplit& split, Index batch_size, Index mu,
                             std::uint64_t seed)
    : labeled_pool_(split.labeled_indices),
      train_count_(split.train.count()),
      batch_size_(batch_size),
      mu_(mu),
      seed_(seed) {
  if (batch_size < 1) throw ConfigError("batch iterator: B must be >= 1");
  if (mu < 1) throw ConfigError("batch iterator: mu must be >= 1");
  if (labeled_pool_.empty()) {
    throw ConfigError("batch iterator: labeled set is empty");
  }
  if (train_count_ == 0) throw ConfigError("batch iterator: train set is empty");
  steps_per_epoch_ = train_count_ / (mu_ * batch_size_);
  if (steps_per_epoch_ == 0) {
    throw ConfigError("batch iterator: train set of " + std::to_string(train_count_) +
                      " rows cannot fill one unlabeled batch of " +
                      std::to_string(mu_ * batch_size_) +
                      " (ragged remainders are dropped)");
  }
}

void BatchIterator::begin_epoch(Index epoch) {
  if (epoch < 0) throw ConfigError("batch iterator: epoch must be non-negative");
  epoch_ = epoch;
  step_ = 0;
  labeled_wraps_ = 0;
  unlabeled_order_.resize(static_cast<std::size_t>(train_count_));
  std::iota(unlabeled_order_.begin(), unlabeled_order_.end(), Index{0});
  Rng urng(mix_seed(seed_, static_cast<std::uint64_t>(epoch), kIterUnlabeled));
  shuffle(unlabeled_order_, urng);
  labeled_order_ = labeled_pool_;
  Rng lrng(mix_seed(seed_, static_cast<std::uint64_t>(epoch), kIterLabeled));
  shuffle(labeled_order_, lrng);
  labeled_cursor_ = 0;
}

StepBatch BatchIterator::next() {
  if (epoch_ < 0) throw Error("batch iterator: begin_epoch not called");
  if (step_ >= steps_per_epoch_) {
    throw Error("batch iterator: epoch exhausted after " +
                std::to_string(steps_per_epoch_) + " steps");
  }
  StepBatch batch;
  batch.labeled.reserve(static_cast<std::size_t>(batch_size_));
  for (Index i = 0; i < batch_size_; ++i) {
    if (labeled_cursor_ == labeled_order_.size()) {
      ++labeled_wraps_;
      Rng rng(mix_seed(mix_seed(seed_, static_cast<std::uint64_t>(epoch_), kIterLabeled),
                       labeled_wraps_));
      shuffle(labeled_order_, rng);
      labeled_cursor_ = 0;
    }
    batch.labeled.push_back(labeled_order_[labeled_cursor_++]);
  }
  const std::size_t base = static_cast<std::size_t>(step_) *
                           static_cast<std::size_t>(mu_ * batch_size_);
  batch.unlabeled.assign(unlabeled_order_.begin() + static_cast<std::ptrdiff_t>(base),
                         unlabeled_order_.begin() +
                             static_cast<std::ptrdiff_t>(base) + mu_ * batch_size_);
  ++step_;
  return batch;
}

}  // namespace rankmatch
