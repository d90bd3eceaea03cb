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
#include "rankmatch/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace rankmatch {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class ValueParser {
 public:
  ValueParser(const std::string& source, int line, const std::string& key,
              const std::string& value)
      : source_(source), line_(line), key_(key), value_(value) {}

  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError(source_ + ":" + std::to_string(line_) + ": key '" + key_ +
                      "': " + why + " (value '" + value_ + "')");
  }

  Real real() const {
    try {
      std::size_t pos = 0;
      const Real v = static_cast<Real>(std::stod(value_, &pos));
      if (pos != value_.size()) fail("trailing characters after number");
      if (!std::isfinite(v)) fail("value must be finite");
      return v;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      fail("expected a number");
    }
  }

  long long integer() const {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(value_, &pos);
      if (pos != value_.size()) fail("trailing characters after integer");
      return v;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      fail("expected an integer");
    }
  }

  std::uint64_t u64() const {
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(value_, &pos);
      if (pos != value_.size()) fail("trailing characters after integer");
      return static_cast<std::uint64_t>(v);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      fail("expected a non-negative integer");
    }
  }

  bool boolean() const {
    if (value_ == "true" || value_ == "1" || value_ == "yes" || value_ == "on") {
      return true;
    }
    if (value_ == "false" || value_ == "0" || value_ == "no" || value_ == "off") {
      return false;
    }
    fail("expected a boolean (true/false)");
  }

  std::vector<Index> index_list() const {
    std::vector<Index> out;
    for (const std::string& item : split_list(value_)) {
      try {
        std::size_t pos = 0;
        out.push_back(static_cast<Index>(std::stoll(item, &pos)));
        if (pos != item.size()) fail("bad list entry '" + item + "'");
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception&) {
        fail("bad list entry '" + item + "'");
      }
    }
    if (out.empty()) fail("expected a non-empty comma-separated list");
    return out;
  }

  const std::string& str() const { return value_; }

 private:
  const std::string& source_;
  int line_;
  const std::string& key_;
  const std::string& value_;
};

}  // namespace

void ExperimentConfig::validate() const {
  if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (mu < 1) throw ConfigError("config: mu must be >= 1");
  if (num_labels < 1) throw ConfigError("config: num_labels must be >= 1");
  if (eval_every_steps < 0) {
    throw ConfigError("config: eval_every_steps must be >= 0");
  }
  if (ema_decay < 0 || ema_decay >= 1) {
    throw ConfigError("config: ema_decay must lie in [0, 1)");
  }
  if (output_dir.empty()) throw ConfigError("config: output_dir must be set");
  if (dataset == DatasetKind::kSplitFile && split_path.empty()) {
    throw ConfigError("config: dataset=split_file needs split_path");
  }
  if (dataset == DatasetKind::kCifar10 && cifar10_train.empty()) {
    throw ConfigError("config: dataset=cifar10 needs cifar10_train paths");
  }
  if (bench_repetitions < 5) {
    throw ConfigError("config: bench_repetitions must be >= 5");
  }
  if (bench_class_count < 1 || bench_dim < 1 || bench_batch_sizes.empty()) {
    throw ConfigError("config: bench geometry must be positive and non-empty");
  }
  if (bench_confident_fraction < 0 || bench_confident_fraction > 1) {
    throw ConfigError("config: bench_confident_fraction must lie in [0, 1]");
  }
  if (aug_sigma_weak < 0 || aug_sigma_strong < 0) {
    throw ConfigError("config: augment noise levels must be non-negative");
  }
  if (aug_drop_fraction < 0 || aug_drop_fraction > 1) {
    throw ConfigError("config: aug_drop_fraction must lie in [0, 1]");
  }
  objective_config().validate();
  optim_config().validate();
  if (dataset == DatasetKind::kSynthetic) synthetic_spec().validate();
}

ObjectiveConfig ExperimentConfig::objective_config() const {
  ObjectiveConfig o;
  o.variant = variant;
  o.lambda_u = lambda_u;
  o.lambda_r = lambda_r;
  o.tau = tau;
  o.mu = mu;
  o.normalize_logits = normalize_logits;
  o.mask_ranking = mask_ranking;
  o.ranking.margin = margin;
  o.ranking.temperature = temperature;
  o.ranking.soft_margin = soft_margin;
  o.ranking.positive_normalization = positive_normalization;
  o.ranking.apply_confidence_mask = mask_ranking;
  return o;
}

OptimConfig ExperimentConfig::optim_config() const {
  OptimConfig o;
  o.base_lr = lr;
  o.momentum = momentum;
  o.weight_decay = weight_decay;
  o.nesterov = true;
  return o;
}

SyntheticSpec ExperimentConfig::synthetic_spec() const {
  SyntheticSpec s;
  s.num_classes = synthetic_classes;
  s.dim = synthetic_dim;
  s.stdev = synthetic_stdev;
  s.mean_scale = synthetic_mean_scale;
  s.train_count = synthetic_train;
  s.validation_count = synthetic_validation;
  s.test_count = synthetic_test;
  s.seed = synthetic_seed == 0 ? seed : synthetic_seed;
  return s;
}

DatasetSplit ExperimentConfig::load_dataset() const {
  DatasetSplit split;
  switch (dataset) {
    case DatasetKind::kSynthetic:
      split = make_synthetic_blobs(synthetic_spec());
      break;
    case DatasetKind::kSplitFile:
      split = load_split(split_path);
      break;
    case DatasetKind::kCifar10: {
      split.train = load_cifar10(cifar10_train);
      if (!cifar10_test.empty()) {
        split.test = load_cifar10({cifar10_test});
      } else {
        split.test.num_classes = 10;
        split.test.channels = 3;
        split.test.height = 32;
        split.test.width = 32;
        split.test.features.resize(0, 3072);
      }
      split.validation = split.test;
      break;
    }
  }
  if (split.labeled_indices.empty()) {
    split.labeled_indices = split_labeled_unlabeled(split.train, num_labels, seed);
  }
  return split;
}

ModelSpec ExperimentConfig::model_spec(const Dataset& train) const {
  ModelSpec spec;
  spec.kind = model;
  spec.num_classes = train.num_classes;
  if (model == ModelKind::kMlp) {
    spec.input_dim = train.dim();
    spec.hidden_sizes = mlp_hidden;
  } else {
    if (!train.is_image()) {
      throw ConfigError("config: model=miniconv needs an image dataset");
    }
    spec.in_channels = train.channels;
    spec.image_height = train.height;
    spec.image_width = train.width;
    spec.conv_channels = conv_channels;
  }
  spec.validate();
  return spec;
}

std::unique_ptr<Augmenter> ExperimentConfig::make_augmenter(
    const Dataset& train) const {
  AugmentKind kind = augment;
  if (kind == AugmentKind::kAuto) {
    kind = train.is_image() ? AugmentKind::kImage : AugmentKind::kVector;
  }
  switch (kind) {
    case AugmentKind::kNone:
      return std::make_unique<NoAugmenter>();
    case AugmentKind::kVector: {
      VectorAugmentParams p;
      p.sigma_weak = aug_sigma_weak;
      p.sigma_strong = aug_sigma_strong;
      p.drop_fraction = aug_drop_fraction;
      return std::make_unique<VectorAugmenter>(p);
    }
    case AugmentKind::kImage: {
      if (!train.is_image()) {
        throw ConfigError("config: augment=image needs an image dataset");
      }
      ImageAugmentPolicy policy;
      return std::make_unique<ImageAugmenter>(train.channels, train.height,
                                              train.width, policy);
    }
    case AugmentKind::kAuto:
      break;
  }
  throw ConfigError("config: unresolved augment kind");
}

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& source_name) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source_name + ":" + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(source_name + ":" + std::to_string(line_no) +
                        ": empty key");
    }
    ValueParser p(source_name, line_no, key, value);

    if (key == "seed") {
      cfg.seed = p.u64();
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else if (key == "epochs") {
      cfg.epochs = static_cast<Index>(p.integer());
    } else if (key == "batch_size") {
      cfg.batch_size = static_cast<Index>(p.integer());
    } else if (key == "mu") {
      cfg.mu = static_cast<Index>(p.integer());
    } else if (key == "num_labels") {
      cfg.num_labels = static_cast<Index>(p.integer());
    } else if (key == "eval_every_steps") {
      cfg.eval_every_steps = static_cast<Index>(p.integer());
    } else if (key == "log_wall_time") {
      cfg.log_wall_time = p.boolean();
    } else if (key == "variant") {
      cfg.variant = variant_from_name(value);
    } else if (key == "tau") {
      cfg.tau = p.real();
    } else if (key == "margin") {
      cfg.margin = p.real();
    } else if (key == "temperature") {
      cfg.temperature = p.real();
    } else if (key == "lambda_u") {
      cfg.lambda_u = p.real();
    } else if (key == "lambda_r") {
      cfg.lambda_r = p.real();
    } else if (key == "normalize_logits") {
      cfg.normalize_logits = p.boolean();
    } else if (key == "mask_ranking") {
      cfg.mask_ranking = p.boolean();
    } else if (key == "soft_margin") {
      cfg.soft_margin = p.boolean();
    } else if (key == "positive_normalization") {
      if (value == "batch_size") {
        cfg.positive_normalization = loss::PositiveNormalization::kBatchSize;
      } else if (value == "positive_count") {
        cfg.positive_normalization = loss::PositiveNormalization::kPositiveCount;
      } else {
        p.fail("expected batch_size or positive_count");
      }
    } else if (key == "lr") {
      cfg.lr = p.real();
    } else if (key == "momentum") {
      cfg.momentum = p.real();
    } else if (key == "weight_decay") {
      cfg.weight_decay = p.real();
    } else if (key == "ema_decay") {
      cfg.ema_decay = p.real();
    } else if (key == "dataset") {
      if (value == "synthetic") {
        cfg.dataset = DatasetKind::kSynthetic;
      } else if (value == "cifar10") {
        cfg.dataset = DatasetKind::kCifar10;
      } else if (value == "split_file") {
        cfg.dataset = DatasetKind::kSplitFile;
      } else {
        p.fail("expected synthetic, cifar10, or split_file");
      }
    } else if (key == "synthetic_classes") {
      cfg.synthetic_classes = static_cast<int>(p.integer());
    } else if (key == "synthetic_dim") {
      cfg.synthetic_dim = static_cast<Index>(p.integer());
    } else if (key == "synthetic_train") {
      cfg.synthetic_train = static_cast<Index>(p.integer());
    } else if (key == "synthetic_validation") {
      cfg.synthetic_validation = static_cast<Index>(p.integer());
    } else if (key == "synthetic_test") {
      cfg.synthetic_test = static_cast<Index>(p.integer());
    } else if (key == "synthetic_stdev") {
      cfg.synthetic_stdev = p.real();
    } else if (key == "synthetic_mean_scale") {
      cfg.synthetic_mean_scale = p.real();
    } else if (key == "synthetic_seed") {
      cfg.synthetic_seed = p.u64();
    } else if (key == "split_path") {
      cfg.split_path = value;
    } else if (key == "cifar10_train") {
      cfg.cifar10_train = split_list(value);
    } else if (key == "cifar10_test") {
      cfg.cifar10_test = value;
    } else if (key == "model") {
      if (value == "mlp") {
        cfg.model = ModelKind::kMlp;
      } else if (value == "miniconv") {
        cfg.model = ModelKind::kMiniConv;
      } else {
        p.fail("expected mlp or miniconv");
      }
    } else if (key == "mlp_hidden") {
      cfg.mlp_hidden = p.index_list();
    } else if (key == "conv_channels") {
      cfg.conv_channels = p.index_list();
    } else if (key == "augment") {
      if (value == "auto") {
        cfg.augment = AugmentKind::kAuto;
      } else if (value == "vector") {
        cfg.augment = AugmentKind::kVector;
      } else if (value == "image") {
        cfg.augment = AugmentKind::kImage;
      } else if (value == "none") {
        cfg.augment = AugmentKind::kNone;
      } else {
        p.fail("expected auto, vector, image, or none");
      }
    } else if (key == "aug_sigma_weak") {
      cfg.aug_sigma_weak = p.real();
    } else if (key == "aug_sigma_strong") {
      cfg.aug_sigma_strong = p.real();
    } else if (key == "aug_drop_fraction") {
      cfg.aug_drop_fraction = p.real();
    } else if (key == "bench_batch_sizes") {
      cfg.bench_batch_sizes = p.index_list();
    } else if (key == "bench_class_count") {
      cfg.bench_class_count = static_cast<int>(p.integer());
    } else if (key == "bench_dim") {
      cfg.bench_dim = static_cast<Index>(p.integer());
    } else if (key == "bench_confident_fraction") {
      cfg.bench_confident_fraction = p.real();
    } else if (key == "bench_repetitions") {
      cfg.bench_repetitions = static_cast<int>(p.integer());
    } else if (key == "bench_variants") {
      cfg.bench_variants.clear();
      for (const std::string& name : split_list(value)) {
        cfg.bench_variants.push_back(variant_from_name(name));
      }
      if (cfg.bench_variants.empty()) p.fail("expected at least one variant");
    } else {
      throw ConfigError(source_name + ":" + std::to_string(line_no) +
                        ": unknown config key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str(), path);
}

void apply_env_overrides(ExperimentConfig& cfg) {
  if (const char* dir = std::getenv("RANKMATCH_OUTPUT_DIR")) {
    if (dir[0] != '\0') cfg.output_dir = dir;
  }
}

}  // namespace rankmatch
