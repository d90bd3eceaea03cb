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
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "rankmatch/checkpoint.hpp"
#include "rankmatch/model.hpp"
#include "rankmatch/optim.hpp"
#include "test_support.hpp"

using rankmatch::EmaAverager;
using rankmatch::Index;
using rankmatch::MatrixXr;
using rankmatch::Model;
using rankmatch::ModelKind;
using rankmatch::ModelParams;
using rankmatch::ModelSpec;
using rankmatch::OptimConfig;
using rankmatch::Real;
using rankmatch::Rng;
using rankmatch::SgdNesterov;

namespace {

ModelSpec tiny_mlp() {
  ModelSpec spec;
  spec.kind = ModelKind::kMlp;
  spec.num_classes = 3;
  spec.input_dim = 4;
  spec.hidden_sizes = {6};
  return spec;
}

ModelParams scalar_params(double value) {
  ModelParams p;
  p.names = {"w"};
  p.values = {rankmatch::ad::Tensor({1, 1}, {value})};
  return p;
}

}  // namespace

TEST_CASE("model initialization is deterministic in the seed") {
  const ModelSpec spec = tiny_mlp();
  const ModelParams a = rankmatch::init_params(spec, 5);
  const ModelParams b = rankmatch::init_params(spec, 5);
  const ModelParams c = rankmatch::init_params(spec, 6);
  REQUIRE(a.names == b.names);
  bool identical = true, differs = false;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (MatrixXr(a.values[i].matrix()) != MatrixXr(b.values[i].matrix()))
      identical = false;
    if (MatrixXr(a.values[i].matrix()) != MatrixXr(c.values[i].matrix()))
      differs = true;
  }
  CHECK(identical);
  CHECK(differs);
  // 4*6 + 6 + 6*3 + 3 parameters
  CHECK(a.parameter_count() == 51);
  CHECK(a.names == std::vector<std::string>({"fc0.weight", "fc0.bias",
                                             "head.weight", "head.bias"}));
  // biases start at zero
  CHECK(MatrixXr(a.values[1].matrix()).isZero(0.0));
}

TEST_CASE("mlp forward_values shapes and determinism") {
  const ModelSpec spec = tiny_mlp();
  const Model model(spec);
  const ModelParams params = rankmatch::init_params(spec, 5);
  Rng rng(7);
  MatrixXr x(5, 4);
  for (Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  const auto [repr, logits] = model.forward_values(params, x);
  CHECK(repr.rows() == 5);
  CHECK(repr.cols() == 6);
  CHECK(logits.rows() == 5);
  CHECK(logits.cols() == 3);
  const auto [repr2, logits2] = model.forward_values(params, x);
  CHECK(logits == logits2);
  CHECK(repr == repr2);
  // representation is post-ReLU: non-negative
  CHECK(repr.minCoeff() >= 0.0);
}

TEST_CASE("mini conv model runs on small images") {
  ModelSpec spec;
  spec.kind = ModelKind::kMiniConv;
  spec.num_classes = 2;
  spec.in_channels = 1;
  spec.image_height = 4;
  spec.image_width = 4;
  spec.conv_channels = {2, 3};
  spec.validate();
  CHECK(spec.input_size() == 16);
  CHECK(spec.representation_size() == 3);

  const Model model(spec);
  const ModelParams params = rankmatch::init_params(spec, 9);
  MatrixXr x = MatrixXr::Random(3, 16);
  const auto [repr, logits] = model.forward_values(params, x);
  CHECK(repr.rows() == 3);
  CHECK(repr.cols() == 3);
  CHECK(logits.cols() == 2);
  CHECK(logits.allFinite());

  // odd spatial dims cannot pass the pooling chain
  ModelSpec bad = spec;
  bad.image_height = 5;
  CHECK_THROWS_AS(bad.validate(), rankmatch::ConfigError);
}

TEST_CASE("cosine schedule frozen values and monotonicity") {
  using rankmatch::cosine_lr;
  CHECK(cosine_lr(0.03, 0, 1000) == 0.03);  // exactly base at step 0
  CHECK(std::abs(cosine_lr(0.03, 1000, 1000) - 0.0058527096604838480) < 1e-12);
  CHECK(std::abs(cosine_lr(0.03, 500, 1000) - 0.023190313600882109) < 1e-12);

  Real prev = cosine_lr(0.03, 0, 1000);
  for (Index s = 1; s <= 1000; ++s) {
    const Real cur = cosine_lr(0.03, s, 1000);
    CHECK(cur < prev);
    CHECK(cur > 0.0);
    prev = cur;
  }

  CHECK_THROWS_AS(cosine_lr(0.03, 0, 0), rankmatch::ConfigError);
  CHECK_THROWS_AS(cosine_lr(0.03, -1, 10), rankmatch::ConfigError);
  CHECK_THROWS_AS(cosine_lr(0.03, 11, 10), rankmatch::ConfigError);
}

TEST_CASE("nesterov update matches the closed-form trace") {
  OptimConfig cfg;
  cfg.base_lr = 0.03;
  cfg.momentum = 0.9;
  cfg.weight_decay = 0.0005;
  cfg.nesterov = true;
  SgdNesterov opt(cfg);

  ModelParams p = scalar_params(1.0);

  // step 1: g = 0.2 + 0.0005*1 = 0.2005; v = 0.2005;
  //         theta = 1 - 0.03*(0.2005 + 0.9*0.2005) = 0.9885715
  std::vector<rankmatch::ad::Tensor> g1 = {rankmatch::ad::Tensor({1, 1}, {0.2})};
  opt.step(p, g1, 0.03);
  CHECK(std::abs(p.values[0][0] - 0.9885715) < 1e-15);
  CHECK(std::abs(opt.velocity()[0][0] - 0.2005) < 1e-15);

  // step 2: g = -0.1 + 0.0005*0.9885715; v = 0.9*0.2005 + g;
  //         theta -= 0.03*(g + 0.9*v)
  std::vector<rankmatch::ad::Tensor> g2 = {rankmatch::ad::Tensor({1, 1}, {-0.1})};
  opt.step(p, g2, 0.03);
  CHECK(std::abs(p.values[0][0] - 0.98937117571225) < 1e-14);
  CHECK(std::abs(opt.velocity()[0][0] - 0.08094428575) < 1e-15);
}

TEST_CASE("plain momentum differs from nesterov") {
  OptimConfig cfg;
  cfg.momentum = 0.9;
  cfg.weight_decay = 0.0;
  cfg.nesterov = false;
  SgdNesterov opt(cfg);
  ModelParams p = scalar_params(1.0);
  std::vector<rankmatch::ad::Tensor> g = {rankmatch::ad::Tensor({1, 1}, {0.5})};
  opt.step(p, g, 0.1);
  // v = 0.5; theta = 1 - 0.1*0.5
  CHECK(std::abs(p.values[0][0] - 0.95) < 1e-15);
  opt.step(p, g, 0.1);
  // v = 0.95; theta = 0.95 - 0.095
  CHECK(std::abs(p.values[0][0] - 0.855) < 1e-15);
}

TEST_CASE("optimizer rejects misaligned or non-finite gradients") {
  SgdNesterov opt(OptimConfig{});
  ModelParams p = scalar_params(1.0);
  std::vector<rankmatch::ad::Tensor> wrong_count;
  CHECK_THROWS_AS(opt.step(p, wrong_count, 0.01), rankmatch::Error);

  std::vector<rankmatch::ad::Tensor> wrong_shape = {
      rankmatch::ad::Tensor({1, 2}, {0.0, 0.0})};
  CHECK_THROWS_AS(opt.step(p, wrong_shape, 0.01), rankmatch::Error);

  std::vector<rankmatch::ad::Tensor> bad = {
      rankmatch::ad::Tensor({1, 1}, {std::nan("")})};
  try {
    opt.step(p, bad, 0.01);
    FAIL("expected NumericError");
  } catch (const rankmatch::NumericError& e) {
    CHECK(std::string(e.what()).find("w") != std::string::npos);
  }
}

TEST_CASE("ema starts at the initial parameters and follows the recurrence") {
  EmaAverager ema(0.999);
  CHECK_FALSE(ema.initialized());
  CHECK_THROWS_AS(ema.shadow(), rankmatch::Error);

  ModelParams p = scalar_params(2.0);
  ema.update(p);  // first update seeds the shadow
  CHECK(ema.initialized());
  CHECK(ema.shadow().values[0][0] == 2.0);

  p.values[0][0] = 1.0;
  ema.update(p);
  // 0.999*2 + 0.001*1
  CHECK(std::abs(ema.shadow().values[0][0] - 1.999) < 1e-15);

  // k more updates against the same value follow the closed form
  const int k = 10;
  for (int i = 0; i < k; ++i) ema.update(p);
  const double want = std::pow(0.999, k) * 1.999 + (1.0 - std::pow(0.999, k)) * 1.0;
  CHECK(std::abs(ema.shadow().values[0][0] - want) < 5e-14);

  // fixed point: updating with the shadow's own value leaves it unchanged
  EmaAverager fix(0.9);
  ModelParams q = scalar_params(0.5);
  fix.update(q);
  fix.update(q);
  CHECK(fix.shadow().values[0][0] == 0.5);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const ModelSpec spec = tiny_mlp();
  const ModelParams params = rankmatch::init_params(spec, 31);
  const auto dir = testsupport::scratch_dir("checkpoint");
  const std::string path = (dir / "model.ckpt").string();
  rankmatch::save_checkpoint(path, params);
  const ModelParams loaded = rankmatch::load_checkpoint(path);
  REQUIRE(loaded.names == params.names);
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    CHECK(MatrixXr(loaded.values[i].matrix()) ==
          MatrixXr(params.values[i].matrix()));
  }
}

TEST_CASE("checkpoint loader rejects malformed files with offsets") {
  const auto dir = testsupport::scratch_dir("checkpoint_bad");
  const ModelParams params = rankmatch::init_params(tiny_mlp(), 1);
  const std::string good = (dir / "good.ckpt").string();
  rankmatch::save_checkpoint(good, params);

  // truncate mid-tensor
  {
    std::ifstream in(good, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    const std::string cut = (dir / "cut.ckpt").string();
    std::ofstream out(cut, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 7));
    out.close();
    try {
      rankmatch::load_checkpoint(cut);
      FAIL("expected DataFormatError");
    } catch (const rankmatch::DataFormatError& e) {
      CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
  }

  // bad magic
  {
    const std::string bad = (dir / "bad_magic.ckpt").string();
    std::ofstream out(bad, std::ios::binary);
    out << "NOTMAGIC" << std::string(16, '\0');
    out.close();
    CHECK_THROWS_AS(rankmatch::load_checkpoint(bad),
                    rankmatch::DataFormatError);
  }

  // trailing garbage
  {
    std::ifstream in(good, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    const std::string fat = (dir / "fat.ckpt").string();
    std::ofstream out(fat, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out << "extra";
    out.close();
    CHECK_THROWS_AS(rankmatch::load_checkpoint(fat),
                    rankmatch::DataFormatError);
  }

  CHECK_THROWS_AS(rankmatch::load_checkpoint((dir / "missing.ckpt").string()),
                  rankmatch::Error);
}

TEST_CASE("optim config validation") {
  OptimConfig cfg;
  cfg.base_lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), rankmatch::ConfigError);
  cfg = OptimConfig{};
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(cfg.validate(), rankmatch::ConfigError);
  cfg = OptimConfig{};
  cfg.weight_decay = -1e-9;
  CHECK_THROWS_AS(cfg.validate(), rankmatch::ConfigError);
}
