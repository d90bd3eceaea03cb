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
#include "rankmatch/model.hpp"

#include <cmath>
#include <cstddef>

#include "rankmatch/core/rng.hpp"

namespace rankmatch {
namespace {

ad::Tensor he_normal(Index rows, Index cols, Index fan_in, Rng& rng) {
  ad::Tensor t({rows, cols});
  const Real std_dev = std::sqrt(Real(2) / static_cast<Real>(fan_in));
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = std_dev * rng.normal();
  return t;
}

ad::Tensor zeros(Index rows, Index cols) {
  ad::Tensor t({rows, cols});
  return t;  // Tensor zero-initializes
}

}  // namespace

void ModelSpec::validate() const {
  if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
  if (kind == ModelKind::kMlp) {
    if (input_dim <= 0) throw ConfigError("model: input_dim must be positive");
    if (hidden_sizes.empty())
      throw ConfigError("model: mlp needs at least one hidden layer");
    for (Index h : hidden_sizes) {
      if (h <= 0) throw ConfigError("model: hidden sizes must be positive");
    }
  } else {
    if (in_channels <= 0 || image_height <= 0 || image_width <= 0)
      throw ConfigError("model: conv input geometry must be positive");
    if (conv_channels.empty())
      throw ConfigError("model: conv net needs at least one block");
    Index h = image_height, w = image_width;
    for (std::size_t i = 0; i < conv_channels.size(); ++i) {
      if (conv_channels[i] <= 0)
        throw ConfigError("model: conv channel counts must be positive");
      if (h % 2 != 0 || w % 2 != 0)
        throw ConfigError("model: spatial dims must stay even through pooling, got " +
                          std::to_string(h) + "x" + std::to_string(w) + " at block " +
                          std::to_string(i));
      h /= 2;
      w /= 2;
    }
  }
}

Index ModelSpec::input_size() const {
  return kind == ModelKind::kMlp ? input_dim
                                 : in_channels * image_height * image_width;
}

Index ModelSpec::representation_size() const {
  return kind == ModelKind::kMlp ? hidden_sizes.back() : conv_channels.back();
}

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(mix_seed(seed, 0x6d6f64656cULL));  // independent init stream
  ModelParams p;
  auto push = [&p](const std::string& name, ad::Tensor t) {
    p.names.push_back(name);
    p.values.push_back(std::move(t));
  };
  if (spec.kind == ModelKind::kMlp) {
    Index in = spec.input_dim;
    for (std::size_t i = 0; i < spec.hidden_sizes.size(); ++i) {
      const Index out = spec.hidden_sizes[i];
      push("fc" + std::to_string(i) + ".weight", he_normal(in, out, in, rng));
      push("fc" + std::to_string(i) + ".bias", zeros(1, out));
      in = out;
    }
    push("head.weight", he_normal(in, spec.num_classes, in, rng));
    push("head.bias", zeros(1, spec.num_classes));
  } else {
    Index cin = spec.in_channels;
    for (std::size_t i = 0; i < spec.conv_channels.size(); ++i) {
      const Index cout = spec.conv_channels[i];
      const Index fan_in = cin * 9;
      push("conv" + std::to_string(i) + ".weight",
           he_normal(cout, cin * 9, fan_in, rng));
      push("conv" + std::to_string(i) + ".bias", zeros(1, cout));
      cin = cout;
    }
    push("head.weight", he_normal(cin, spec.num_classes, cin, rng));
    push("head.bias", zeros(1, spec.num_classes));
  }
  return p;
}

Model::Model(ModelSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

std::vector<ad::NodeRef> Model::declare_params(ad::Graph& g,
                                               const ModelParams& params,
                                               bool requires_grad,
                                               const std::string& prefix) const {
  std::vector<ad::NodeRef> refs;
  refs.reserve(params.values.size());
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    const std::string name = prefix + params.names[i];
    ad::NodeRef r = g.input(name, params.values[i].shape(), requires_grad);
    g.bind(name, params.values[i]);
    refs.push_back(r);
  }
  return refs;
}

ModelForward Model::forward(ad::Graph& g, ad::NodeRef input,
                            const std::vector<ad::NodeRef>& params) const {
  std::size_t expected = spec_.kind == ModelKind::kMlp
                             ? 2 * (spec_.hidden_sizes.size() + 1)
                             : 2 * (spec_.conv_channels.size() + 1);
  if (params.size() != expected) {
    throw ShapeError("model forward: expected " + std::to_string(expected) +
                     " parameter nodes, got " + std::to_string(params.size()));
  }
  ModelForward out;
  std::size_t k = 0;
  if (spec_.kind == ModelKind::kMlp) {
    ad::NodeRef h = input;
    for (std::size_t i = 0; i < spec_.hidden_sizes.size(); ++i) {
      ad::NodeRef w = params[k++];
      ad::NodeRef b = params[k++];
      h = ad::relu(g, ad::add(g, ad::matmul(g, h, w), b));
    }
    out.representation = h;
    ad::NodeRef w = params[k++];
    ad::NodeRef b = params[k++];
    out.logits = ad::add(g, ad::matmul(g, h, w), b);
  } else {
    ad::NodeRef h = input;
    Index cin = spec_.in_channels;
    Index ih = spec_.image_height, iw = spec_.image_width;
    for (std::size_t i = 0; i < spec_.conv_channels.size(); ++i) {
      const Index cout = spec_.conv_channels[i];
      ad::Conv2dShape cs;
      cs.in_channels = cin;
      cs.height = ih;
      cs.width = iw;
      cs.out_channels = cout;
      ad::NodeRef w = params[k++];
      ad::NodeRef b = params[k++];
      h = ad::relu(g, ad::conv2d(g, h, w, b, cs));
      h = ad::avg_pool2(g, h, cout, ih, iw);
      cin = cout;
      ih /= 2;
      iw /= 2;
    }
    out.representation = ad::global_avg_pool(g, h, cin, ih, iw);
    ad::NodeRef w = params[k++];
    ad::NodeRef b = params[k++];
    out.logits = ad::add(g, ad::matmul(g, out.representation, w), b);
  }
  return out;
}

std::pair<MatrixXr, MatrixXr> Model::forward_values(const ModelParams& params,
                                                    const MatrixXr& inputs) const {
  if (inputs.cols() != spec_.input_size()) {
    throw ShapeError("model forward: input has " + std::to_string(inputs.cols()) +
                     " columns, expected " + std::to_string(spec_.input_size()));
  }
  ad::Graph g;
  ad::NodeRef x = g.input("x", {inputs.rows(), inputs.cols()}, false);
  g.bind("x", ad::Tensor::from_matrix(inputs));
  std::vector<ad::NodeRef> prefs = declare_params(g, params, false);
  ModelForward f = forward(g, x, prefs);
  g.forward();
  return {g.value(f.representation).matrix(), g.value(f.logits).matrix()};
}

}  // namespace rankmatch
