// Copyright 2026 The SEMX Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "semx/model.hpp"

#include <algorithm>
#include <cmath>

#include "semx/rng.hpp"

namespace semx {

LayerSpec LayerSpec::conv(std::size_t in, std::size_t out, std::size_t kernel,
                          std::size_t stride, std::size_t pad) {
  LayerSpec l;
  l.kind = LayerKind::kConv;
  l.in = in;
  l.out = out;
  l.kernel = kernel;
  l.stride = stride;
  l.pad = pad;
  return l;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::avgpool(std::size_t window) {
  LayerSpec l;
  l.kind = LayerKind::kAvgPool;
  l.window = window;
  return l;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec l;
  l.kind = LayerKind::kFlatten;
  return l;
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  LayerSpec l;
  l.kind = LayerKind::kDense;
  l.in = in;
  l.out = out;
  return l;
}

namespace {

// Per-sample output shape of `layer` applied to `in`.
Shape layer_output(const LayerSpec& layer, const Shape& in, std::size_t index) {
  const auto fail = [&](const std::string& what) {
    throw ConfigError("layer " + std::to_string(index) + ": " + what +
                      " (input " + shape_to_string(in) + ")");
  };
  switch (layer.kind) {
    case LayerKind::kConv: {
      if (in.size() != 3 || in[0] != layer.in) fail("conv channel mismatch");
      if (layer.out == 0 || layer.kernel == 0 || layer.stride == 0) {
        fail("conv extents must be positive");
      }
      const std::size_t hp = in[1] + 2 * layer.pad, wp = in[2] + 2 * layer.pad;
      if (layer.kernel > hp || layer.kernel > wp ||
          (hp - layer.kernel) % layer.stride != 0 ||
          (wp - layer.kernel) % layer.stride != 0) {
        fail("conv output extent is not integral");
      }
      return {layer.out, (hp - layer.kernel) / layer.stride + 1,
              (wp - layer.kernel) / layer.stride + 1};
    }
    case LayerKind::kRelu:
      return in;
    case LayerKind::kAvgPool:
      if (in.size() != 3 || layer.window == 0 || in[1] % layer.window != 0 ||
          in[2] % layer.window != 0) {
        fail("pool window does not tile the input");
      }
      return {in[0], in[1] / layer.window, in[2] / layer.window};
    case LayerKind::kFlatten:
      return {shape_size(in)};
    case LayerKind::kDense:
      if (in.size() != 1 || in[0] != layer.in) fail("dense input mismatch");
      if (layer.out == 0) fail("dense output must be positive");
      return {layer.out};
  }
  return in;
}

}  // namespace

void ModelSpec::validate() const {
  if (input_shape.empty() ||
      std::any_of(input_shape.begin(), input_shape.end(),
                  [](std::size_t e) { return e == 0; })) {
    throw ConfigError("model input shape must be non-empty and positive");
  }
  if (class_count < 2) throw ConfigError("model needs at least two classes");
  Shape s = input_shape;
  for (std::size_t i = 0; i < extractor.size(); ++i) {
    s = layer_output(extractor[i], s, i);
  }
  if (s != Shape{representation_dim}) {
    throw ConfigError("extractor ends in " + shape_to_string(s) +
                      ", expected [" + std::to_string(representation_dim) + "]");
  }
  if (head.kind != LayerKind::kDense || head.in != representation_dim ||
      head.out != class_count) {
    throw ConfigError("head must be a single dense layer " +
                      std::to_string(representation_dim) + " -> " +
                      std::to_string(class_count));
  }
}

Model Model::create(ModelSpec spec, std::uint64_t seed) {
  spec.validate();
  Model m;
  m.spec_ = std::move(spec);
  Rng rng(seed);
  const auto add_layer = [&](const LayerSpec& l, const std::string& prefix) {
    Shape wshape;
    std::size_t fan_in;
    if (l.kind == LayerKind::kConv) {
      wshape = {l.out, l.in, l.kernel, l.kernel};
      fan_in = l.in * l.kernel * l.kernel;
    } else {
      wshape = {l.in, l.out};
      fan_in = l.in;
    }
    Tensor w(wshape);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (float& v : w.data()) {
      v = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
    }
    m.params_.push_back(std::move(w));
    m.names_.push_back(prefix + ".weight");
    m.params_.emplace_back(Shape{l.out});
    m.names_.push_back(prefix + ".bias");
  };
  for (std::size_t i = 0; i < m.spec_.extractor.size(); ++i) {
    const LayerSpec& l = m.spec_.extractor[i];
    if (l.has_parameters()) add_layer(l, "g." + std::to_string(i));
  }
  add_layer(m.spec_.head, "q");
  return m;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& p : params_) n += p.size();
  return n;
}

std::size_t Model::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw UsageError("no parameter named " + name);
  return static_cast<std::size_t>(it - names_.begin());
}

const Tensor& Model::parameter(const std::string& name) const {
  return params_[index_of(name)];
}

void Model::set_parameter(const std::string& name, Tensor value) {
  Tensor& slot = params_[index_of(name)];
  if (slot.shape() != value.shape()) {
    throw DimensionError("parameter " + name + " has shape " +
                         shape_to_string(slot.shape()) + ", got " +
                         shape_to_string(value.shape()));
  }
  slot = std::move(value);
}

Model small_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                std::size_t class_count, std::uint64_t seed,
                Activation activation) {
  return small_mlp(Shape{input_dim}, hidden, class_count, seed, activation);
}

Model small_mlp(const Shape& input_shape, const std::vector<std::size_t>& hidden,
                std::size_t class_count, std::uint64_t seed,
                Activation activation) {
  if (hidden.empty()) throw ConfigError("small_mlp needs at least one hidden layer");
  if (input_shape.empty() || shape_size(input_shape) == 0 || class_count == 0 ||
      std::any_of(hidden.begin(), hidden.end(), [](std::size_t h) { return h == 0; })) {
    throw ConfigError("small_mlp dimensions must be positive");
  }
  ModelSpec spec;
  spec.input_shape = input_shape;
  if (input_shape.size() > 1) spec.extractor.push_back(LayerSpec::flatten());
  std::size_t width = shape_size(input_shape);
  for (std::size_t h : hidden) {
    spec.extractor.push_back(LayerSpec::dense(width, h));
    if (activation == Activation::kRelu) spec.extractor.push_back(LayerSpec::relu());
    width = h;
  }
  spec.representation_dim = width;
  spec.class_count = class_count;
  spec.head = LayerSpec::dense(width, class_count);
  return Model::create(std::move(spec), seed);
}

Model small_cnn(std::size_t channels, std::size_t image_hw,
                std::size_t class_count, std::uint64_t seed) {
  if (image_hw < 8 || image_hw % 8 != 0) {
    throw ConfigError("small_cnn image size must be a positive multiple of 8, got " +
                      std::to_string(image_hw));
  }
  if (channels == 0) throw ConfigError("small_cnn needs at least one channel");
  constexpr std::size_t kFilters = 16;
  ModelSpec spec;
  spec.input_shape = {channels, image_hw, image_hw};
  std::size_t in = channels;
  for (int block = 0; block < 3; ++block) {
    spec.extractor.push_back(LayerSpec::conv(in, kFilters, 3, 1, 1));
    spec.extractor.push_back(LayerSpec::relu());
    spec.extractor.push_back(LayerSpec::avgpool(2));
    in = kFilters;
  }
  spec.extractor.push_back(LayerSpec::flatten());
  const std::size_t side = image_hw / 8;
  spec.extractor.push_back(
      LayerSpec::dense(kFilters * side * side, kCnnRepresentationDim));
  spec.representation_dim = kCnnRepresentationDim;
  spec.class_count = class_count;
  spec.head = LayerSpec::dense(kCnnRepresentationDim, class_count);
  return Model::create(std::move(spec), seed);
}

template <typename T>
std::vector<Var> bind_parameters(BasicTape<T>& tape, const Model& model) {
  std::vector<Var> vars;
  vars.reserve(model.parameters().size());
  for (const Tensor& p : model.parameters()) {
    if constexpr (std::is_same_v<T, float>) {
      vars.push_back(tape.variable(p));
    } else {
      vars.push_back(tape.variable(p.template cast<T>()));
    }
  }
  return vars;
}

template <typename T>
std::vector<Var> bind_parameters(BasicTape<T>& tape,
                                 std::span<const BasicTensor<T>> values) {
  std::vector<Var> vars;
  vars.reserve(values.size());
  for (const auto& v : values) vars.push_back(tape.variable(v));
  return vars;
}

template <typename T>
ForwardOutput forward(BasicTape<T>& tape, const ModelSpec& spec,
                      std::span<const Var> params, Var x) {
  const Shape& xs = tape.value(x).shape();
  if (xs.size() != spec.input_shape.size() + 1 ||
      !std::equal(spec.input_shape.begin(), spec.input_shape.end(), xs.begin() + 1)) {
    throw DimensionError("model expects input [N]" +
                         shape_to_string(spec.input_shape) + ", got " +
                         shape_to_string(xs));
  }
  std::size_t p = 0;
  const auto next = [&]() {
    if (p >= params.size()) throw UsageError("too few bound parameters");
    return params[p++];
  };
  Var h = x;
  for (const LayerSpec& l : spec.extractor) {
    switch (l.kind) {
      case LayerKind::kConv: {
        const Var w = next();
        const Var b = next();
        h = tape.bias_add(tape.conv2d(h, w, l.stride, l.pad), b);
        break;
      }
      case LayerKind::kRelu:
        h = tape.relu(h);
        break;
      case LayerKind::kAvgPool:
        h = tape.avgpool2d(h, l.window);
        break;
      case LayerKind::kFlatten:
        h = tape.flatten(h);
        break;
      case LayerKind::kDense: {
        const Var w = next();
        const Var b = next();
        h = tape.bias_add(tape.matmul(h, w), b);
        break;
      }
    }
  }
  const Var representation = h;
  const Var w = next();
  const Var b = next();
  const Var logits = tape.bias_add(tape.matmul(representation, w), b);
  if (p != params.size()) throw UsageError("too many bound parameters");
  return {representation, logits};
}

Inference infer(const Model& model, const Tensor& x, std::size_t chunk) {
  if (x.rank() == 0) throw DimensionError("infer needs a batch");
  if (chunk == 0) chunk = x.dim(0);
  std::vector<Tensor> reps, logits;
  for (std::size_t begin = 0; begin < x.dim(0); begin += chunk) {
    const std::size_t end = std::min(x.dim(0), begin + chunk);
    Tape tape;
    std::vector<Var> params;
    params.reserve(model.parameters().size());
    for (const Tensor& t : model.parameters()) params.push_back(tape.constant(t));
    const Var in = tape.constant(begin == 0 && end == x.dim(0) ? x : slice_rows(x, begin, end));
    const ForwardOutput out = forward(tape, model.spec(), params, in);
    reps.push_back(tape.value(out.representation));
    logits.push_back(tape.value(out.logits));
  }
  return {concat_rows<float>(reps), concat_rows<float>(logits)};
}

template std::vector<Var> bind_parameters<float>(Tape&, const Model&);
template std::vector<Var> bind_parameters<double>(Tape64&, const Model&);
template std::vector<Var> bind_parameters<float>(Tape&, std::span<const Tensor>);
template std::vector<Var> bind_parameters<double>(Tape64&, std::span<const Tensor64>);
template ForwardOutput forward<float>(Tape&, const ModelSpec&, std::span<const Var>, Var);
template ForwardOutput forward<double>(Tape64&, const ModelSpec&, std::span<const Var>, Var);

}  // namespace semx
