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

#ifndef SEMX_MODEL_HPP_
#define SEMX_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semx/tape.hpp"
#include "semx/tensor.hpp"

namespace semx {

enum class LayerKind { kConv, kRelu, kAvgPool, kFlatten, kDense };

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::size_t in = 0;   // input channels (conv) or features (dense)
  std::size_t out = 0;  // output channels (conv) or features (dense)
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t window = 0;  // avgpool

  static LayerSpec conv(std::size_t in, std::size_t out, std::size_t kernel,
                        std::size_t stride, std::size_t pad);
  static LayerSpec relu();
  static LayerSpec avgpool(std::size_t window);
  static LayerSpec flatten();
  static LayerSpec dense(std::size_t in, std::size_t out);

  bool has_parameters() const {
    return kind == LayerKind::kConv || kind == LayerKind::kDense;
  }
};

/// Architecture of a classifier f = q(g(x)): the feature extractor g is an
/// arbitrary layer stack ending in a [N, representation_dim] activation, and
/// the head q is exactly one dense layer to class_count logits.
struct ModelSpec {
  Shape input_shape;  // per sample, e.g. {1, 16, 16} or {64}
  std::vector<LayerSpec> extractor;
  LayerSpec head;
  std::size_t representation_dim = 0;
  std::size_t class_count = 0;

  /// Walks the stack and throws ConfigError on any inconsistency.
  void validate() const;
};

/// Representation and logits from one forward pass.
struct ForwardOutput {
  Var representation;
  Var logits;
};

/// A ModelSpec plus its parameter values.
///
/// Parameters are stored in layer order as weight then bias, named
/// "g.<layer>.weight" / "g.<layer>.bias" for the extractor and "q.weight" /
/// "q.bias" for the head. Dense weights are [in, out]; conv kernels are
/// [F, C, k, k].
class Model {
 public:
  /// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  static Model create(ModelSpec spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  std::span<Tensor> parameters() { return params_; }
  std::span<const Tensor> parameters() const { return params_; }
  const std::vector<std::string>& parameter_names() const { return names_; }
  std::size_t parameter_count() const;

  const Tensor& parameter(const std::string& name) const;
  /// Replaces a parameter; shape must match.
  void set_parameter(const std::string& name, Tensor value);

 private:
  Model() = default;
  std::size_t index_of(const std::string& name) const;

  ModelSpec spec_;
  std::vector<Tensor> params_;
  std::vector<std::string> names_;
};

enum class Activation { kRelu, kNone };

/// Dense stack input_dim -> hidden... as g, dense hidden.back() -> K as q.
/// Activation::kNone gives an affine extractor.
Model small_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                std::size_t class_count, std::uint64_t seed,
                Activation activation = Activation::kRelu);

/// Same, for image-shaped input that is flattened first.
Model small_mlp(const Shape& input_shape, const std::vector<std::size_t>& hidden,
                std::size_t class_count, std::uint64_t seed,
                Activation activation = Activation::kRelu);

/// Three conv(3x3, 16, pad 1)-relu-avgpool(2) blocks, flatten, dense to a
/// 64-wide representation; dense 64 -> K head. image_hw must be a positive
/// multiple of 8.
Model small_cnn(std::size_t channels, std::size_t image_hw,
                std::size_t class_count, std::uint64_t seed);

inline constexpr std::size_t kCnnRepresentationDim = 64;

/// Model parameters as tape variables, in parameter order.
template <typename T>
std::vector<Var> bind_parameters(BasicTape<T>& tape, const Model& model);

/// Explicit parameter values (same order and shapes as the model's), e.g. a
/// perturbed double-precision copy for finite differences.
template <typename T>
std::vector<Var> bind_parameters(BasicTape<T>& tape,
                                 std::span<const BasicTensor<T>> values);

/// Records g and q on the tape. `x` is [N, input_shape...].
template <typename T>
ForwardOutput forward(BasicTape<T>& tape, const ModelSpec& spec,
                      std::span<const Var> params, Var x);

/// Gradient-free inference result.
struct Inference {
  Tensor representation;  // [N, representation_dim]
  Tensor logits;          // [N, K]
};

/// Runs the model without recording gradients, in chunks of `chunk` rows.
Inference infer(const Model& model, const Tensor& x, std::size_t chunk = 256);

}  // namespace semx

#endif  // SEMX_MODEL_HPP_
