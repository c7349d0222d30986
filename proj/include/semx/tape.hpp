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

#ifndef SEMX_TAPE_HPP_
#define SEMX_TAPE_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "semx/tensor.hpp"

namespace semx {

enum class OpKind : std::uint8_t {
  kConstant,
  kVariable,
  kDetach,
  kMatmul,
  kConv2d,
  kRelu,
  kAvgPool2d,
  kFlatten,
  kBiasAdd,
  kScaleAdd,
  kScaleAddRows,
  kAdd,
  kSub,
  kMul,
  kScale,
  kSum,
  kMean,
  kSoftmaxCrossEntropy,
  kL2Norm,
  kRowL2Norm,
  kRowSquaredNorm,
};

std::string_view op_name(OpKind op);

/// Handle to a value recorded on a tape.
struct Var {
  std::uint32_t id = 0;
};

/// Smoothing term inside every square root taken by the norm ops. Keeps the
/// norm differentiable at the origin: sqrt(0 + eps) = 1e-6 with gradient 0.
inline constexpr double kNormEpsilon = 1e-12;

/// Scales the upstream gradient of one op kind during backward. Only used to
/// prove that gradient checks catch a broken rule.
struct BackwardFault {
  OpKind op;
  double scale;
};

/// Define-by-run reverse-mode autodiff tape.
///
/// Every op evaluates eagerly, appends a record holding its output and the
/// ids of its inputs, and returns a Var. Records are appended in evaluation
/// order so the tape is always topologically sorted; backward() walks it in
/// reverse once. A tape is single-use and single-threaded: build a fresh one
/// for each forward pass.
///
/// Forward outputs are checked for NaN/Inf and a NumericError is thrown at
/// the first op that produces one.
template <typename T>
class BasicTape {
 public:
  using TensorT = BasicTensor<T>;

  BasicTape() = default;
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;
  BasicTape(BasicTape&&) = default;
  BasicTape& operator=(BasicTape&&) = default;

  /// Leaf that never receives a gradient.
  Var constant(TensorT value);
  /// Leaf whose gradient is populated by backward().
  Var variable(TensorT value);
  /// Same value as `v` with the gradient path cut.
  Var detach(Var v);

  Var matmul(Var a, Var b);
  /// Cross-correlation with zero padding. input [N,C,H,W], kernel [F,C,kh,kw].
  Var conv2d(Var input, Var kernel, std::size_t stride, std::size_t pad);
  Var relu(Var a);
  /// Non-overlapping average pooling over window x window tiles of [N,C,H,W].
  Var avgpool2d(Var a, std::size_t window);
  /// [N, ...] -> [N, prod(...)].
  Var flatten(Var a);
  /// a [N,F] with bias [F], or a [N,C,H,W] with per-channel bias [C].
  Var bias_add(Var a, Var bias);
  /// lambda * a + (1 - lambda) * b.
  Var scale_add(Var a, Var b, double lambda);
  /// Row-wise scale_add: row n uses weights[n]. a and b are [N, ...].
  Var scale_add_rows(Var a, Var b, std::span<const double> weights);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  /// Elementwise product.
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var sum(Var a);
  Var mean(Var a);
  /// Mean over rows of -sum_k t_k log softmax(logits)_k. Rows of targets
  /// must be probability vectors (sum 1 within 1e-5); K >= 2.
  Var softmax_cross_entropy(Var logits, Var targets);
  /// sqrt(sum v^2 + eps) over the whole tensor.
  Var l2_norm(Var v);
  /// Per-row sqrt(sum v^2 + eps) of [N, ...] -> [N].
  Var row_l2_norm(Var v);
  /// Per-row sum v^2 of [N, ...] -> [N].
  Var row_squared_norm(Var v);

  /// Populates gradients of every variable reachable from `loss`, which must
  /// hold exactly one element. Gradients from repeated uses accumulate.
  void backward(Var loss);

  const TensorT& value(Var v) const { return node(v).value; }
  /// Gradient after backward(); zeros when nothing flowed into `v`.
  TensorT grad(Var v) const;
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  OpKind op(Var v) const { return node(v).op; }
  std::size_t size() const { return nodes_.size(); }

  void set_backward_fault(std::optional<BackwardFault> fault) {
    fault_ = fault;
  }

 private:
  struct Node {
    OpKind op;
    std::uint32_t in0 = 0;
    std::uint32_t in1 = 0;
    bool requires_grad = false;
    TensorT value;
    TensorT grad;  // allocated lazily during backward
    bool has_grad = false;
    double lambda = 0.0;
    std::size_t stride = 0;
    std::size_t pad = 0;
    std::vector<double> row_weights;
    TensorT saved;  // log-softmax for cross entropy
    std::unique_ptr<T[]> col;  // conv: im2col of the input
  };

  const Node& node(Var v) const;
  Node& node(Var v);
  Var push(Node n);
  TensorT& grad_slot(std::uint32_t id);
  void propagate(std::uint32_t id);

  std::vector<Node> nodes_;
  std::optional<BackwardFault> fault_;
};

using Tape = BasicTape<float>;
using Tape64 = BasicTape<double>;

extern template class BasicTape<float>;
extern template class BasicTape<double>;

}  // namespace semx

#endif  // SEMX_TAPE_HPP_
