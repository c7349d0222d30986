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

#include "semx/tape.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <string>

namespace semx {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::string_view op_name(OpKind op) {
  switch (op) {
    case OpKind::kConstant: return "constant";
    case OpKind::kVariable: return "variable";
    case OpKind::kDetach: return "detach";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kRelu: return "relu";
    case OpKind::kAvgPool2d: return "avgpool2d";
    case OpKind::kFlatten: return "flatten";
    case OpKind::kBiasAdd: return "bias_add";
    case OpKind::kScaleAdd: return "scale_add";
    case OpKind::kScaleAddRows: return "scale_add_rows";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kSoftmaxCrossEntropy: return "softmax_cross_entropy";
    case OpKind::kL2Norm: return "l2_norm";
    case OpKind::kRowL2Norm: return "row_l2_norm";
    case OpKind::kRowSquaredNorm: return "row_squared_norm";
  }
  return "unknown";
}

namespace {

template <typename T>
using RowMajor =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMajor<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMajor<T>>;

template <typename T>
ConstMatMap<T> as_matrix(const BasicTensor<T>& t, std::size_t rows,
                         std::size_t cols) {
  return ConstMatMap<T>(t.data().data(), static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
}

template <typename T>
MatMap<T> as_matrix(BasicTensor<T>& t, std::size_t rows, std::size_t cols) {
  return MatMap<T>(t.data().data(), static_cast<Eigen::Index>(rows),
                   static_cast<Eigen::Index>(cols));
}

// Wider type for reductions; float work accumulates in double.
template <typename T>
using Accum = double;

template <typename T>
void ensure_finite(const BasicTensor<T>& t, OpKind op) {
  if (!t.all_finite()) {
    throw NumericError("non-finite value produced by " +
                       std::string(op_name(op)));
  }
}

void require_same_shape(const Shape& a, const Shape& b, std::string_view op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape " + shape_to_string(a) +
                         " vs " + shape_to_string(b));
  }
}

struct ConvGeometry {
  std::size_t n, c, h, w, f, kh, kw, stride, pad, ho, wo;
  std::size_t patch() const { return c * kh * kw; }
  std::size_t positions() const { return ho * wo; }
};

ConvGeometry conv_geometry(const Shape& in, const Shape& k, std::size_t stride,
                           std::size_t pad) {
  if (in.size() != 4 || k.size() != 4) {
    throw DimensionError("conv2d expects [N,C,H,W] input and [F,C,kh,kw] "
                         "kernel, got " +
                         shape_to_string(in) + " and " + shape_to_string(k));
  }
  if (in[1] != k[1]) {
    throw DimensionError("conv2d channel mismatch: " + shape_to_string(in) +
                         " vs " + shape_to_string(k));
  }
  if (stride == 0) throw DimensionError("conv2d stride must be positive");
  const std::size_t hp = in[2] + 2 * pad;
  const std::size_t wp = in[3] + 2 * pad;
  if (k[2] > hp || k[3] > wp) {
    throw DimensionError("conv2d kernel " + shape_to_string(k) +
                         " larger than padded input " + shape_to_string(in));
  }
  if ((hp - k[2]) % stride != 0 || (wp - k[3]) % stride != 0) {
    throw DimensionError("conv2d output extent is not integral for input " +
                         shape_to_string(in) + ", kernel " +
                         shape_to_string(k) + ", stride " +
                         std::to_string(stride) + ", pad " +
                         std::to_string(pad));
  }
  return {in[0],  in[1], in[2], in[3],  k[0],
          k[2],   k[3],  stride, pad,
          (hp - k[2]) / stride + 1, (wp - k[3]) / stride + 1};
}

// Output positions o in [lo, hi) read input index o * stride + off - pad
// inside [0, extent).
struct Span {
  std::size_t lo, hi;
};

Span valid_outputs(std::size_t off, std::size_t extent, std::size_t out_extent,
                   std::size_t stride, std::size_t pad) {
  std::size_t lo = off >= pad ? 0 : (pad - off + stride - 1) / stride;
  std::size_t hi = 0;
  if (extent - 1 + pad >= off) hi = std::min(out_extent, (extent - 1 + pad - off) / stride + 1);
  lo = std::min(lo, hi);
  return {lo, hi};
}

// col is [C*kh*kw, N*Ho*Wo].
template <typename T>
std::unique_ptr<T[]> im2col(const BasicTensor<T>& x, const ConvGeometry& g) {
  const std::size_t cols = g.n * g.positions();
  std::unique_ptr<T[]> col(new T[g.patch() * cols]);
  const T* src = x.data().data();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      const Span ys = valid_outputs(i, g.h, g.ho, g.stride, g.pad);
      for (std::size_t j = 0; j < g.kw; ++j) {
        const Span xs = valid_outputs(j, g.w, g.wo, g.stride, g.pad);
        T* row = col.get() + ((c * g.kh + i) * g.kw + j) * cols;
        for (std::size_t n = 0; n < g.n; ++n) {
          const T* plane = src + (n * g.c + c) * g.h * g.w;
          T* out = row + n * g.positions();
          for (std::size_t oy = 0; oy < g.ho; ++oy) {
            T* o = out + oy * g.wo;
            if (oy < ys.lo || oy >= ys.hi) {
              std::fill(o, o + g.wo, T{0});
              continue;
            }
            std::fill(o, o + xs.lo, T{0});
            std::fill(o + xs.hi, o + g.wo, T{0});
            const T* s = plane + (oy * g.stride + i - g.pad) * g.w +
                         (xs.lo * g.stride + j - g.pad);
            if (g.stride == 1) {
              std::copy(s, s + (xs.hi - xs.lo), o + xs.lo);
            } else {
              for (std::size_t ox = xs.lo; ox < xs.hi; ++ox) o[ox] = s[(ox - xs.lo) * g.stride];
            }
          }
        }
      }
    }
  }
  return col;
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, BasicTensor<T>& dx) {
  const std::size_t cols = g.n * g.positions();
  T* dst = dx.data().data();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      const Span ys = valid_outputs(i, g.h, g.ho, g.stride, g.pad);
      for (std::size_t j = 0; j < g.kw; ++j) {
        const Span xs = valid_outputs(j, g.w, g.wo, g.stride, g.pad);
        const T* row = col + ((c * g.kh + i) * g.kw + j) * cols;
        for (std::size_t n = 0; n < g.n; ++n) {
          T* plane = dst + (n * g.c + c) * g.h * g.w;
          const T* in = row + n * g.positions();
          for (std::size_t oy = ys.lo; oy < ys.hi; ++oy) {
            const T* src = in + oy * g.wo;
            T* d = plane + (oy * g.stride + i - g.pad) * g.w +
                   (xs.lo * g.stride + j - g.pad);
            for (std::size_t ox = xs.lo; ox < xs.hi; ++ox) {
              d[(ox - xs.lo) * g.stride] += src[ox];
            }
          }
        }
      }
    }
  }
}

std::size_t leading_rows(const Shape& s, std::string_view op) {
  if (s.empty()) {
    throw DimensionError(std::string(op) + " needs a tensor with a row axis");
  }
  return s[0];
}

}  // namespace

template <typename T>
auto BasicTape<T>::node(Var v) const -> const Node& {
  if (v.id >= nodes_.size()) throw UsageError("Var does not belong to tape");
  return nodes_[v.id];
}

template <typename T>
auto BasicTape<T>::node(Var v) -> Node& {
  if (v.id >= nodes_.size()) throw UsageError("Var does not belong to tape");
  return nodes_[v.id];
}

template <typename T>
Var BasicTape<T>::push(Node n) {
  if (n.op != OpKind::kConstant && n.op != OpKind::kVariable) {
    ensure_finite(n.value, n.op);
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Var BasicTape<T>::constant(TensorT value) {
  Node n{.op = OpKind::kConstant};
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::variable(TensorT value) {
  Node n{.op = OpKind::kVariable};
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::detach(Var v) {
  Node n{.op = OpKind::kDetach, .in0 = v.id};
  n.value = node(v).value;
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::matmul(Var a, Var b) {
  const TensorT& A = node(a).value;
  const TensorT& B = node(b).value;
  if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0)) {
    throw DimensionError("matmul: " + shape_to_string(A.shape()) + " x " +
                         shape_to_string(B.shape()));
  }
  const std::size_t m = A.dim(0), k = A.dim(1), nn = B.dim(1);
  TensorT C(Shape{m, nn});
  as_matrix(C, m, nn).noalias() = as_matrix(A, m, k) * as_matrix(B, k, nn);
  Node n{.op = OpKind::kMatmul, .in0 = a.id, .in1 = b.id};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = std::move(C);
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::conv2d(Var input, Var kernel, std::size_t stride,
                         std::size_t pad) {
  const TensorT& X = node(input).value;
  const TensorT& K = node(kernel).value;
  const ConvGeometry g = conv_geometry(X.shape(), K.shape(), stride, pad);
  std::unique_ptr<T[]> col = im2col(X, g);
  const std::size_t cols = g.n * g.positions();
  RowMajor<T> out = as_matrix(K, g.f, g.patch()) *
                    ConstMatMap<T>(col.get(), static_cast<Eigen::Index>(g.patch()),
                                   static_cast<Eigen::Index>(cols));
  TensorT Y(Shape{g.n, g.f, g.ho, g.wo});
  T* y = Y.data().data();
  for (std::size_t f = 0; f < g.f; ++f) {
    for (std::size_t b = 0; b < g.n; ++b) {
      const T* src = out.data() + f * cols + b * g.positions();
      std::copy(src, src + g.positions(), y + (b * g.f + f) * g.positions());
    }
  }
  Node n{.op = OpKind::kConv2d, .in0 = input.id, .in1 = kernel.id};
  n.requires_grad = node(input).requires_grad || node(kernel).requires_grad;
  n.stride = stride;
  n.pad = pad;
  n.value = std::move(Y);
  if (node(kernel).requires_grad) n.col = std::move(col);
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::relu(Var a) {
  TensorT Y = node(a).value;
  for (T& v : Y.data()) v = v > T{0} ? v : T{0};
  Node n{.op = OpKind::kRelu, .in0 = a.id};
  n.requires_grad = node(a).requires_grad;
  n.value = std::move(Y);
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::avgpool2d(Var a, std::size_t window) {
  const TensorT& X = node(a).value;
  if (X.rank() != 4 || window == 0 || X.dim(2) % window != 0 ||
      X.dim(3) % window != 0) {
    throw DimensionError("avgpool2d window " + std::to_string(window) +
                         " does not tile " + shape_to_string(X.shape()));
  }
  const std::size_t planes = X.dim(0) * X.dim(1);
  const std::size_t h = X.dim(2), w = X.dim(3);
  const std::size_t ho = h / window, wo = w / window;
  TensorT Y(Shape{X.dim(0), X.dim(1), ho, wo});
  const T inv = T{1} / static_cast<T>(window * window);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = X.data().data() + p * h * w;
    T* dst = Y.data().data() + p * ho * wo;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      T* d = dst + oy * wo;
      for (std::size_t i = 0; i < window; ++i) {
        const T* r = src + (oy * window + i) * w;
        for (std::size_t ox = 0; ox < wo; ++ox) {
          for (std::size_t j = 0; j < window; ++j) d[ox] += r[ox * window + j];
        }
      }
      for (std::size_t ox = 0; ox < wo; ++ox) d[ox] *= inv;
    }
  }
  Node n{.op = OpKind::kAvgPool2d, .in0 = a.id};
  n.requires_grad = node(a).requires_grad;
  n.stride = window;
  n.value = std::move(Y);
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::flatten(Var a) {
  const TensorT& X = node(a).value;
  const std::size_t rows = leading_rows(X.shape(), "flatten");
  Node n{.op = OpKind::kFlatten, .in0 = a.id};
  n.requires_grad = node(a).requires_grad;
  n.value = X.reshaped(Shape{rows, X.size() / rows});
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::bias_add(Var a, Var bias) {
  const TensorT& X = node(a).value;
  const TensorT& B = node(bias).value;
  TensorT Y = X;
  if (X.rank() == 2 && B.rank() == 1 && B.dim(0) == X.dim(1)) {
    const std::size_t f = X.dim(1);
    T* y = Y.data().data();
    for (std::size_t r = 0; r < X.dim(0); ++r, y += f) {
      for (std::size_t j = 0; j < f; ++j) y[j] += B[j];
    }
  } else if (X.rank() == 4 && B.rank() == 1 && B.dim(0) == X.dim(1)) {
    const std::size_t c = X.dim(1), plane = X.dim(2) * X.dim(3);
    T* y = Y.data().data();
    for (std::size_t b = 0; b < X.dim(0); ++b) {
      for (std::size_t k = 0; k < c; ++k, y += plane) {
        const T v = B[k];
        for (std::size_t i = 0; i < plane; ++i) y[i] += v;
      }
    }
  } else {
    throw DimensionError("bias_add: " + shape_to_string(X.shape()) + " with " +
                         shape_to_string(B.shape()));
  }
  Node n{.op = OpKind::kBiasAdd, .in0 = a.id, .in1 = bias.id};
  n.requires_grad = node(a).requires_grad || node(bias).requires_grad;
  n.value = std::move(Y);
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::scale_add(Var a, Var b, double lambda) {
  if (!std::isfinite(lambda)) throw ValidationError("scale_add: non-finite lambda");
  const TensorT& A = node(a).value;
  const TensorT& B = node(b).value;
  require_same_shape(A.shape(), B.shape(), "scale_add");
  TensorT Y(A.shape());
  const double wa = lambda, wb = 1.0 - lambda;
  for (std::size_t i = 0; i < Y.size(); ++i) {
    Y[i] = static_cast<T>(wa * static_cast<double>(A[i]) +
                          wb * static_cast<double>(B[i]));
  }
  Node n{.op = OpKind::kScaleAdd, .in0 = a.id, .in1 = b.id};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.lambda = lambda;
  n.value = std::move(Y);
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::scale_add_rows(Var a, Var b, std::span<const double> weights) {
  const TensorT& A = node(a).value;
  const TensorT& B = node(b).value;
  require_same_shape(A.shape(), B.shape(), "scale_add_rows");
  const std::size_t rows = leading_rows(A.shape(), "scale_add_rows");
  if (weights.size() != rows) {
    throw DimensionError("scale_add_rows: " + std::to_string(weights.size()) +
                         " weights for " + std::to_string(rows) + " rows");
  }
  const std::size_t width = A.size() / rows;
  TensorT Y(A.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double wa = weights[r], wb = 1.0 - weights[r];
    if (!std::isfinite(wa)) throw ValidationError("scale_add_rows: non-finite weight");
    for (std::size_t i = r * width; i < (r + 1) * width; ++i) {
      Y[i] = static_cast<T>(wa * static_cast<double>(A[i]) +
                            wb * static_cast<double>(B[i]));
    }
  }
  Node n{.op = OpKind::kScaleAddRows, .in0 = a.id, .in1 = b.id};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.row_weights.assign(weights.begin(), weights.end());
  n.value = std::move(Y);
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::add(Var a, Var b) {
  const TensorT& A = node(a).value;
  const TensorT& B = node(b).value;
  require_same_shape(A.shape(), B.shape(), "add");
  TensorT Y = A;
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] += B[i];
  Node n{.op = OpKind::kAdd, .in0 = a.id, .in1 = b.id};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = std::move(Y);
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::sub(Var a, Var b) {
  const TensorT& A = node(a).value;
  const TensorT& B = node(b).value;
  require_same_shape(A.shape(), B.shape(), "sub");
  TensorT Y = A;
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] -= B[i];
  Node n{.op = OpKind::kSub, .in0 = a.id, .in1 = b.id};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = std::move(Y);
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::mul(Var a, Var b) {
  const TensorT& A = node(a).value;
  const TensorT& B = node(b).value;
  require_same_shape(A.shape(), B.shape(), "mul");
  TensorT Y = A;
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] *= B[i];
  Node n{.op = OpKind::kMul, .in0 = a.id, .in1 = b.id};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = std::move(Y);
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::scale(Var a, double factor) {
  if (!std::isfinite(factor)) throw ValidationError("scale: non-finite factor");
  TensorT Y = node(a).value;
  for (T& v : Y.data()) v = static_cast<T>(factor * static_cast<double>(v));
  Node n{.op = OpKind::kScale, .in0 = a.id};
  n.requires_grad = node(a).requires_grad;
  n.lambda = factor;
  n.value = std::move(Y);
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::sum(Var a) {
  Accum<T> s = 0;
  for (T v : node(a).value.data()) s += v;
  Node n{.op = OpKind::kSum, .in0 = a.id};
  n.requires_grad = node(a).requires_grad;
  n.value = TensorT::scalar(static_cast<T>(s));
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::mean(Var a) {
  const TensorT& X = node(a).value;
  Accum<T> s = 0;
  for (T v : X.data()) s += v;
  Node n{.op = OpKind::kMean, .in0 = a.id};
  n.requires_grad = node(a).requires_grad;
  n.value = TensorT::scalar(static_cast<T>(s / static_cast<double>(X.size())));
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::softmax_cross_entropy(Var logits, Var targets) {
  const TensorT& Z = node(logits).value;
  const TensorT& Tg = node(targets).value;
  if (Z.rank() != 2) {
    throw DimensionError("softmax_cross_entropy expects [N,K] logits, got " +
                         shape_to_string(Z.shape()));
  }
  require_same_shape(Z.shape(), Tg.shape(), "softmax_cross_entropy");
  const std::size_t rows = Z.dim(0), k = Z.dim(1);
  if (k < 2) throw ValidationError("softmax_cross_entropy needs K >= 2");
  TensorT logp(Z.shape());
  Accum<T> total = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* z = Z.data().data() + r * k;
    const T* t = Tg.data().data() + r * k;
    Accum<T> tsum = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (!(t[j] >= T{0})) {
        throw ValidationError("target row " + std::to_string(r) +
                              " has a negative entry");
      }
      tsum += t[j];
    }
    if (std::abs(tsum - 1.0) > 1e-5) {
      throw ValidationError("target row " + std::to_string(r) + " sums to " +
                            std::to_string(tsum) + ", not 1");
    }
    Accum<T> zmax = z[0];
    for (std::size_t j = 1; j < k; ++j) zmax = std::max<Accum<T>>(zmax, z[j]);
    Accum<T> se = 0;
    for (std::size_t j = 0; j < k; ++j) se += std::exp(z[j] - zmax);
    const Accum<T> lse = zmax + std::log(se);
    for (std::size_t j = 0; j < k; ++j) {
      const Accum<T> lp = static_cast<Accum<T>>(z[j]) - lse;
      logp[r * k + j] = static_cast<T>(lp);
      total -= static_cast<Accum<T>>(t[j]) * lp;
    }
  }
  Node n{.op = OpKind::kSoftmaxCrossEntropy, .in0 = logits.id, .in1 = targets.id};
  n.requires_grad = node(logits).requires_grad || node(targets).requires_grad;
  n.value = TensorT::scalar(static_cast<T>(total / static_cast<double>(rows)));
  n.saved = std::move(logp);
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::l2_norm(Var v) {
  Accum<T> s = 0;
  for (T x : node(v).value.data()) s += static_cast<Accum<T>>(x) * x;
  Node n{.op = OpKind::kL2Norm, .in0 = v.id};
  n.requires_grad = node(v).requires_grad;
  n.value = TensorT::scalar(static_cast<T>(std::sqrt(s + kNormEpsilon)));
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::row_l2_norm(Var v) {
  const TensorT& X = node(v).value;
  const std::size_t rows = leading_rows(X.shape(), "row_l2_norm");
  const std::size_t width = X.size() / rows;
  TensorT Y(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    Accum<T> s = 0;
    for (std::size_t i = r * width; i < (r + 1) * width; ++i) {
      s += static_cast<Accum<T>>(X[i]) * X[i];
    }
    Y[r] = static_cast<T>(std::sqrt(s + kNormEpsilon));
  }
  Node n{.op = OpKind::kRowL2Norm, .in0 = v.id};
  n.requires_grad = node(v).requires_grad;
  n.value = std::move(Y);
  return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::row_squared_norm(Var v) {
  const TensorT& X = node(v).value;
  const std::size_t rows = leading_rows(X.shape(), "row_squared_norm");
  const std::size_t width = X.size() / rows;
  TensorT Y(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    Accum<T> s = 0;
    for (std::size_t i = r * width; i < (r + 1) * width; ++i) {
      s += static_cast<Accum<T>>(X[i]) * X[i];
    }
    Y[r] = static_cast<T>(s);
  }
  Node n{.op = OpKind::kRowSquaredNorm, .in0 = v.id};
  n.requires_grad = node(v).requires_grad;
  n.value = std::move(Y);
  return push(std::move(n));
}

template <typename T>
BasicTensor<T> BasicTape<T>::grad(Var v) const {
  const Node& n = node(v);
  if (n.has_grad) return n.grad;
  return TensorT(n.value.shape());
}

template <typename T>
auto BasicTape<T>::grad_slot(std::uint32_t id) -> TensorT& {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = TensorT(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

template <typename T>
void BasicTape<T>::backward(Var loss) {
  const Node& root = node(loss);
  if (root.value.size() != 1) {
    throw UsageError("backward needs a scalar loss, got shape " +
                     shape_to_string(root.value.shape()));
  }
  if (!root.requires_grad) return;
  grad_slot(loss.id)[0] += T{1};
  for (std::uint32_t id = loss.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || !n.has_grad) continue;
    if (n.op == OpKind::kVariable || n.op == OpKind::kConstant) continue;
    propagate(id);
  }
}

template <typename T>
void BasicTape<T>::propagate(std::uint32_t id) {
  // Inputs always precede the node, so references into nodes_ stay valid:
  // nothing is appended during backward.
  const Node& n = nodes_[id];
  TensorT scaled;
  const TensorT* upstream = &n.grad;
  if (fault_ && fault_->op == n.op) {
    scaled = n.grad;
    for (T& v : scaled.data()) v = static_cast<T>(v * fault_->scale);
    upstream = &scaled;
  }
  const TensorT& up = *upstream;
  const bool need0 = nodes_[n.in0].requires_grad;
  const bool need1 = nodes_[n.in1].requires_grad;

  switch (n.op) {
    case OpKind::kConstant:
    case OpKind::kVariable:
    case OpKind::kDetach:
      break;
    case OpKind::kMatmul: {
      const TensorT& A = nodes_[n.in0].value;
      const TensorT& B = nodes_[n.in1].value;
      const std::size_t m = A.dim(0), k = A.dim(1), nn = B.dim(1);
      if (need0) {
        as_matrix(grad_slot(n.in0), m, k).noalias() +=
            as_matrix(up, m, nn) * as_matrix(B, k, nn).transpose();
      }
      if (need1) {
        as_matrix(grad_slot(n.in1), k, nn).noalias() +=
            as_matrix(A, m, k).transpose() * as_matrix(up, m, nn);
      }
      break;
    }
    case OpKind::kConv2d: {
      const TensorT& X = nodes_[n.in0].value;
      const TensorT& K = nodes_[n.in1].value;
      const ConvGeometry g = conv_geometry(X.shape(), K.shape(), n.stride, n.pad);
      const std::size_t cols = g.n * g.positions();
      RowMajor<T> dmat(static_cast<Eigen::Index>(g.f),
                       static_cast<Eigen::Index>(cols));
      for (std::size_t f = 0; f < g.f; ++f) {
        for (std::size_t b = 0; b < g.n; ++b) {
          const T* src = up.data().data() + (b * g.f + f) * g.positions();
          std::copy(src, src + g.positions(), dmat.data() + f * cols + b * g.positions());
        }
      }
      if (need1) {
        std::unique_ptr<T[]> fresh;
        const T* col = n.col.get();
        if (col == nullptr) {
          fresh = im2col(X, g);
          col = fresh.get();
        }
        as_matrix(grad_slot(n.in1), g.f, g.patch()).noalias() +=
            dmat * ConstMatMap<T>(col, static_cast<Eigen::Index>(g.patch()),
                                  static_cast<Eigen::Index>(cols))
                       .transpose();
      }
      if (need0) {
        std::unique_ptr<T[]> dcol(new T[g.patch() * cols]);
        MatMap<T>(dcol.get(), static_cast<Eigen::Index>(g.patch()),
                  static_cast<Eigen::Index>(cols))
            .noalias() = as_matrix(K, g.f, g.patch()).transpose() * dmat;
        col2im_add(dcol.get(), g, grad_slot(n.in0));
      }
      break;
    }
    case OpKind::kRelu: {
      if (!need0) break;
      const TensorT& X = nodes_[n.in0].value;
      TensorT& dx = grad_slot(n.in0);
      for (std::size_t i = 0; i < dx.size(); ++i) {
        if (X[i] > T{0}) dx[i] += up[i];
      }
      break;
    }
    case OpKind::kAvgPool2d: {
      if (!need0) break;
      TensorT& dx = grad_slot(n.in0);
      const std::size_t window = n.stride;
      const std::size_t planes = dx.dim(0) * dx.dim(1);
      const std::size_t h = dx.dim(2), w = dx.dim(3);
      const std::size_t ho = h / window, wo = w / window;
      const T inv = T{1} / static_cast<T>(window * window);
      for (std::size_t p = 0; p < planes; ++p) {
        T* dst = dx.data().data() + p * h * w;
        const T* src = up.data().data() + p * ho * wo;
        for (std::size_t y = 0; y < h; ++y) {
          const T* s = src + (y / window) * wo;
          T* d = dst + y * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const T v = s[ox] * inv;
            for (std::size_t j = 0; j < window; ++j) d[ox * window + j] += v;
          }
        }
      }
      break;
    }
    case OpKind::kFlatten: {
      if (!need0) break;
      TensorT& dx = grad_slot(n.in0);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += up[i];
      break;
    }
    case OpKind::kBiasAdd: {
      if (need0) {
        TensorT& dx = grad_slot(n.in0);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += up[i];
      }
      if (need1) {
        TensorT& db = grad_slot(n.in1);
        const Shape& xs = nodes_[n.in0].value.shape();
        std::vector<Accum<T>> acc(db.size(), 0.0);
        if (xs.size() == 2) {
          for (std::size_t i = 0; i < up.size(); ++i) acc[i % xs[1]] += up[i];
        } else {
          const std::size_t plane = xs[2] * xs[3];
          const T* u = up.data().data();
          for (std::size_t b = 0; b < xs[0]; ++b) {
            for (std::size_t k = 0; k < xs[1]; ++k, u += plane) {
              Accum<T> a = acc[k];
              for (std::size_t i = 0; i < plane; ++i) a += u[i];
              acc[k] = a;
            }
          }
        }
        for (std::size_t j = 0; j < db.size(); ++j) db[j] += static_cast<T>(acc[j]);
      }
      break;
    }
    case OpKind::kScaleAdd: {
      if (need0) {
        TensorT& da = grad_slot(n.in0);
        for (std::size_t i = 0; i < da.size(); ++i) {
          da[i] += static_cast<T>(n.lambda * static_cast<double>(up[i]));
        }
      }
      if (need1) {
        TensorT& db = grad_slot(n.in1);
        const double wb = 1.0 - n.lambda;
        for (std::size_t i = 0; i < db.size(); ++i) {
          db[i] += static_cast<T>(wb * static_cast<double>(up[i]));
        }
      }
      break;
    }
    case OpKind::kScaleAddRows: {
      const std::size_t rows = n.row_weights.size();
      const std::size_t width = up.size() / rows;
      if (need0) {
        TensorT& da = grad_slot(n.in0);
        for (std::size_t i = 0; i < da.size(); ++i) {
          da[i] += static_cast<T>(n.row_weights[i / width] *
                                  static_cast<double>(up[i]));
        }
      }
      if (need1) {
        TensorT& db = grad_slot(n.in1);
        for (std::size_t i = 0; i < db.size(); ++i) {
          db[i] += static_cast<T>((1.0 - n.row_weights[i / width]) *
                                  static_cast<double>(up[i]));
        }
      }
      break;
    }
    case OpKind::kAdd:
    case OpKind::kSub: {
      if (need0) {
        TensorT& da = grad_slot(n.in0);
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += up[i];
      }
      if (need1) {
        TensorT& db = grad_slot(n.in1);
        if (n.op == OpKind::kAdd) {
          for (std::size_t i = 0; i < db.size(); ++i) db[i] += up[i];
        } else {
          for (std::size_t i = 0; i < db.size(); ++i) db[i] -= up[i];
        }
      }
      break;
    }
    case OpKind::kMul: {
      // Read both operands before touching either slot: a and b may be the
      // same node.
      const TensorT& A = nodes_[n.in0].value;
      const TensorT& B = nodes_[n.in1].value;
      if (need0) {
        TensorT& da = grad_slot(n.in0);
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += up[i] * B[i];
      }
      if (need1) {
        TensorT& db = grad_slot(n.in1);
        for (std::size_t i = 0; i < db.size(); ++i) db[i] += up[i] * A[i];
      }
      break;
    }
    case OpKind::kScale: {
      if (!need0) break;
      TensorT& da = grad_slot(n.in0);
      for (std::size_t i = 0; i < da.size(); ++i) {
        da[i] += static_cast<T>(n.lambda * static_cast<double>(up[i]));
      }
      break;
    }
    case OpKind::kSum:
    case OpKind::kMean: {
      if (!need0) break;
      TensorT& da = grad_slot(n.in0);
      T g = up[0];
      if (n.op == OpKind::kMean) g = static_cast<T>(g / static_cast<double>(da.size()));
      for (T& v : da.data()) v += g;
      break;
    }
    case OpKind::kSoftmaxCrossEntropy: {
      const TensorT& logp = n.saved;
      const TensorT& Tg = nodes_[n.in1].value;
      const std::size_t rows = logp.dim(0), k = logp.dim(1);
      const double scale = static_cast<double>(up[0]) / static_cast<double>(rows);
      if (need0) {
        TensorT& dz = grad_slot(n.in0);
        for (std::size_t r = 0; r < rows; ++r) {
          Accum<T> tsum = 0;
          for (std::size_t j = 0; j < k; ++j) tsum += Tg[r * k + j];
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t i = r * k + j;
            const double p = std::exp(static_cast<double>(logp[i]));
            dz[i] += static_cast<T>(scale * (tsum * p - static_cast<double>(Tg[i])));
          }
        }
      }
      if (need1) {
        TensorT& dt = grad_slot(n.in1);
        for (std::size_t i = 0; i < dt.size(); ++i) {
          dt[i] += static_cast<T>(-scale * static_cast<double>(logp[i]));
        }
      }
      break;
    }
    case OpKind::kL2Norm: {
      if (!need0) break;
      const TensorT& X = nodes_[n.in0].value;
      TensorT& dx = grad_slot(n.in0);
      const double g = static_cast<double>(up[0]) / static_cast<double>(n.value[0]);
      for (std::size_t i = 0; i < dx.size(); ++i) {
        dx[i] += static_cast<T>(g * static_cast<double>(X[i]));
      }
      break;
    }
    case OpKind::kRowL2Norm:
    case OpKind::kRowSquaredNorm: {
      if (!need0) break;
      const TensorT& X = nodes_[n.in0].value;
      TensorT& dx = grad_slot(n.in0);
      const std::size_t rows = n.value.size();
      const std::size_t width = X.size() / rows;
      for (std::size_t r = 0; r < rows; ++r) {
        const double g = n.op == OpKind::kRowL2Norm
                             ? static_cast<double>(up[r]) / static_cast<double>(n.value[r])
                             : 2.0 * static_cast<double>(up[r]);
        for (std::size_t i = r * width; i < (r + 1) * width; ++i) {
          dx[i] += static_cast<T>(g * static_cast<double>(X[i]));
        }
      }
      break;
    }
  }
}

template class BasicTape<float>;
template class BasicTape<double>;

}  // namespace semx
