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

#ifndef SEMX_TENSOR_HPP_
#define SEMX_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semx/errors.hpp"

namespace semx {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

std::string shape_to_string(const Shape& shape);

/// Dense row-major n-dimensional array.
///
/// A rank-0 tensor (empty shape) holds one element and is what every loss
/// evaluates to. Extents must be positive. Tensors are plain values: copying
/// copies the buffer, and gradients live on the tape or in a Parameter rather
/// than inside the tensor.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() : data_(1, T{0}) {}

  explicit BasicTensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)) {
    check_extents();
    data_.assign(shape_size(shape_), fill);
  }

  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (data_.size() != shape_size(shape_)) {
      throw DimensionError("tensor of shape " + shape_to_string(shape_) +
                           " needs " + std::to_string(shape_size(shape_)) +
                           " values, got " + std::to_string(data_.size()));
    }
  }

  static BasicTensor scalar(T value) { return BasicTensor(Shape{}, {value}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Single value of a one-element tensor.
  T item() const {
    if (data_.size() != 1) {
      throw UsageError("item() on tensor of shape " + shape_to_string(shape_));
    }
    return data_[0];
  }

  /// Same buffer under a different shape with equal element count.
  BasicTensor reshaped(Shape shape) const {
    return BasicTensor(std::move(shape), data_);
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    // v - v is NaN exactly for NaN and +-inf
    bool ok = true;
    for (T v : data_) ok &= (v - v == T{0});
    return ok;
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void check_extents() const {
    for (std::size_t e : shape_) {
      if (e == 0) {
        throw DimensionError("tensor extents must be positive, got " +
                             shape_to_string(shape_));
      }
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Rows `indices` of a tensor, taken along axis 0.
template <typename T>
BasicTensor<T> gather_rows(const BasicTensor<T>& t,
                           std::span<const std::size_t> indices) {
  if (t.rank() == 0) throw DimensionError("gather_rows on a scalar");
  const std::size_t row = t.size() / t.dim(0);
  Shape shape = t.shape();
  shape[0] = indices.size();
  std::vector<T> out;
  out.reserve(indices.size() * row);
  for (std::size_t idx : indices) {
    if (idx >= t.dim(0)) {
      throw DimensionError("row index " + std::to_string(idx) +
                           " out of range for " + shape_to_string(t.shape()));
    }
    auto begin = t.data().begin() + static_cast<std::ptrdiff_t>(idx * row);
    out.insert(out.end(), begin, begin + static_cast<std::ptrdiff_t>(row));
  }
  return BasicTensor<T>(std::move(shape), std::move(out));
}

/// Contiguous rows [begin, end) along axis 0.
template <typename T>
BasicTensor<T> slice_rows(const BasicTensor<T>& t, std::size_t begin,
                          std::size_t end) {
  if (t.rank() == 0 || begin >= end || end > t.dim(0)) {
    throw DimensionError("bad row slice [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") of " +
                         shape_to_string(t.shape()));
  }
  const std::size_t row = t.size() / t.dim(0);
  Shape shape = t.shape();
  shape[0] = end - begin;
  std::vector<T> out(t.data().begin() + static_cast<std::ptrdiff_t>(begin * row),
                     t.data().begin() + static_cast<std::ptrdiff_t>(end * row));
  return BasicTensor<T>(std::move(shape), std::move(out));
}

/// Concatenation along axis 0; trailing extents must agree.
template <typename T>
BasicTensor<T> concat_rows(std::span<const BasicTensor<T>> parts) {
  if (parts.empty()) throw UsageError("concat_rows of nothing");
  Shape shape = parts.front().shape();
  if (shape.empty()) throw DimensionError("concat_rows on a scalar");
  std::size_t rows = 0;
  std::vector<T> out;
  for (const auto& p : parts) {
    if (p.rank() != shape.size() ||
        !std::equal(shape.begin() + 1, shape.end(), p.shape().begin() + 1)) {
      throw DimensionError("concat_rows: " + shape_to_string(p.shape()) +
                           " vs " + shape_to_string(shape));
    }
    rows += p.dim(0);
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  shape[0] = rows;
  return BasicTensor<T>(std::move(shape), std::move(out));
}

}  // namespace semx

#endif  // SEMX_TENSOR_HPP_
