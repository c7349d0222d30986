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

#ifndef SEMX_DATA_HPP_
#define SEMX_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semx/tensor.hpp"

namespace semx {

/// Labelled images: images [N,C,H,W] in [0,1], labels [N,K] one-hot.
struct Dataset {
  Tensor images;
  Tensor labels;
  std::size_t class_count = 0;
  std::string name;

  /// Builds and checks the one-hot and pixel-range invariants
  /// (ValidationError otherwise).
  static Dataset make(Tensor images, Tensor labels, std::size_t class_count,
                      std::string name);

  void validate() const;
  std::size_t size() const { return images.dim(0); }
  Shape sample_shape() const {
    return Shape(images.shape().begin() + 1, images.shape().end());
  }
  /// Class index of every sample.
  std::vector<std::size_t> classes() const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

Tensor one_hot(std::span<const std::size_t> classes, std::size_t class_count);

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// IDX pair (MNIST layout): big-endian magic, big-endian u32 extents, raw
/// bytes. Pixels are scaled by 1/255. Images become [N,1,H,W].
Dataset read_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t class_count = 10);

/// Writes a single-channel dataset as an IDX pair; pixels are quantised to
/// round(255 p).
void write_idx(const Dataset& dataset, const std::string& images_path,
               const std::string& labels_path);

inline constexpr std::size_t kCifarRecordBytes = 3073;

/// CIFAR-10 binary batch: records of one label byte and 3072 pixel bytes
/// (R, G, B planes of 32x32). Ten classes.
Dataset read_cifar_binary(const std::string& path);

/// Parses bytes already in memory; `source` names them in error messages.
Dataset parse_cifar_binary(std::span<const std::uint8_t> bytes,
                           const std::string& source);

/// Greyscale images of K procedurally drawn shapes (disk, square, cross,
/// ring, triangle, diagonal bar) with random centre, size and brightness,
/// plus N(0, noise^2) pixel noise. Sample i has class i mod K.
Dataset synth_shapes(std::size_t n, std::size_t image_hw, std::size_t class_count,
                     double noise, std::uint64_t seed);

/// Images of i.i.d. uniform pixels, all labelled class 0 of `class_count`.
Dataset uniform_noise_images(std::size_t n, const Shape& sample_shape,
                             std::size_t class_count, std::uint64_t seed);

/// Disjoint class-stratified partition. Split sizes are exact cumulative
/// roundings of fraction * N; each class lands in each split within one
/// sample of its proportional share. Sample order inside a split follows
/// the original order.
std::vector<Dataset> split(const Dataset& dataset, std::span<const double> fractions,
                           std::uint64_t seed);

/// Index sets behind split(), for callers that need them.
std::vector<std::vector<std::size_t>> split_indices(
    const std::vector<std::size_t>& classes, std::size_t class_count,
    std::span<const double> fractions, std::uint64_t seed);

}  // namespace semx

#endif  // SEMX_DATA_HPP_
