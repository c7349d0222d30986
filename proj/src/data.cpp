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

#include "semx/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "semx/rng.hpp"

namespace semx {

Dataset Dataset::make(Tensor images, Tensor labels, std::size_t class_count,
                      std::string name) {
  Dataset d{std::move(images), std::move(labels), class_count, std::move(name)};
  d.validate();
  return d;
}

void Dataset::validate() const {
  if (images.rank() < 2) {
    throw ValidationError("dataset images need a sample axis, got " +
                          shape_to_string(images.shape()));
  }
  if (labels.rank() != 2 || labels.dim(0) != images.dim(0) ||
      labels.dim(1) != class_count) {
    throw ValidationError("dataset labels " + shape_to_string(labels.shape()) +
                          " do not match " + std::to_string(images.dim(0)) +
                          " samples of " + std::to_string(class_count) + " classes");
  }
  for (float p : images.data()) {
    if (!(p >= 0.0f && p <= 1.0f)) {
      throw ValidationError("pixel value outside [0, 1] in dataset " + name);
    }
  }
  for (std::size_t r = 0; r < labels.dim(0); ++r) {
    std::size_t ones = 0;
    for (std::size_t k = 0; k < class_count; ++k) {
      const float v = labels[r * class_count + k];
      if (v == 1.0f) {
        ++ones;
      } else if (v != 0.0f) {
        ones = 2;
      }
    }
    if (ones != 1) {
      throw ValidationError("label row " + std::to_string(r) + " of dataset " +
                            name + " is not one-hot");
    }
  }
}

std::vector<std::size_t> Dataset::classes() const {
  std::vector<std::size_t> out(labels.dim(0));
  for (std::size_t r = 0; r < out.size(); ++r) {
    const float* row = labels.data().data() + r * class_count;
    out[r] = static_cast<std::size_t>(std::max_element(row, row + class_count) - row);
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw UsageError("empty subset of dataset " + name);
  return Dataset{gather_rows(images, indices), gather_rows(labels, indices),
                 class_count, name};
}

Tensor one_hot(std::span<const std::size_t> classes, std::size_t class_count) {
  Tensor out(Shape{classes.size(), class_count});
  for (std::size_t r = 0; r < classes.size(); ++r) {
    if (classes[r] >= class_count) {
      throw ValidationError("class " + std::to_string(classes[r]) +
                            " out of range for " + std::to_string(class_count) +
                            " classes");
    }
    out[r * class_count + classes[r]] = 1.0f;
  }
  return out;
}

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::string& path) {
  if (offset + 4 > bytes.size()) {
    throw LengthError(path + ": truncated header at offset " + std::to_string(offset));
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex;
  os.width(8);
  os.fill('0');
  os << v;
  return os.str();
}

void expect_magic(const std::vector<std::uint8_t>& bytes, std::uint32_t magic,
                  const std::string& path) {
  const std::uint32_t got = read_be32(bytes, 0, path);
  if (got != magic) {
    throw FormatError(path + ": bad magic " + hex32(got) + " at offset 0, expected " +
                      hex32(magic));
  }
}

// correctly rounded k / 255, not k * (1 / 255)
float byte_to_unit(std::uint8_t b) { return static_cast<float>(b) / 255.0f; }

}  // namespace

Dataset read_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t class_count) {
  const std::vector<std::uint8_t> img = read_file(images_path);
  const std::vector<std::uint8_t> lab = read_file(labels_path);
  expect_magic(img, kIdxImagesMagic, images_path);
  expect_magic(lab, kIdxLabelsMagic, labels_path);
  const std::size_t n = read_be32(img, 4, images_path);
  const std::size_t h = read_be32(img, 8, images_path);
  const std::size_t w = read_be32(img, 12, images_path);
  const std::size_t nl = read_be32(lab, 4, labels_path);
  if (n == 0 || h == 0 || w == 0) {
    throw FormatError(images_path + ": zero extent in header at offset 4");
  }
  constexpr std::size_t kImgHeader = 16, kLabHeader = 8;
  if (img.size() < kImgHeader + n * h * w) {
    throw LengthError(images_path + ": expected " + std::to_string(n * h * w) +
                      " pixel bytes after offset 16, found " +
                      std::to_string(img.size() - kImgHeader));
  }
  if (lab.size() < kLabHeader + nl) {
    throw LengthError(labels_path + ": expected " + std::to_string(nl) +
                      " label bytes after offset 8, found " +
                      std::to_string(lab.size() - kLabHeader));
  }
  if (nl != n) {
    throw LengthError(labels_path + ": " + std::to_string(nl) + " labels for " +
                      std::to_string(n) + " images");
  }
  Tensor images(Shape{n, 1, h, w});
  for (std::size_t i = 0; i < n * h * w; ++i) {
    images[i] = byte_to_unit(img[kImgHeader + i]);
  }
  std::vector<std::size_t> classes(n);
  for (std::size_t i = 0; i < n; ++i) {
    classes[i] = lab[kLabHeader + i];
    if (classes[i] >= class_count) {
      throw FormatError(labels_path + ": label " + std::to_string(classes[i]) +
                        " at offset " + std::to_string(kLabHeader + i) +
                        " exceeds class count " + std::to_string(class_count));
    }
  }
  return Dataset::make(std::move(images), one_hot(classes, class_count), class_count,
                       images_path);
}

void write_idx(const Dataset& dataset, const std::string& images_path,
               const std::string& labels_path) {
  const Tensor& x = dataset.images;
  if (x.rank() != 4 || x.dim(1) != 1) {
    throw UsageError("IDX holds single-channel images, got " + shape_to_string(x.shape()));
  }
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) throw UsageError("cannot write " + images_path + " / " + labels_path);
  write_be32(img, kIdxImagesMagic);
  write_be32(img, static_cast<std::uint32_t>(x.dim(0)));
  write_be32(img, static_cast<std::uint32_t>(x.dim(2)));
  write_be32(img, static_cast<std::uint32_t>(x.dim(3)));
  std::vector<char> pixels(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    pixels[i] = static_cast<char>(static_cast<std::uint8_t>(std::lround(x[i] * 255.0f)));
  }
  img.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
  write_be32(lab, kIdxLabelsMagic);
  write_be32(lab, static_cast<std::uint32_t>(x.dim(0)));
  for (std::size_t c : dataset.classes()) lab.put(static_cast<char>(c));
  if (!img || !lab) throw UsageError("write failed for " + images_path);
}

Dataset read_cifar_binary(const std::string& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  return parse_cifar_binary(bytes, path);
}

Dataset parse_cifar_binary(std::span<const std::uint8_t> bytes,
                           const std::string& source) {
  constexpr std::size_t kClasses = 10, kPlane = 32 * 32;
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError(source + ": length " + std::to_string(bytes.size()) +
                      " is not a positive multiple of 3073");
  }
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  Tensor images(Shape{n, 3, 32, 32});
  std::vector<std::size_t> classes(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t offset = r * kCifarRecordBytes;
    classes[r] = bytes[offset];
    if (classes[r] >= kClasses) {
      throw FormatError(source + ": label byte " + std::to_string(classes[r]) +
                        " at offset " + std::to_string(offset) + " is not below 10");
    }
    for (std::size_t i = 0; i < 3 * kPlane; ++i) {
      images[r * 3 * kPlane + i] = byte_to_unit(bytes[offset + 1 + i]);
    }
  }
  return Dataset::make(std::move(images), one_hot(classes, kClasses), kClasses, source);
}

namespace {

bool inside_shape(std::size_t cls, double dx, double dy, double r) {
  const double d = std::sqrt(dx * dx + dy * dy);
  switch (cls) {
    case 0:  // disk
      return d <= r;
    case 1:  // square
      return std::max(std::abs(dx), std::abs(dy)) <= 0.8 * r;
    case 2:  // cross
      return (std::abs(dx) <= 0.3 * r && std::abs(dy) <= r) ||
             (std::abs(dy) <= 0.3 * r && std::abs(dx) <= r);
    case 3:  // ring
      return d <= r && d >= 0.55 * r;
    case 4:  // triangle, apex up
      return dy >= -r && dy <= 0.8 * r && std::abs(dx) <= 0.55 * (dy + r);
    default:  // diagonal bar
      return std::abs(dx - dy) <= 0.45 * r && std::abs(dx + dy) <= 1.6 * r;
  }
}

}  // namespace

Dataset synth_shapes(std::size_t n, std::size_t image_hw, std::size_t class_count,
                     double noise, std::uint64_t seed) {
  if (class_count < 2 || class_count > 6) {
    throw ConfigError("synth_shapes supports 2 to 6 classes, got " +
                      std::to_string(class_count));
  }
  if (image_hw < 16) throw ConfigError("synth_shapes image size must be >= 16");
  if (n == 0) throw ConfigError("synth_shapes needs at least one sample");
  if (!(noise >= 0.0)) throw ConfigError("synth_shapes noise must be non-negative");
  Rng rng(seed);
  const double hw = static_cast<double>(image_hw);
  Tensor images(Shape{n, 1, image_hw, image_hw});
  std::vector<std::size_t> classes(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cls = i % class_count;
    classes[i] = cls;
    const double r = hw * (0.22 + 0.12 * rng.uniform());
    const double margin = r + 0.5;
    const double cx = margin + (hw - 2.0 * margin) * rng.uniform();
    const double cy = margin + (hw - 2.0 * margin) * rng.uniform();
    const double brightness = 0.7 + 0.3 * rng.uniform();
    float* img = images.data().data() + i * image_hw * image_hw;
    for (std::size_t y = 0; y < image_hw; ++y) {
      for (std::size_t x = 0; x < image_hw; ++x) {
        const double dx = static_cast<double>(x) + 0.5 - cx;
        const double dy = static_cast<double>(y) + 0.5 - cy;
        double v = inside_shape(cls, dx, dy, r) ? brightness : 0.0;
        if (noise > 0.0) v += noise * rng.normal();
        img[y * image_hw + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return Dataset::make(std::move(images), one_hot(classes, class_count), class_count,
                       "synth_shapes");
}

Dataset uniform_noise_images(std::size_t n, const Shape& sample_shape,
                             std::size_t class_count, std::uint64_t seed) {
  if (n == 0 || class_count == 0) throw ConfigError("uniform noise set must be non-empty");
  Shape shape{n};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  Tensor images(shape);
  Rng rng(seed);
  for (float& p : images.data()) p = static_cast<float>(rng.uniform());
  std::vector<std::size_t> classes(n, 0);
  return Dataset::make(std::move(images), one_hot(classes, class_count), class_count,
                       "uniform_noise");
}

std::vector<std::vector<std::size_t>> split_indices(
    const std::vector<std::size_t>& classes, std::size_t class_count,
    std::span<const double> fractions, std::uint64_t seed) {
  if (fractions.empty()) throw ConfigError("split needs at least one fraction");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw ConfigError("split fractions sum to " + std::to_string(total) + ", not 1");
  }
  const std::size_t n = classes.size();
  // Each class is shuffled and its k-th member gets the key (k + 0.5) / n_c.
  // Sorting all samples by key interleaves the classes proportionally, so
  // any prefix of the order is stratified to within one sample per class.
  std::vector<std::vector<std::size_t>> by_class(class_count);
  for (std::size_t i = 0; i < n; ++i) by_class.at(classes[i]).push_back(i);
  Rng rng(seed);
  struct Keyed {
    double key;
    std::size_t cls;
    std::size_t index;
  };
  std::vector<Keyed> order;
  order.reserve(n);
  for (std::size_t c = 0; c < class_count; ++c) {
    rng.shuffle(std::span<std::size_t>(by_class[c]));
    const double nc = static_cast<double>(by_class[c].size());
    for (std::size_t k = 0; k < by_class[c].size(); ++k) {
      order.push_back({(static_cast<double>(k) + 0.5) / nc, c, by_class[c][k]});
    }
  }
  std::sort(order.begin(), order.end(), [](const Keyed& a, const Keyed& b) {
    return a.key != b.key ? a.key < b.key : a.cls < b.cls;
  });
  std::vector<std::vector<std::size_t>> out(fractions.size());
  double cumulative = 0.0;
  std::size_t begin = 0;
  for (std::size_t s = 0; s < fractions.size(); ++s) {
    cumulative += fractions[s];
    std::size_t end = s + 1 == fractions.size()
                          ? n
                          : std::min<std::size_t>(
                                n, static_cast<std::size_t>(std::llround(cumulative * static_cast<double>(n))));
    end = std::max(end, begin);
    for (std::size_t p = begin; p < end; ++p) out[s].push_back(order[p].index);
    std::sort(out[s].begin(), out[s].end());
    begin = end;
  }
  return out;
}

std::vector<Dataset> split(const Dataset& dataset, std::span<const double> fractions,
                           std::uint64_t seed) {
  const auto parts = split_indices(dataset.classes(), dataset.class_count, fractions, seed);
  std::vector<Dataset> out;
  out.reserve(parts.size());
  for (const auto& idx : parts) {
    if (idx.empty()) throw ConfigError("split produced an empty part");
    out.push_back(dataset.subset(idx));
  }
  return out;
}

}  // namespace semx
