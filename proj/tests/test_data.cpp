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

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "semx/data.hpp"
#include "semx/errors.hpp"
#include "semx/tape.hpp"

namespace semx {
namespace {

namespace fs = std::filesystem;
using Bytes = std::vector<std::uint8_t>;

std::string temp_path(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / "semx_data";
  fs::create_directories(dir);
  return (dir / name).string();
}

std::string write_bytes(const std::string& name, const Bytes& b) {
  const std::string path = temp_path(name);
  std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
  return path;
}

const Bytes kImages = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2,
                       0, 255, 51, 102, 204, 153, 1, 254};
const Bytes kLabels = {0, 0, 8, 1, 0, 0, 0, 2, 7, 2};

TEST(ReadIdx, HandAssembledFixture) {
  const Dataset d = read_idx(write_bytes("a-img", kImages), write_bytes("a-lab", kLabels));
  ASSERT_EQ(d.images.shape(), (Shape{2, 1, 2, 2}));
  const std::vector<float> want = {0.0f, 1.0f, 51 / 255.0f, 102 / 255.0f, 204 / 255.0f, 153 / 255.0f, 1 / 255.0f, 254 / 255.0f};
  EXPECT_EQ(d.images.values(), want);
  EXPECT_EQ(d.images[0], 0.0f);
  EXPECT_EQ(d.images[1], 1.0f);
  EXPECT_EQ(d.classes(), (std::vector<std::size_t>{7, 2}));
  EXPECT_EQ(d.class_count, 10u);
}

TEST(ReadIdx, BadMagicIsFormatError) {
  Bytes img = kImages;
  img[3] = 0x01;
  EXPECT_THROW(read_idx(write_bytes("b-img", img), write_bytes("b-lab", kLabels)), FormatError);
  Bytes lab = kLabels;
  lab[2] = 0x09;
  EXPECT_THROW(read_idx(write_bytes("b2-img", kImages), write_bytes("b2-lab", lab)), FormatError);
  try {
    read_idx(write_bytes("b3-img", img), write_bytes("b3-lab", kLabels));
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset 0"), std::string::npos);
  }
}

TEST(ReadIdx, TruncationIsLengthError) {
  Bytes img(kImages.begin(), kImages.end() - 1);
  EXPECT_THROW(read_idx(write_bytes("c-img", img), write_bytes("c-lab", kLabels)), LengthError);
  Bytes header(kImages.begin(), kImages.begin() + 10);
  EXPECT_THROW(read_idx(write_bytes("c2-img", header), write_bytes("c2-lab", kLabels)), LengthError);
  Bytes lab(kLabels.begin(), kLabels.end() - 1);
  EXPECT_THROW(read_idx(write_bytes("c3-img", kImages), write_bytes("c3-lab", lab)), LengthError);
}

TEST(ReadIdx, CountMismatchIsLengthError) {
  const Bytes lab = {0, 0, 8, 1, 0, 0, 0, 3, 1, 2, 3};
  EXPECT_THROW(read_idx(write_bytes("d-img", kImages), write_bytes("d-lab", lab)), LengthError);
}

TEST(ReadIdx, LabelBeyondClassCount) {
  EXPECT_THROW(read_idx(write_bytes("e-img", kImages), write_bytes("e-lab", kLabels), 5), FormatError);
}

TEST(ReadIdx, MissingFileIsUsageError) {
  EXPECT_THROW(read_idx(temp_path("missing-img"), temp_path("missing-lab")), UsageError);
}

TEST(WriteIdx, RoundTripIsExactAfterQuantisation) {
  const Dataset d = synth_shapes(30, 16, 4, 0.05, 3);
  const std::string img = temp_path("rt-img"), lab = temp_path("rt-lab");
  write_idx(d, img, lab);
  const Dataset back = read_idx(img, lab, 4);
  ASSERT_EQ(back.images.shape(), d.images.shape());
  for (std::size_t i = 0; i < d.images.size(); ++i) {
    const auto q = std::uint8_t(std::lround(d.images[i] * 255.0f));
    ASSERT_EQ(back.images[i], float(q) / 255.0f);
  }
  EXPECT_EQ(back.labels, d.labels);
  // a second pass is a fixed point
  write_idx(back, img, lab);
  EXPECT_EQ(read_idx(img, lab, 4).images, back.images);
}

Bytes cifar_record(std::uint8_t label) {
  Bytes r(kCifarRecordBytes);
  r[0] = label;
  for (std::size_t i = 0; i < 3072; ++i) r[1 + i] = std::uint8_t((i * 7 + i / 1024) % 256);
  return r;
}

TEST(ReadCifar, SingleRecord) {
  const Dataset d = parse_cifar_binary(cifar_record(3), "fixture");
  ASSERT_EQ(d.images.shape(), (Shape{1, 3, 32, 32}));
  EXPECT_EQ(d.classes(), (std::vector<std::size_t>{3}));
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 32; ++x) {
        const std::size_t i = c * 1024 + y * 32 + x;
        ASSERT_EQ(d.images[i], float((i * 7 + c) % 256) / 255.0f);
      }
}

TEST(ReadCifar, TwoRecordsFromFile) {
  Bytes two = cifar_record(9);
  const Bytes second = cifar_record(0);
  two.insert(two.end(), second.begin(), second.end());
  const Dataset d = read_cifar_binary(write_bytes("cifar2", two));
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.classes(), (std::vector<std::size_t>{9, 0}));
}

TEST(ReadCifar, Errors) {
  Bytes r = cifar_record(1);
  r.pop_back();
  EXPECT_THROW(parse_cifar_binary(r, "short"), FormatError);
  EXPECT_THROW(parse_cifar_binary(cifar_record(10), "label"), FormatError);
  EXPECT_THROW(parse_cifar_binary(Bytes{}, "empty"), FormatError);
}

TEST(SynthShapes, Deterministic) {
  EXPECT_EQ(synth_shapes(20, 16, 3, 0.0, 5).images, synth_shapes(20, 16, 3, 0.0, 5).images);
  EXPECT_EQ(synth_shapes(20, 16, 3, 0.05, 5).images, synth_shapes(20, 16, 3, 0.05, 5).images);
  EXPECT_NE(synth_shapes(20, 16, 3, 0.0, 5).images, synth_shapes(20, 16, 3, 0.0, 6).images);
}

TEST(SynthShapes, ClassHistogram) {
  const Dataset d = synth_shapes(6000, 16, 3, 0.05, 1);
  std::vector<std::size_t> hist(3);
  for (std::size_t c : d.classes()) ++hist[c];
  EXPECT_EQ(hist, (std::vector<std::size_t>{2000, 2000, 2000}));
  for (float v : d.images.values()) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
}

TEST(SynthShapes, UnsupportedArguments) {
  EXPECT_THROW(synth_shapes(10, 16, 1, 0.0, 0), ConfigError);
  EXPECT_THROW(synth_shapes(10, 16, 7, 0.0, 0), ConfigError);
  EXPECT_THROW(synth_shapes(10, 8, 3, 0.0, 0), ConfigError);
  EXPECT_NO_THROW(synth_shapes(12, 16, 6, 0.0, 0));
}

TEST(SynthShapes, LinearlyLearnable) {
  // softmax regression on raw pixels, trained by plain gradient descent
  const Dataset train = synth_shapes(1000, 16, 2, 0.05, 21);
  const Dataset test = synth_shapes(400, 16, 2, 0.05, 22);
  Tensor w(Shape{256, 2}), b(Shape{2});
  const Tensor x = train.images.reshaped(Shape{1000, 256});
  for (int it = 0; it < 300; ++it) {
    Tape tape;
    Var wv = tape.variable(w), bv = tape.variable(b);
    Var loss = tape.softmax_cross_entropy(tape.bias_add(tape.matmul(tape.constant(x), wv), bv),
                                          tape.constant(train.labels));
    tape.backward(loss);
    const Tensor gw = tape.grad(wv), gb = tape.grad(bv);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= 0.5f * gw[i];
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= 0.5f * gb[i];
  }
  std::size_t correct = 0;
  const std::vector<std::size_t> cls = test.classes();
  for (std::size_t n = 0; n < 400; ++n) {
    double z[2] = {b[0], b[1]};
    for (std::size_t p = 0; p < 256; ++p)
      for (std::size_t k = 0; k < 2; ++k) z[k] += double(test.images[n * 256 + p]) * w[p * 2 + k];
    correct += (z[1] > z[0] ? 1u : 0u) == cls[n];
  }
  EXPECT_GE(double(correct) / 400.0, 0.70);
}

TEST(Split, SizesAndDisjoint) {
  const Dataset d = synth_shapes(100, 16, 2, 0.0, 2);
  const std::vector<double> f{0.8, 0.2};
  const auto idx = split_indices(d.classes(), 2, f, 7);
  ASSERT_EQ(idx.size(), 2u);
  EXPECT_EQ(idx[0].size(), 80u);
  EXPECT_EQ(idx[1].size(), 20u);
  std::set<std::size_t> all(idx[0].begin(), idx[0].end());
  for (std::size_t i : idx[1]) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), 100u);
  EXPECT_EQ(*all.rbegin(), 99u);
  const std::vector<Dataset> parts = split(d, f, 7);
  EXPECT_EQ(parts[0].size(), 80u);
  EXPECT_EQ(parts[1].size(), 20u);
}

TEST(Split, Stratified) {
  const Dataset d = synth_shapes(103, 16, 3, 0.0, 2);
  const std::vector<double> f{0.5, 0.3, 0.2};
  const std::vector<std::size_t> cls = d.classes();
  const auto idx = split_indices(cls, 3, f, 9);
  std::vector<std::size_t> per_class(3);
  for (std::size_t c : cls) ++per_class[c];
  for (std::size_t s = 0; s < 3; ++s) {
    std::vector<std::size_t> count(3);
    for (std::size_t i : idx[s]) ++count[cls[i]];
    for (std::size_t c = 0; c < 3; ++c) EXPECT_LE(std::abs(double(count[c]) - f[s] * double(per_class[c])), 1.0);
  }
}

TEST(Split, SeedDeterminism) {
  const Dataset d = synth_shapes(60, 16, 3, 0.0, 2);
  const std::vector<double> f{0.7, 0.3};
  EXPECT_EQ(split_indices(d.classes(), 3, f, 1), split_indices(d.classes(), 3, f, 1));
  EXPECT_NE(split_indices(d.classes(), 3, f, 1), split_indices(d.classes(), 3, f, 2));
}

TEST(Split, BadFractionsAreConfigError) {
  const Dataset d = synth_shapes(20, 16, 2, 0.0, 2);
  const std::vector<double> bad{0.5, 0.4}, negative{1.2, -0.2};
  EXPECT_THROW(split(d, bad, 0), ConfigError);
  EXPECT_THROW(split(d, negative, 0), ConfigError);
}

TEST(DatasetInvariants, RejectsBadLabelsAndPixels) {
  EXPECT_THROW(Dataset::make(Tensor(Shape{1, 1, 2, 2}, 0.5f), Tensor(Shape{1, 2}, {0.5f, 0.5f}), 2, "x"),
               ValidationError);
  EXPECT_THROW(Dataset::make(Tensor(Shape{1, 1, 2, 2}, 1.5f), Tensor(Shape{1, 2}, {1, 0}), 2, "x"),
               ValidationError);
}

}  // namespace
}  // namespace semx
