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
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "semx/errors.hpp"
#include "semx/data.hpp"
#include "semx/mixing.hpp"
#include "semx/rng.hpp"

namespace semx {
namespace {

Tensor onehots(const std::vector<std::size_t>& cls, std::size_t k) { return one_hot(cls, k); }

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (float& v : t.data()) v = float(rng.uniform());
  return t;
}

double ks_uniform(std::vector<double> draws) {
  std::sort(draws.begin(), draws.end());
  const double n = double(draws.size());
  double d = 0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    d = std::max({d, (i + 1) / n - draws[i], draws[i] - i / n});
  }
  return d;
}

TEST(SampleLambda, AlphaOneIsUniform) {
  Rng rng(1);
  std::vector<double> draws(100000);
  for (double& d : draws) d = sample_lambda(1.0, rng);
  EXPECT_LE(ks_uniform(draws), 0.02);
}

TEST(SampleLambda, MomentsForSeveralAlphas) {
  for (double alpha : {0.2, 1.0, 2.0, 5.0}) {
    Rng rng(17);
    const int n = 100000;
    double s = 0, ss = 0;
    for (int i = 0; i < n; ++i) {
      const double l = sample_lambda(alpha, rng);
      ASSERT_GE(l, 0.0);
      ASSERT_LE(l, 1.0);
      s += l;
      ss += l * l;
    }
    const double mean = s / n, var = ss / n - mean * mean;
    const double expected = 1.0 / (4.0 * (2.0 * alpha + 1.0));
    EXPECT_NEAR(mean, 0.5, 0.01) << alpha;
    EXPECT_NEAR(var / expected, 1.0, 0.05) << alpha;
  }
}

TEST(SampleLambda, NonPositiveAlphaIsConfigError) {
  Rng rng(0);
  EXPECT_THROW(sample_lambda(0.0, rng), ConfigError);
  EXPECT_THROW(sample_lambda(-1.0, rng), ConfigError);
}

TEST(PairIndices, IsPermutation) {
  Rng rng(3);
  std::vector<std::size_t> p = pair_indices(50, rng);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], i);
}

TEST(PairIndices, Deterministic) {
  Rng a(5), b(5);
  EXPECT_EQ(pair_indices(20, a), pair_indices(20, b));
}

TEST(PairIndices, SlotZeroIsUniform) {
  Rng rng(6);
  std::vector<int> hits(4);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++hits[pair_indices(4, rng)[0]];
  for (int h : hits) EXPECT_NEAR(double(h) / draws, 0.25, 0.02);
}

TEST(PairIndices, TooFewIsUsageError) {
  Rng rng(0);
  EXPECT_THROW(pair_indices(1, rng), UsageError);
}

TEST(MixLinear, Endpoints) {
  const Tensor xi = random_tensor({3, 4}, 1), xj = random_tensor({3, 4}, 2);
  const Tensor yi = onehots({0, 1, 2}, 3), yj = onehots({2, 2, 0}, 3);
  const MixedBatch one = mix_linear(xi, xj, yi, yj, 1.0);
  EXPECT_EQ(one.x_mixed, xi);
  EXPECT_EQ(one.y_mixed, yi);
  const MixedBatch zero = mix_linear(xi, xj, yi, yj, 0.0);
  EXPECT_EQ(zero.x_mixed, xj);
  EXPECT_EQ(zero.y_mixed, yj);
}

TEST(MixLinear, SelfMix) {
  const Tensor x = random_tensor({2, 5}, 3);
  const Tensor y = onehots({0, 1}, 2);
  for (double lambda : {0.1, 0.37, 0.5, 0.99}) EXPECT_EQ(mix_linear(x, x, y, y, lambda).x_mixed, x);
}

TEST(MixLinear, LabelArithmetic) {
  const Tensor x(Shape{1, 2});
  const MixedBatch m = mix_linear(x, x, onehots({0}, 3), onehots({2}, 3), 0.3);
  EXPECT_NEAR(m.y_mixed[0], 0.3, 1e-7);
  EXPECT_EQ(m.y_mixed[1], 0.0f);
  EXPECT_NEAR(m.y_mixed[2], 0.7, 1e-7);
  EXPECT_EQ(m.lambda_eff, 0.3);
}

TEST(MixLinear, Symmetric) {
  const Tensor xi = random_tensor({4, 6}, 4), xj = random_tensor({4, 6}, 5);
  const Tensor yi = onehots({0, 1, 2, 0}, 3), yj = onehots({1, 1, 0, 2}, 3);
  for (double lambda : {0.2, 0.5, 0.75}) {
    const MixedBatch a = mix_linear(xi, xj, yi, yj, lambda);
    const MixedBatch b = mix_linear(xj, xi, yj, yi, 1.0 - lambda);
    for (std::size_t i = 0; i < a.x_mixed.size(); ++i) EXPECT_NEAR(a.x_mixed[i], b.x_mixed[i], 1e-7);
    for (std::size_t i = 0; i < a.y_mixed.size(); ++i) EXPECT_NEAR(a.y_mixed[i], b.y_mixed[i], 1e-7);
  }
}

TEST(MixLinear, OutOfRangeLambdaIsValidationError) {
  const Tensor x(Shape{1, 2});
  const Tensor y = onehots({0}, 2);
  EXPECT_THROW(mix_linear(x, x, y, y, 1.5), ValidationError);
  EXPECT_THROW(mix_linear(x, x, y, y, -0.1), ValidationError);
}

TEST(CutMix, QuarterAreaOnFourByFour) {
  const CutBox box = cutmix_box(4, 4, 0.25, 2, 2);
  EXPECT_EQ(box.y1 - box.y0, 2u);
  EXPECT_EQ(box.x1 - box.x0, 2u);
  Tensor xi(Shape{1, 4, 4}, 1.0f), xj(Shape{1, 4, 4}, 0.0f);
  const MixedBatch m = mix_cutmix_box(xi, xj, onehots({0}, 2), onehots({1}, 2), box);
  EXPECT_EQ(m.lambda_eff, 0.25);
  float ones = 0;
  for (float v : m.x_mixed.values()) ones += v;
  EXPECT_EQ(ones, 4.0f);
  EXPECT_NEAR(m.y_mixed[0], 0.25, 1e-7);
}

TEST(CutMix, ZeroLambdaTakesSecondSample) {
  Rng rng(1);
  const Tensor xi = random_tensor({1, 6, 6}, 1), xj = random_tensor({1, 6, 6}, 2);
  const Tensor yi = onehots({0}, 3), yj = onehots({2}, 3);
  const MixedBatch m = mix_cutmix(xi, xj, yi, yj, 0.0, rng);
  EXPECT_EQ(m.x_mixed, xj);
  EXPECT_EQ(m.y_mixed, yj);
  for (float v : m.mask->values()) EXPECT_EQ(v, 0.0f);
}

TEST(CutMix, BorderClippingShrinksArea) {
  const CutBox box = cutmix_box(8, 8, 0.25, 0, 0);
  EXPECT_EQ(box.area(), 4u);
}

TEST(CutMix, MaskMeanEqualsLambdaEffEveryDraw) {
  Rng rng(12);
  for (std::size_t hw : {8, 16, 32}) {
    const Tensor xi = random_tensor({2, hw, hw}, hw), xj = random_tensor({2, hw, hw}, hw + 1);
    const Tensor yi = onehots({1}, 4), yj = onehots({3}, 4);
    for (int d = 0; d < 3334; ++d) {
      const MixedBatch m = mix_cutmix(xi, xj, yi, yj, rng.uniform(), rng);
      std::size_t ones = 0;
      for (float v : m.mask->values()) ones += v == 1.0f;
      ASSERT_EQ(double(ones) / double(hw * hw), m.lambda_eff);
      double row = 0;
      for (float v : m.y_mixed.values()) row += v;
      ASSERT_NEAR(row, 1.0, 1e-6);
    }
  }
}

TEST(CutMix, SelfMixIgnoresMask) {
  Rng rng(2);
  const Tensor x = random_tensor({3, 8, 8}, 7);
  const Tensor y = onehots({1}, 2);
  EXPECT_EQ(mix_cutmix(x, x, y, y, 0.6, rng).x_mixed, x);
}

TEST(MixRepresentations, Midpoint) {
  Tape tape;
  Var r = mix_representations(tape, tape.constant(Tensor(Shape{1, 2}, {2, 0})),
                              tape.constant(Tensor(Shape{1, 2}, {0, 2})), 0.5);
  EXPECT_EQ(tape.value(r), Tensor(Shape{1, 2}, {1, 1}));
}

TEST(MixRepresentations, SelfMixAndGradient) {
  const Tensor ri = random_tensor({3, 4}, 8);
  for (double lambda : {0.0, 0.3, 1.0}) {
    Tape tape;
    Var a = tape.variable(ri);
    Var out = mix_representations(tape, a, a, lambda);
    EXPECT_EQ(tape.value(out), ri);
  }
  Tape tape;
  Var a = tape.variable(ri), b = tape.variable(random_tensor({3, 4}, 9));
  tape.backward(tape.sum(mix_representations(tape, a, b, 0.35)));
  const Tensor g = tape.grad(a);
  for (float v : g.values()) EXPECT_FLOAT_EQ(v, 0.35f);
}

TEST(MixRepresentations, ShapeMismatchIsDimensionError) {
  Tape tape;
  EXPECT_THROW(mix_representations(tape, tape.constant(Tensor(Shape{2, 3})),
                                   tape.constant(Tensor(Shape{3, 2})), 0.5),
               DimensionError);
}

TEST(MakeMixedBatch, NoneIsPassThrough) {
  Rng rng(0);
  Batch b{random_tensor({4, 1, 8, 8}, 1), onehots({0, 1, 2, 0}, 3)};
  const MixedBatch m = make_mixed_batch(b, MixPolicy{}, rng);
  EXPECT_EQ(m.x_mixed, b.x);
  EXPECT_EQ(m.y_mixed, b.y);
  EXPECT_EQ(m.lambda_eff, 1.0);
}

TEST(MakeMixedBatch, ForcedLambdaOneIsOriginal) {
  Rng rng(0);
  Batch b{random_tensor({5, 3}, 2), onehots({0, 1, 2, 0, 1}, 3)};
  MixPolicy p{.kind = MixKind::kLinear, .alpha = 1.0, .fixed_lambda = 1.0};
  const MixedBatch m = make_mixed_batch(b, p, rng);
  EXPECT_EQ(m.x_mixed, b.x);
  EXPECT_EQ(m.y_mixed, b.y);
}

TEST(MakeMixedBatch, CutMixLabelsUseMaskRatio) {
  Rng rng(4);
  Batch b{random_tensor({6, 1, 8, 8}, 3), onehots({0, 1, 2, 0, 1, 2}, 3)};
  MixPolicy p{.kind = MixKind::kCutMix, .alpha = 1.0};
  for (int t = 0; t < 200; ++t) {
    const MixedBatch m = make_mixed_batch(b, p, rng);
    double ones = 0;
    for (float v : m.mask->values()) ones += v;
    const double ratio = ones / 64.0;
    ASSERT_EQ(ratio, m.lambda_eff);
    for (std::size_t r = 0; r < 6; ++r) {
      const std::size_t cj = b.y.values()[m.pair[r] * 3] == 1 ? 0 : b.y.values()[m.pair[r] * 3 + 1] == 1 ? 1 : 2;
      const std::size_t ci = r % 3;
      for (std::size_t k = 0; k < 3; ++k) {
        const double want = ratio * (k == ci) + (1 - ratio) * (k == cj);
        ASSERT_NEAR(m.y_mixed[r * 3 + k], want, 1e-6);
      }
    }
  }
}

TEST(MakeMixedBatch, PerSampleLambdas) {
  Rng rng(5);
  Batch b{random_tensor({8, 4}, 4), onehots({0, 1, 0, 1, 0, 1, 0, 1}, 2)};
  MixPolicy p{.kind = MixKind::kLinear, .alpha = 1.0, .granularity = LambdaGranularity::kPerSample};
  const MixedBatch m = make_mixed_batch(b, p, rng);
  ASSERT_EQ(m.row_lambdas.size(), 8u);
  EXPECT_NE(m.row_lambdas[0], m.row_lambdas[1]);
  for (std::size_t r = 0; r < 8; ++r) {
    EXPECT_NEAR(m.y_mixed[r * 2] + m.y_mixed[r * 2 + 1], 1.0, 1e-6);
  }
}

TEST(MakeMixedBatch, SingleSampleIsUsageError) {
  Rng rng(0);
  Batch b{random_tensor({1, 4}, 4), onehots({0}, 2)};
  EXPECT_THROW(make_mixed_batch(b, MixPolicy{.kind = MixKind::kLinear}, rng), UsageError);
}

}  // namespace
}  // namespace semx
