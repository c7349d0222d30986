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

#include <vector>

#include <gtest/gtest.h>

#include "semx/errors.hpp"
#include "semx/optim.hpp"

namespace semx {
namespace {

TEST(Sgd, PlainStep) {
  std::vector<Tensor> w{Tensor::scalar(1.0f)}, g{Tensor::scalar(2.0f)}, v{Tensor::scalar(0.0f)};
  sgd_step(w, g, v, 0.1, 0.0, 0.0);
  EXPECT_FLOAT_EQ(w[0].item(), 0.8f);
}

TEST(Sgd, ZeroGradientIsNoOp) {
  std::vector<Tensor> w{Tensor(Shape{3}, {1, -2, 3})}, g{Tensor(Shape{3})}, v{Tensor(Shape{3})};
  sgd_step(w, g, v, 0.1, 0.9, 0.0);
  EXPECT_EQ(w[0], Tensor(Shape{3}, {1, -2, 3}));
}

TEST(Sgd, MomentumTwoSteps) {
  // v1 = g, v2 = 0.9 g + g => displacement lr g (1 + 1.9)
  const double lr = 0.1, g0 = 0.5;
  Sgd opt(0.9, 0.0);
  std::vector<Tensor> w{Tensor::scalar(0.0f)};
  const std::vector<Tensor> g{Tensor::scalar(float(g0))};
  opt.step(w, g, lr);
  opt.step(w, g, lr);
  EXPECT_NEAR(-w[0].item(), lr * g0 * 2.9, 1e-7);
}

TEST(Sgd, WeightDecayEntersVelocity) {
  std::vector<Tensor> w{Tensor::scalar(2.0f)}, g{Tensor::scalar(0.0f)}, v{Tensor::scalar(0.0f)};
  sgd_step(w, g, v, 0.5, 0.0, 0.1);
  EXPECT_FLOAT_EQ(v[0].item(), 0.2f);
  EXPECT_FLOAT_EQ(w[0].item(), 1.9f);
}

TEST(Sgd, NonPositiveRateIsConfigError) {
  std::vector<Tensor> w{Tensor::scalar(1.0f)}, g{Tensor::scalar(1.0f)}, v{Tensor::scalar(0.0f)};
  EXPECT_THROW(sgd_step(w, g, v, 0.0, 0.9, 0.0), ConfigError);
  EXPECT_THROW(sgd_step(w, g, v, -1.0, 0.9, 0.0), ConfigError);
  Sgd opt(0.9, 0.0);
  EXPECT_THROW(opt.step(w, g, 0.0), ConfigError);
}

TEST(Sgd, ShapeMismatch) {
  std::vector<Tensor> w{Tensor(Shape{2})}, g{Tensor(Shape{3})}, v{Tensor(Shape{2})};
  EXPECT_THROW(sgd_step(w, g, v, 0.1, 0.0, 0.0), DimensionError);
}

}  // namespace
}  // namespace semx
