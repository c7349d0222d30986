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

#include "semx/optim.hpp"

#include <cmath>
#include <string>

namespace semx {

void sgd_step(std::span<Tensor> params, std::span<const Tensor> grads,
              std::span<Tensor> velocities, double lr, double momentum,
              double weight_decay) {
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw ConfigError("learning rate must be positive, got " + std::to_string(lr));
  }
  if (momentum < 0.0 || weight_decay < 0.0) {
    throw ConfigError("momentum and weight decay must be non-negative");
  }
  if (grads.size() != params.size() || velocities.size() != params.size()) {
    throw UsageError("sgd_step: parameter, gradient and velocity counts differ");
  }
  const float m = static_cast<float>(momentum);
  const float wd = static_cast<float>(weight_decay);
  const float step = static_cast<float>(lr);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = params[p];
    const Tensor& g = grads[p];
    Tensor& v = velocities[p];
    if (g.shape() != w.shape() || v.shape() != w.shape()) {
      throw DimensionError("sgd_step: shape mismatch for parameter " +
                           std::to_string(p));
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = m * v[i] + g[i] + wd * w[i];
      w[i] -= step * v[i];
    }
  }
}

Sgd::Sgd(double momentum, double weight_decay)
    : momentum_(momentum), weight_decay_(weight_decay) {
  if (momentum < 0.0 || weight_decay < 0.0) {
    throw ConfigError("momentum and weight decay must be non-negative");
  }
}

void Sgd::step(std::span<Tensor> params, std::span<const Tensor> grads,
               double lr) {
  if (velocity_.empty()) {
    velocity_.reserve(params.size());
    for (const Tensor& p : params) velocity_.emplace_back(p.shape());
  }
  sgd_step(params, grads, velocity_, lr, momentum_, weight_decay_);
}

}  // namespace semx
