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

#ifndef SEMX_OPTIM_HPP_
#define SEMX_OPTIM_HPP_

#include <span>
#include <vector>

#include "semx/tensor.hpp"

namespace semx {

/// SGD with heavy-ball momentum and L2 weight decay:
///   v <- momentum * v + grad + weight_decay * param
///   param <- param - lr * v
/// Velocity buffers are created zeroed on the first step.
class Sgd {
 public:
  Sgd(double momentum, double weight_decay);

  void step(std::span<Tensor> params, std::span<const Tensor> grads, double lr);

  const std::vector<Tensor>& velocities() const { return velocity_; }

 private:
  double momentum_;
  double weight_decay_;
  std::vector<Tensor> velocity_;
};

/// Stateless form of one update; `velocities` must parallel `params`.
void sgd_step(std::span<Tensor> params, std::span<const Tensor> grads,
              std::span<Tensor> velocities, double lr, double momentum,
              double weight_decay);

}  // namespace semx

#endif  // SEMX_OPTIM_HPP_
