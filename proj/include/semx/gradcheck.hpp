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

#ifndef SEMX_GRADCHECK_HPP_
#define SEMX_GRADCHECK_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "semx/mixing.hpp"
#include "semx/model.hpp"
#include "semx/tape.hpp"
#include "semx/training.hpp"

namespace semx {

struct GradcheckOptions {
  double step = 1e-3;       // central-difference half width
  double tolerance = 1e-3;  // max relative error
  /// Relative errors are taken against max(|analytic|, |numeric|, floor) so
  /// entries whose true gradient is ~0 are judged on absolute error.
  double floor = 1e-4;
  std::optional<BackwardFault> fault;
};

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
  /// Entries whose +-step perturbation switched some relu on or off.
  std::size_t kinks_skipped = 0;
  bool passed = false;
};

/// Compares the float32 backward pass of the combined objective against
/// central differences of a float64 re-evaluation, entry by entry over every
/// parameter of `model`. Entries where a perturbation crosses a relu kink
/// are counted and skipped.
GradcheckResult check_sem_gradients(const Model& model, const Batch& batch,
                                    const MixedBatch& mixed, const SemConfig& sem,
                                    const GradcheckOptions& options);

/// Fixture used by the `gradcheck` command: a conv + dense model under 5k
/// parameters, a random batch of 8x8 images, a linear mix and gamma = 0.5,
/// all drawn from `seed`.
GradcheckResult run_gradcheck(std::uint64_t seed, const GradcheckOptions& options = {});

/// The model run_gradcheck uses.
Model gradcheck_model(std::uint64_t seed);

}  // namespace semx

#endif  // SEMX_GRADCHECK_HPP_
