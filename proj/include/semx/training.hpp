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

#ifndef SEMX_TRAINING_HPP_
#define SEMX_TRAINING_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "semx/data.hpp"
#include "semx/mixing.hpp"
#include "semx/model.hpp"
#include "semx/optim.hpp"
#include "semx/rng.hpp"
#include "semx/tape.hpp"

namespace semx {

enum class PenaltyVariant { kNorm, kSquaredNorm };

std::string to_string(PenaltyVariant v);
PenaltyVariant parse_penalty_variant(const std::string& text);

/// Weight and shape of the representation-equivariance penalty.
struct SemConfig {
  double gamma = 0.0;
  /// Treat the mixed target representations as constants.
  bool stop_gradient_targets = false;
  PenaltyVariant penalty = PenaltyVariant::kNorm;

  void validate() const;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double lr = 0.05;
  /// Number of completed epochs after which the rate is multiplied by
  /// lr_factor. Empty means 50% and 75% of `epochs`.
  std::vector<std::size_t> lr_milestones;
  double lr_factor = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  MixPolicy mix;
  SemConfig sem;
  /// Trailing fraction of epochs trained without mixed samples.
  double es_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<std::size_t> resolved_milestones() const;
  /// Learning rate in effect during 1-based `epoch`.
  double lr_for_epoch(std::size_t epoch) const;
  /// Epochs 1..mixing_epochs() use mixed samples; the remaining
  /// round(es_fraction * epochs) do not.
  std::size_t mixing_epochs() const;
};

struct MetricsRecord {
  std::size_t epoch = 0;
  std::string split;
  double loss_total = 0.0;
  double loss_label = 0.0;
  double loss_sem = 0.0;
  double accuracy = 0.0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

/// Terms of the combined objective, all scalar.
struct SemLossTerms {
  Var total;
  Var label;
  Var sem;
  Var logits;  // of the mixed input, for accuracy bookkeeping
};

/// label CE(f(x_mixed), y_mixed) + gamma * mean_n ||g(x_mixed)_n - M_n||,
/// where M_n mixes g(x_i)_n and g(x_j)_n with the batch's realised per-row
/// ratios. The three extractor passes (mixed, originals, partners) share
/// `params`; gradients flow through all of them unless
/// stop_gradient_targets. Inputs are recorded as constants of type T.
template <typename T>
SemLossTerms sem_loss(BasicTape<T>& tape, const ModelSpec& spec,
                      std::span<const Var> params, const Batch& batch,
                      const MixedBatch& mixed, const SemConfig& sem);

/// Thrown when training produces a non-finite loss or gradient.
class TrainingDiverged : public NumericError {
 public:
  using NumericError::NumericError;
};

/// One pass over `data` in a random order drawn from `rng`. When mixing is
/// enabled (and the policy is not `none`) every batch is mixed and trained
/// on the combined objective; otherwise it is plain ERM on clean samples
/// with loss_sem = 0. Batches smaller than two samples are skipped.
/// Called after every optimizer step with the updated parameters.
using StepHook = std::function<void(const Model&)>;

MetricsRecord train_epoch(Model& model, Sgd& optimizer, const Dataset& data,
                          const TrainConfig& config, Rng& rng,
                          bool mixing_enabled, std::size_t epoch,
                          const StepHook& on_step = {});

/// Clean-sample cross entropy and accuracy, as a record for `split`.
MetricsRecord evaluate_record(const Model& model, const Dataset& data,
                              std::size_t epoch, const std::string& split);

using RecordSink = std::function<void(const MetricsRecord&)>;

/// Full schedule: epoch e (1-based) draws its randomness from
/// Rng::stream(seed, e), mixes while e <= mixing_epochs(), and is followed
/// by a "val" record when `validation` is non-empty.
std::vector<MetricsRecord> train(Model& model, const Dataset& training,
                                 const Dataset* validation,
                                 const TrainConfig& config,
                                 const RecordSink& sink = {},
                                 const StepHook& on_step = {});

}  // namespace semx

#endif  // SEMX_TRAINING_HPP_
