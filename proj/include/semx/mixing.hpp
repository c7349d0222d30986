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

#ifndef SEMX_MIXING_HPP_
#define SEMX_MIXING_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semx/rng.hpp"
#include "semx/tape.hpp"
#include "semx/tensor.hpp"

namespace semx {

enum class MixKind { kNone, kLinear, kCutMix };
enum class LambdaGranularity { kPerBatch, kPerSample };

std::string to_string(MixKind kind);
MixKind parse_mix_kind(const std::string& text);
std::string to_string(LambdaGranularity g);
LambdaGranularity parse_lambda_granularity(const std::string& text);

struct MixPolicy {
  MixKind kind = MixKind::kNone;
  double alpha = 1.0;
  LambdaGranularity granularity = LambdaGranularity::kPerBatch;
  /// Use this ratio instead of drawing from Beta(alpha, alpha).
  std::optional<double> fixed_lambda;

  void validate() const;
};

/// A labelled minibatch: x is [N, ...], y is [N, K] with simplex rows.
struct Batch {
  Tensor x;
  Tensor y;
};

/// Mixed inputs and labels plus everything needed to mix representations
/// consistently with them.
struct MixedBatch {
  Tensor x_mixed;
  Tensor y_mixed;
  /// Ratio actually realised. For cutmix this is the pasted pixel fraction
  /// after border clipping, which may differ from the drawn ratio.
  double lambda_eff = 1.0;
  /// The ratio that was drawn (or forced) before any clipping correction.
  double lambda_drawn = 1.0;
  /// Per-row ratio used for labels and representations; all equal to
  /// lambda_eff under per-batch granularity.
  std::vector<double> row_lambdas;
  /// Row i was mixed with row pair[i].
  std::vector<std::size_t> pair;
  /// Cutmix only: 1 where the pixel came from x_i. [H, W] for one shared box,
  /// [N, H, W] for per-sample boxes.
  std::optional<Tensor> mask;
};

/// Beta(alpha, alpha) draw as G1 / (G1 + G2) with Gamma(alpha, 1) draws.
double sample_lambda(double alpha, Rng& rng);

/// Uniform random permutation; sample i pairs with the returned [i].
std::vector<std::size_t> pair_indices(std::size_t n, Rng& rng);

/// x = lambda x_i + (1 - lambda) x_j and the same for y. The convex
/// combination is evaluated in double and rounded once, so lambda in {0, 1}
/// and x_i == x_j reproduce an input bitwise.
MixedBatch mix_linear(const Tensor& x_i, const Tensor& x_j, const Tensor& y_i,
                      const Tensor& y_j, double lambda);

/// Input half of mix_linear.
Tensor mix_inputs(const Tensor& x_i, const Tensor& x_j, double lambda);

/// Half-open pixel rectangle [y0, y1) x [x0, x1).
struct CutBox {
  std::size_t y0 = 0, y1 = 0, x0 = 0, x1 = 0;
  std::size_t area() const { return (y1 - y0) * (x1 - x0); }
};

/// Box with sides round(H sqrt(lambda)) x round(W sqrt(lambda)) centred at
/// (cy, cx), clipped to the image.
CutBox cutmix_box(std::size_t height, std::size_t width, double lambda_target,
                  std::size_t cy, std::size_t cx);

/// cutmix_box with a uniformly drawn centre.
CutBox sample_cutmix_box(std::size_t height, std::size_t width,
                         double lambda_target, Rng& rng);

/// Pastes `box` of x_i onto x_j. Inputs are [C,H,W] or [N,C,H,W]; one box is
/// shared by every row. Labels are mixed with the clip-corrected ratio.
MixedBatch mix_cutmix_box(const Tensor& x_i, const Tensor& x_j,
                          const Tensor& y_i, const Tensor& y_j,
                          const CutBox& box);

MixedBatch mix_cutmix(const Tensor& x_i, const Tensor& x_j, const Tensor& y_i,
                      const Tensor& y_j, double lambda_target, Rng& rng);

/// lambda r_i + (1 - lambda) r_j, recorded on the tape.
template <typename T>
Var mix_representations(BasicTape<T>& tape, Var r_i, Var r_j, double lambda);

/// Row-wise variant for per-sample ratios.
template <typename T>
Var mix_representations(BasicTape<T>& tape, Var r_i, Var r_j,
                        std::span<const double> row_lambdas);

/// Pairs the batch, draws one ratio (or one per row), and dispatches to the
/// policy's input mixing. kind == none returns the batch untouched with
/// lambda_eff = 1 and the identity pairing. Consumes rng in the order:
/// pairing, ratio(s), cutmix centre(s).
MixedBatch make_mixed_batch(const Batch& batch, const MixPolicy& policy,
                            Rng& rng);

}  // namespace semx

#endif  // SEMX_MIXING_HPP_
