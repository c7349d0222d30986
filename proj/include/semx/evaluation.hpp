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

#ifndef SEMX_EVALUATION_HPP_
#define SEMX_EVALUATION_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semx/data.hpp"
#include "semx/model.hpp"
#include "semx/rng.hpp"

namespace semx {

/// Fraction of rows whose logit argmax equals the label argmax. Ties go to
/// the lowest class index on both sides.
double accuracy_from_logits(const Tensor& logits, const Tensor& labels);

double accuracy(const Model& model, const Dataset& dataset);

enum class CorruptionKind { kGaussianNoise, kImpulseNoise, kGaussianBlur, kContrast };

inline constexpr std::array<CorruptionKind, 4> kCorruptionKinds = {
    CorruptionKind::kGaussianNoise, CorruptionKind::kImpulseNoise,
    CorruptionKind::kGaussianBlur, CorruptionKind::kContrast};
inline constexpr int kSeverityLevels = 5;

std::string to_string(CorruptionKind kind);
CorruptionKind parse_corruption_kind(const std::string& text);

/// Severity tables (index severity - 1). These are this project's own
/// constants, loosely modelled on common corruption benchmarks:
///   gaussian-noise  sigma     0.04 0.06 0.08 0.09 0.10
///   impulse-noise   fraction  0.01 0.02 0.03 0.05 0.07
///   gaussian-blur   sigma     0.4  0.6  0.8  1.0  1.2
///   contrast        factor    0.75 0.6  0.45 0.3  0.15
double corruption_parameter(CorruptionKind kind, int severity);

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::kGaussianNoise;
  int severity = 1;
  /// Replaces the table value, e.g. sigma = 0 for a no-op control.
  std::optional<double> parameter;

  double value() const;
};

/// Applies the corruption to images in [0,1] ([N,C,H,W] or [C,H,W]) and
/// clamps the result back to [0,1]. Noise is drawn from `rng` in row-major
/// pixel order. Blur uses a separable normalised Gaussian of radius
/// ceil(3 sigma) with edge replication. Contrast maps p to 0.5 + c (p - 0.5).
Tensor corrupt(const Tensor& images, const CorruptionSpec& spec, Rng& rng);

/// Normalised taps exp(-i^2 / 2 sigma^2) for i in [-r, r], r = ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

struct CorruptionReport {
  /// accuracy[kind][severity - 1]
  std::array<std::array<double, kSeverityLevels>, kCorruptionKinds.size()> accuracy{};
  double mean = 0.0;
};

/// Accuracy on every (kind, severity) cell; cell noise comes from
/// Rng::stream(seed, 5 * kind + severity - 1).
CorruptionReport corruption_suite_eval(const Model& model, const Dataset& clean_test,
                                       std::uint64_t seed);

/// Maximum softmax probability of each logit row.
std::vector<double> msp_from_logits(const Tensor& logits);
std::vector<double> msp_scores(const Model& model, const Dataset& dataset);

/// P(id > ood) + P(id == ood) / 2 over all cross pairs, from the rank sum of
/// the pooled scores with average ranks for ties.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

struct GapCurve {
  std::vector<double> lambdas;
  std::vector<double> gap_mean;
  std::vector<double> gap_std;  // sample standard deviation over pairs
  std::size_t pair_count = 0;
};

/// Uniform grid 0, step, ..., 1. 1/step must be (close to) an integer.
std::vector<double> lambda_grid(double step);

/// For each lambda: mean and std over pairs p of
///   || g(lambda a_p + (1 - lambda) b_p) - (lambda g(a_p) + (1 - lambda) g(b_p)) ||_2
/// with a and b of shape [P, ...]. When `mixed_representations` is given it
/// receives g of the mixed inputs, one [P, D] tensor per lambda.
GapCurve equivariance_gap(const Model& model, const Tensor& a, const Tensor& b,
                          std::span<const double> lambdas,
                          std::vector<Tensor>* mixed_representations = nullptr);

struct PcaResult {
  std::size_t rows = 0;
  std::size_t dims = 0;
  std::vector<double> mean;             // [D]
  std::vector<double> components;       // [D, dims] row-major
  std::vector<double> projection;       // [N, dims] row-major
  std::vector<double> singular_values;  // all min(N, D), descending
};

/// Principal axes of the centred rows via the eigendecomposition of the
/// scatter matrix. Each axis is signed so its largest-magnitude loading is
/// positive.
PcaResult pca(const Tensor& reps, std::size_t dims = 2);

Tensor pca_project(const Tensor& reps, std::size_t dims = 2);

}  // namespace semx

#endif  // SEMX_EVALUATION_HPP_
