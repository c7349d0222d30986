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

#include "semx/evaluation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semx/mixing.hpp"

namespace semx {

namespace {

std::size_t argmax(const float* row, std::size_t k) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < k; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

}  // namespace

double accuracy_from_logits(const Tensor& logits, const Tensor& labels) {
  if (logits.rank() != 2 || labels.shape() != logits.shape()) {
    throw DimensionError("accuracy: logits " + shape_to_string(logits.shape()) +
                         " vs labels " + shape_to_string(labels.shape()));
  }
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (argmax(logits.data().data() + r * k, k) == argmax(labels.data().data() + r * k, k)) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

double accuracy(const Model& model, const Dataset& dataset) {
  if (dataset.images.rank() == 0 || dataset.size() == 0) {
    throw UsageError("accuracy of an empty dataset");
  }
  return accuracy_from_logits(infer(model, dataset.images).logits, dataset.labels);
}

std::string to_string(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::kGaussianNoise: return "gaussian-noise";
    case CorruptionKind::kImpulseNoise: return "impulse-noise";
    case CorruptionKind::kGaussianBlur: return "gaussian-blur";
    case CorruptionKind::kContrast: return "contrast";
  }
  return "unknown";
}

CorruptionKind parse_corruption_kind(const std::string& text) {
  for (CorruptionKind k : kCorruptionKinds) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError("unknown corruption kind '" + text + "'");
}

double corruption_parameter(CorruptionKind kind, int severity) {
  static constexpr double kTable[4][5] = {
      {0.04, 0.06, 0.08, 0.09, 0.10},
      {0.01, 0.02, 0.03, 0.05, 0.07},
      {0.4, 0.6, 0.8, 1.0, 1.2},
      {0.75, 0.6, 0.45, 0.3, 0.15},
  };
  if (severity < 1 || severity > kSeverityLevels) {
    throw ConfigError("corruption severity must lie in 1..5, got " +
                      std::to_string(severity));
  }
  return kTable[static_cast<int>(kind)][severity - 1];
}

double CorruptionSpec::value() const {
  if (parameter) {
    if (!(*parameter >= 0.0) || !std::isfinite(*parameter)) {
      throw ConfigError("corruption parameter must be finite and non-negative");
    }
    return *parameter;
  }
  return corruption_parameter(kind, severity);
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) return {1.0};
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> taps;
  double total = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    taps.push_back(v);
    total += v;
  }
  for (double& v : taps) v /= total;
  return taps;
}

namespace {

void blur_planes(Tensor& images, double sigma) {
  const std::vector<double> taps = gaussian_kernel(sigma);
  const auto radius = static_cast<std::ptrdiff_t>(taps.size() / 2);
  const std::size_t h = images.dim(images.rank() - 2);
  const std::size_t w = images.dim(images.rank() - 1);
  const std::size_t planes = images.size() / (h * w);
  std::vector<double> tmp(h * w);
  const auto clampi = [](std::ptrdiff_t v, std::size_t extent) {
    return static_cast<std::size_t>(
        std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(extent) - 1));
  };
  for (std::size_t p = 0; p < planes; ++p) {
    float* img = images.data().data() + p * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double s = 0.0;
        for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
          s += taps[static_cast<std::size_t>(t + radius)] *
               img[y * w + clampi(static_cast<std::ptrdiff_t>(x) + t, w)];
        }
        tmp[y * w + x] = s;
      }
    }
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double s = 0.0;
        for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
          s += taps[static_cast<std::size_t>(t + radius)] *
               tmp[clampi(static_cast<std::ptrdiff_t>(y) + t, h) * w + x];
        }
        img[y * w + x] = static_cast<float>(s);
      }
    }
  }
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

Tensor corrupt(const Tensor& images, const CorruptionSpec& spec, Rng& rng) {
  if (images.rank() < 2) {
    throw DimensionError("corrupt expects image tensors, got " +
                         shape_to_string(images.shape()));
  }
  const double c = spec.value();
  Tensor out = images;
  switch (spec.kind) {
    case CorruptionKind::kGaussianNoise:
      for (float& p : out.data()) p = clamp01(p + c * rng.normal());
      break;
    case CorruptionKind::kImpulseNoise:
      for (float& p : out.data()) {
        if (rng.uniform() < c) p = rng.uniform() < 0.5 ? 0.0f : 1.0f;
      }
      break;
    case CorruptionKind::kGaussianBlur:
      blur_planes(out, c);
      for (float& p : out.data()) p = clamp01(p);
      break;
    case CorruptionKind::kContrast: {
      const auto factor = static_cast<float>(c);
      for (float& p : out.data()) {
        p = std::clamp(0.5f + factor * (p - 0.5f), 0.0f, 1.0f);
      }
      break;
    }
  }
  return out;
}

CorruptionReport corruption_suite_eval(const Model& model, const Dataset& clean_test,
                                       std::uint64_t seed) {
  CorruptionReport report;
  double total = 0.0;
  for (std::size_t k = 0; k < kCorruptionKinds.size(); ++k) {
    for (int s = 1; s <= kSeverityLevels; ++s) {
      Rng rng = Rng::stream(seed, 5 * k + static_cast<std::size_t>(s) - 1);
      const Tensor corrupted = corrupt(clean_test.images, {kCorruptionKinds[k], s, {}}, rng);
      const double acc =
          accuracy_from_logits(infer(model, corrupted).logits, clean_test.labels);
      report.accuracy[k][static_cast<std::size_t>(s - 1)] = acc;
      total += acc;
    }
  }
  report.mean = total / static_cast<double>(kCorruptionKinds.size() * kSeverityLevels);
  return report;
}

std::vector<double> msp_from_logits(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw DimensionError("msp expects [N,K] logits, got " + shape_to_string(logits.shape()));
  }
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<double> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    const float* z = logits.data().data() + r * k;
    const double zmax = *std::max_element(z, z + k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(static_cast<double>(z[j]) - zmax);
    // The max logit contributes exp(0) = 1, so the top probability is 1 / total.
    out[r] = 1.0 / total;
  }
  return out;
}

std::vector<double> msp_scores(const Model& model, const Dataset& dataset) {
  return msp_from_logits(infer(model, dataset.images).logits);
}

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  if (id_scores.empty() || ood_scores.empty()) {
    throw UsageError("auroc needs non-empty score lists");
  }
  struct Entry {
    double score;
    bool id;
  };
  std::vector<Entry> pooled;
  pooled.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) pooled.push_back({s, true});
  for (double s : ood_scores) pooled.push_back({s, false});
  for (const Entry& e : pooled) {
    if (std::isnan(e.score)) throw ValidationError("auroc score is NaN");
  }
  std::sort(pooled.begin(), pooled.end(),
            [](const Entry& a, const Entry& b) { return a.score < b.score; });
  // Ranks are 1-based; a tie block [i, j) shares the rank (i + 1 + j) / 2.
  double id_rank_sum = 0.0;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    std::size_t ids = 0;
    while (j < pooled.size() && pooled[j].score == pooled[i].score) {
      ids += pooled[j].id ? 1 : 0;
      ++j;
    }
    id_rank_sum += static_cast<double>(ids) * static_cast<double>(i + 1 + j) / 2.0;
    i = j;
  }
  const double n1 = static_cast<double>(id_scores.size());
  const double n0 = static_cast<double>(ood_scores.size());
  return (id_rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0);
}

std::vector<double> lambda_grid(double step) {
  if (!(step > 0.0 && step <= 1.0)) throw ConfigError("lambda step must lie in (0, 1]");
  const double steps = 1.0 / step;
  const auto count = static_cast<std::size_t>(std::llround(steps));
  if (std::abs(steps - static_cast<double>(count)) > 1e-6) {
    throw ConfigError("lambda step must divide 1 evenly");
  }
  std::vector<double> grid(count + 1);
  for (std::size_t i = 0; i <= count; ++i) {
    grid[i] = static_cast<double>(i) / static_cast<double>(count);
  }
  return grid;
}

GapCurve equivariance_gap(const Model& model, const Tensor& a, const Tensor& b,
                          std::span<const double> lambdas,
                          std::vector<Tensor>* mixed_representations) {
  if (a.shape() != b.shape() || a.rank() == 0) {
    throw DimensionError("equivariance_gap pair tensors differ: " +
                         shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  }
  const Tensor r_a = infer(model, a).representation;
  const Tensor r_b = infer(model, b).representation;
  const std::size_t pairs = a.dim(0);
  const std::size_t d = r_a.size() / pairs;
  GapCurve curve;
  curve.pair_count = pairs;
  if (mixed_representations) mixed_representations->clear();
  for (double lambda : lambdas) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
      throw ValidationError("lambda grid must lie within [0, 1]");
    }
    Tensor r_mixed = infer(model, mix_inputs(a, b, lambda)).representation;
    std::vector<double> gaps(pairs);
    for (std::size_t p = 0; p < pairs; ++p) {
      double s = 0.0;
      for (std::size_t i = p * d; i < (p + 1) * d; ++i) {
        const double target = lambda * static_cast<double>(r_a[i]) +
                              (1.0 - lambda) * static_cast<double>(r_b[i]);
        const double diff = static_cast<double>(r_mixed[i]) - target;
        s += diff * diff;
      }
      gaps[p] = std::sqrt(s);
    }
    const double mean = std::accumulate(gaps.begin(), gaps.end(), 0.0) /
                        static_cast<double>(pairs);
    double var = 0.0;
    for (double g : gaps) var += (g - mean) * (g - mean);
    curve.lambdas.push_back(lambda);
    curve.gap_mean.push_back(mean);
    curve.gap_std.push_back(pairs > 1 ? std::sqrt(var / static_cast<double>(pairs - 1)) : 0.0);
    if (mixed_representations) mixed_representations->push_back(std::move(r_mixed));
  }
  return curve;
}

PcaResult pca(const Tensor& reps, std::size_t dims) {
  if (reps.rank() != 2) {
    throw DimensionError("pca expects [N,D], got " + shape_to_string(reps.shape()));
  }
  const std::size_t n = reps.dim(0), d = reps.dim(1);
  if (d < 2) throw UsageError("pca needs at least two feature columns");
  if (n < 3) throw UsageError("pca needs at least three rows");
  if (dims < 1 || dims > d) throw UsageError("pca output dims must lie in 1..D");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = reps[r * d + c];
    }
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd scatter = x.transpose() * x;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scatter);
  if (eig.info() != Eigen::Success) throw NumericError("pca eigendecomposition failed");
  // Eigen returns ascending eigenvalues.
  const Eigen::VectorXd values = eig.eigenvalues().reverse();
  Eigen::MatrixXd axes = eig.eigenvectors().rowwise().reverse().leftCols(
      static_cast<Eigen::Index>(dims));
  for (Eigen::Index c = 0; c < axes.cols(); ++c) {
    Eigen::Index top = 0;
    axes.col(c).cwiseAbs().maxCoeff(&top);
    if (axes(top, c) < 0.0) axes.col(c) *= -1.0;
  }
  const Eigen::MatrixXd proj = x * axes;

  PcaResult out;
  out.rows = n;
  out.dims = dims;
  out.mean.assign(mean.data(), mean.data() + d);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < dims; ++c) {
      out.components.push_back(axes(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < dims; ++c) {
      out.projection.push_back(proj(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
    }
  }
  const std::size_t rank = std::min(n, d);
  for (std::size_t i = 0; i < rank; ++i) {
    out.singular_values.push_back(std::sqrt(std::max(values(static_cast<Eigen::Index>(i)), 0.0)));
  }
  return out;
}

Tensor pca_project(const Tensor& reps, std::size_t dims) {
  const PcaResult r = pca(reps, dims);
  std::vector<float> values(r.projection.begin(), r.projection.end());
  return Tensor(Shape{r.rows, dims}, std::move(values));
}

}  // namespace semx
