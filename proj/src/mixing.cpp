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

#include "semx/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace semx {

std::string to_string(MixKind kind) {
  switch (kind) {
    case MixKind::kNone: return "none";
    case MixKind::kLinear: return "linear";
    case MixKind::kCutMix: return "cutmix";
  }
  return "none";
}

MixKind parse_mix_kind(const std::string& text) {
  if (text == "none") return MixKind::kNone;
  if (text == "linear" || text == "mixup") return MixKind::kLinear;
  if (text == "cutmix") return MixKind::kCutMix;
  throw ConfigError("unknown mix kind '" + text + "' (none, linear, cutmix)");
}

std::string to_string(LambdaGranularity g) {
  return g == LambdaGranularity::kPerBatch ? "per_batch" : "per_sample";
}

LambdaGranularity parse_lambda_granularity(const std::string& text) {
  if (text == "per_batch") return LambdaGranularity::kPerBatch;
  if (text == "per_sample") return LambdaGranularity::kPerSample;
  throw ConfigError("unknown lambda granularity '" + text +
                    "' (per_batch, per_sample)");
}

void MixPolicy::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("mixing alpha must be positive, got " + std::to_string(alpha));
  }
  if (fixed_lambda && !(*fixed_lambda >= 0.0 && *fixed_lambda <= 1.0)) {
    throw ConfigError("fixed lambda must lie in [0, 1]");
  }
}

double sample_lambda(double alpha, Rng& rng) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("Beta alpha must be positive, got " + std::to_string(alpha));
  }
  const double g1 = rng.gamma(alpha);
  const double g2 = rng.gamma(alpha);
  const double s = g1 + g2;
  // Both draws underflow only for tiny alpha; the limit law is Bernoulli(1/2).
  if (s == 0.0) return rng.uniform() < 0.5 ? 0.0 : 1.0;
  return g1 / s;
}

std::vector<std::size_t> pair_indices(std::size_t n, Rng& rng) {
  if (n < 2) {
    throw UsageError("pairing needs at least two samples, got " + std::to_string(n));
  }
  return rng.permutation(n);
}

namespace {

void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ValidationError("mixing ratio must lie in [0, 1], got " +
                          std::to_string(lambda));
  }
}

float convex(double w, float a, float b) {
  return static_cast<float>(w * static_cast<double>(a) +
                            (1.0 - w) * static_cast<double>(b));
}

Tensor convex_tensor(const Tensor& a, const Tensor& b, double w) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mixing operands differ: " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = convex(w, a[i], b[i]);
  return out;
}

Tensor convex_rows(const Tensor& a, const Tensor& b, std::span<const double> w) {
  if (a.shape() != b.shape() || a.rank() == 0 || a.dim(0) != w.size()) {
    throw DimensionError("row mixing operands differ: " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
  const std::size_t width = a.size() / a.dim(0);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = convex(w[i / width], a[i], b[i]);
  return out;
}

struct ImageGeometry {
  std::size_t planes, h, w;
};

ImageGeometry image_geometry(const Tensor& x) {
  if (x.rank() != 3 && x.rank() != 4) {
    throw DimensionError("cutmix expects [C,H,W] or [N,C,H,W], got " +
                         shape_to_string(x.shape()));
  }
  const std::size_t h = x.dim(x.rank() - 2), w = x.dim(x.rank() - 1);
  if (h < 2 || w < 2) throw DimensionError("cutmix needs H, W >= 2");
  return {x.size() / (h * w), h, w};
}

// Writes box of src over dst for the planes in [first, last).
void paste(const Tensor& src, Tensor& dst, const ImageGeometry& g,
           const CutBox& box, std::size_t first, std::size_t last) {
  for (std::size_t p = first; p < last; ++p) {
    for (std::size_t y = box.y0; y < box.y1; ++y) {
      const std::size_t row = (p * g.h + y) * g.w;
      std::copy(src.data().begin() + static_cast<std::ptrdiff_t>(row + box.x0),
                src.data().begin() + static_cast<std::ptrdiff_t>(row + box.x1),
                dst.data().begin() + static_cast<std::ptrdiff_t>(row + box.x0));
    }
  }
}

void fill_mask(float* mask, std::size_t w, const CutBox& box) {
  for (std::size_t y = box.y0; y < box.y1; ++y) {
    std::fill(mask + y * w + box.x0, mask + y * w + box.x1, 1.0f);
  }
}

}  // namespace

MixedBatch mix_linear(const Tensor& x_i, const Tensor& x_j, const Tensor& y_i,
                      const Tensor& y_j, double lambda) {
  check_lambda(lambda);
  MixedBatch out;
  out.x_mixed = convex_tensor(x_i, x_j, lambda);
  out.y_mixed = convex_tensor(y_i, y_j, lambda);
  out.lambda_eff = lambda;
  out.lambda_drawn = lambda;
  const std::size_t rows = y_i.rank() >= 2 ? y_i.dim(0) : 1;
  out.row_lambdas.assign(rows, lambda);
  return out;
}

Tensor mix_inputs(const Tensor& x_i, const Tensor& x_j, double lambda) {
  check_lambda(lambda);
  return convex_tensor(x_i, x_j, lambda);
}

CutBox cutmix_box(std::size_t height, std::size_t width, double lambda_target,
                  std::size_t cy, std::size_t cx) {
  check_lambda(lambda_target);
  if (cy >= height || cx >= width) throw UsageError("cutmix centre outside image");
  const double scale = std::sqrt(lambda_target);
  const auto side = [&](std::size_t extent) {
    return std::min<std::size_t>(
        extent, static_cast<std::size_t>(std::lround(static_cast<double>(extent) * scale)));
  };
  const auto clip = [](std::ptrdiff_t v, std::size_t extent) {
    return static_cast<std::size_t>(
        std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(extent)));
  };
  const auto ch = static_cast<std::ptrdiff_t>(side(height));
  const auto cw = static_cast<std::ptrdiff_t>(side(width));
  const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(cy) - ch / 2;
  const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(cx) - cw / 2;
  return {clip(y0, height), clip(y0 + ch, height), clip(x0, width),
          clip(x0 + cw, width)};
}

CutBox sample_cutmix_box(std::size_t height, std::size_t width,
                         double lambda_target, Rng& rng) {
  const std::size_t cy = rng.uniform_index(height);
  const std::size_t cx = rng.uniform_index(width);
  return cutmix_box(height, width, lambda_target, cy, cx);
}

MixedBatch mix_cutmix_box(const Tensor& x_i, const Tensor& x_j,
                          const Tensor& y_i, const Tensor& y_j,
                          const CutBox& box) {
  if (x_i.shape() != x_j.shape()) {
    throw DimensionError("cutmix operands differ: " + shape_to_string(x_i.shape()) +
                         " vs " + shape_to_string(x_j.shape()));
  }
  const ImageGeometry g = image_geometry(x_i);
  if (box.y1 > g.h || box.x1 > g.w || box.y0 > box.y1 || box.x0 > box.x1) {
    throw UsageError("cutmix box outside image");
  }
  MixedBatch out;
  out.x_mixed = x_j;
  paste(x_i, out.x_mixed, g, box, 0, g.planes);
  Tensor mask(Shape{g.h, g.w});
  fill_mask(mask.data().data(), g.w, box);
  out.mask = std::move(mask);
  out.lambda_eff = static_cast<double>(box.area()) / static_cast<double>(g.h * g.w);
  out.lambda_drawn = out.lambda_eff;
  out.y_mixed = convex_tensor(y_i, y_j, out.lambda_eff);
  const std::size_t rows = y_i.rank() >= 2 ? y_i.dim(0) : 1;
  out.row_lambdas.assign(rows, out.lambda_eff);
  return out;
}

MixedBatch mix_cutmix(const Tensor& x_i, const Tensor& x_j, const Tensor& y_i,
                      const Tensor& y_j, double lambda_target, Rng& rng) {
  check_lambda(lambda_target);
  const ImageGeometry g = image_geometry(x_i);
  const CutBox box = sample_cutmix_box(g.h, g.w, lambda_target, rng);
  MixedBatch out = mix_cutmix_box(x_i, x_j, y_i, y_j, box);
  out.lambda_drawn = lambda_target;
  return out;
}

template <typename T>
Var mix_representations(BasicTape<T>& tape, Var r_i, Var r_j, double lambda) {
  check_lambda(lambda);
  return tape.scale_add(r_i, r_j, lambda);
}

template <typename T>
Var mix_representations(BasicTape<T>& tape, Var r_i, Var r_j,
                        std::span<const double> row_lambdas) {
  for (double l : row_lambdas) check_lambda(l);
  return tape.scale_add_rows(r_i, r_j, row_lambdas);
}

template Var mix_representations<float>(Tape&, Var, Var, double);
template Var mix_representations<double>(Tape64&, Var, Var, double);
template Var mix_representations<float>(Tape&, Var, Var, std::span<const double>);
template Var mix_representations<double>(Tape64&, Var, Var, std::span<const double>);

MixedBatch make_mixed_batch(const Batch& batch, const MixPolicy& policy,
                            Rng& rng) {
  policy.validate();
  if (batch.x.rank() == 0 || batch.y.rank() != 2 || batch.x.dim(0) != batch.y.dim(0)) {
    throw DimensionError("batch inputs " + shape_to_string(batch.x.shape()) +
                         " and labels " + shape_to_string(batch.y.shape()) +
                         " disagree");
  }
  const std::size_t n = batch.x.dim(0);
  if (policy.kind == MixKind::kNone) {
    MixedBatch out;
    out.x_mixed = batch.x;
    out.y_mixed = batch.y;
    out.lambda_eff = 1.0;
    out.lambda_drawn = 1.0;
    out.row_lambdas.assign(n, 1.0);
    out.pair.resize(n);
    std::iota(out.pair.begin(), out.pair.end(), std::size_t{0});
    return out;
  }

  std::vector<std::size_t> pair = pair_indices(n, rng);
  const auto draw = [&]() {
    return policy.fixed_lambda ? *policy.fixed_lambda : sample_lambda(policy.alpha, rng);
  };
  const Tensor x_j = gather_rows(batch.x, std::span<const std::size_t>(pair));
  const Tensor y_j = gather_rows(batch.y, std::span<const std::size_t>(pair));

  MixedBatch out;
  if (policy.granularity == LambdaGranularity::kPerBatch) {
    const double lambda = draw();
    out = policy.kind == MixKind::kLinear
              ? mix_linear(batch.x, x_j, batch.y, y_j, lambda)
              : mix_cutmix(batch.x, x_j, batch.y, y_j, lambda, rng);
    out.row_lambdas.assign(n, out.lambda_eff);
  } else {
    std::vector<double> drawn(n);
    for (double& l : drawn) l = draw();
    if (policy.kind == MixKind::kLinear) {
      out.x_mixed = convex_rows(batch.x, x_j, drawn);
      out.row_lambdas = drawn;
    } else {
      const ImageGeometry g = image_geometry(batch.x);
      const std::size_t per_row = g.planes / n;
      out.x_mixed = x_j;
      Tensor mask(Shape{n, g.h, g.w});
      std::size_t total = 0;
      out.row_lambdas.resize(n);
      for (std::size_t r = 0; r < n; ++r) {
        const CutBox box = sample_cutmix_box(g.h, g.w, drawn[r], rng);
        paste(batch.x, out.x_mixed, g, box, r * per_row, (r + 1) * per_row);
        fill_mask(mask.data().data() + r * g.h * g.w, g.w, box);
        total += box.area();
        out.row_lambdas[r] =
            static_cast<double>(box.area()) / static_cast<double>(g.h * g.w);
      }
      out.mask = std::move(mask);
      out.lambda_eff = static_cast<double>(total) / static_cast<double>(n * g.h * g.w);
    }
    if (policy.kind == MixKind::kLinear) {
      out.lambda_eff = std::accumulate(drawn.begin(), drawn.end(), 0.0) /
                       static_cast<double>(n);
    }
    out.lambda_drawn = std::accumulate(drawn.begin(), drawn.end(), 0.0) /
                       static_cast<double>(n);
    out.y_mixed = convex_rows(batch.y, y_j, out.row_lambdas);
  }
  out.pair = std::move(pair);
  return out;
}

}  // namespace semx
