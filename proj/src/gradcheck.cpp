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

#include "semx/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "semx/data.hpp"
#include "semx/rng.hpp"

namespace semx {

GradcheckResult check_sem_gradients(const Model& model, const Batch& batch,
                                    const MixedBatch& mixed, const SemConfig& sem,
                                    const GradcheckOptions& options) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    tape.set_backward_fault(options.fault);
    const std::vector<Var> params = bind_parameters(tape, model);
    const SemLossTerms terms = sem_loss(tape, model.spec(), params, batch, mixed, sem);
    tape.backward(terms.total);
    for (const Var& p : params) analytic.push_back(tape.grad(p));
  }

  std::vector<Tensor64> shadow;
  for (const Tensor& p : model.parameters()) shadow.push_back(p.cast<double>());
  // Loss value plus the on/off pattern of every relu on the tape.
  const auto evaluate = [&](std::vector<std::uint8_t>& relu_on) {
    Tape64 tape;
    const std::vector<Var> params =
        bind_parameters(tape, std::span<const Tensor64>(shadow));
    const SemLossTerms terms = sem_loss(tape, model.spec(), params, batch, mixed, sem);
    relu_on.clear();
    for (std::uint32_t id = 0; id < tape.size(); ++id) {
      if (tape.op(Var{id}) != OpKind::kRelu) continue;
      for (double v : tape.value(Var{id}).values()) relu_on.push_back(v > 0.0);
    }
    return tape.value(terms.total).item();
  };
  std::vector<std::uint8_t> base, on_plus, on_minus;
  evaluate(base);

  GradcheckResult result;
  for (std::size_t p = 0; p < shadow.size(); ++p) {
    for (std::size_t i = 0; i < shadow[p].size(); ++i) {
      const double original = shadow[p][i];
      shadow[p][i] = original + options.step;
      const double plus = evaluate(on_plus);
      shadow[p][i] = original - options.step;
      const double minus = evaluate(on_minus);
      shadow[p][i] = original;
      // the difference straddles a relu kink and says nothing about the
      // derivative here
      if (on_plus != base || on_minus != base) {
        ++result.kinks_skipped;
        continue;
      }
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[p][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.entries_checked;
      if (result.worst_parameter.empty() || rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = model.parameter_names()[p];
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  result.passed = result.max_relative_error <= options.tolerance;
  return result;
}

Model gradcheck_model(std::uint64_t seed) {
  ModelSpec spec;
  spec.input_shape = {1, 8, 8};
  spec.extractor = {LayerSpec::conv(1, 4, 3, 1, 1), LayerSpec::relu(),
                    LayerSpec::avgpool(2),          LayerSpec::flatten(),
                    LayerSpec::dense(64, 12)};
  spec.representation_dim = 12;
  spec.class_count = 3;
  spec.head = LayerSpec::dense(12, 3);
  Model model = Model::create(std::move(spec), seed);
  // Non-zero biases so every bias gradient path is exercised.
  Rng rng(seed ^ 0xB1A5ULL);
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    if (model.parameter_names()[i].ends_with(".bias")) {
      for (float& v : model.parameters()[i].data()) {
        v = static_cast<float>(0.2 * (2.0 * rng.uniform() - 1.0));
      }
    }
  }
  return model;
}

GradcheckResult run_gradcheck(std::uint64_t seed, const GradcheckOptions& options) {
  const Model model = gradcheck_model(seed);
  Rng rng = Rng::stream(seed, 1);
  constexpr std::size_t kBatch = 6, kClasses = 3;
  Tensor x(Shape{kBatch, 1, 8, 8});
  for (float& v : x.data()) v = static_cast<float>(rng.uniform());
  std::vector<std::size_t> classes(kBatch);
  for (std::size_t i = 0; i < kBatch; ++i) classes[i] = i % kClasses;
  const Batch batch{std::move(x), one_hot(classes, kClasses)};
  MixPolicy policy;
  policy.kind = MixKind::kLinear;
  policy.alpha = 1.0;
  // cyclic partners: a sample mixed with itself puts the norm penalty at
  // its non-differentiable zero
  std::vector<std::size_t> pair(kBatch);
  for (std::size_t i = 0; i < kBatch; ++i) pair[i] = (i + 1) % kBatch;
  const double lambda = sample_lambda(policy.alpha, rng);
  MixedBatch mixed = mix_linear(batch.x, gather_rows(batch.x, pair), batch.y,
                                gather_rows(batch.y, pair), lambda);
  mixed.pair = pair;
  SemConfig sem;
  sem.gamma = 0.5;
  return check_sem_gradients(model, batch, mixed, sem, options);
}

}  // namespace semx
