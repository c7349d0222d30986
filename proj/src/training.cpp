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

#include "semx/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "semx/evaluation.hpp"

namespace semx {

std::string to_string(PenaltyVariant v) {
  return v == PenaltyVariant::kNorm ? "norm" : "squared-norm";
}

PenaltyVariant parse_penalty_variant(const std::string& text) {
  if (text == "norm") return PenaltyVariant::kNorm;
  if (text == "squared-norm" || text == "squared_norm") return PenaltyVariant::kSquaredNorm;
  throw ConfigError("unknown penalty variant '" + text + "' (norm, squared-norm)");
}

void SemConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw ConfigError("gamma must be a finite non-negative number");
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (!(lr_factor > 0.0 && lr_factor <= 1.0)) {
    throw ConfigError("lr_factor must lie in (0, 1]");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(es_fraction >= 0.0 && es_fraction < 1.0)) {
    throw ConfigError("es_fraction must lie in [0, 1)");
  }
  for (std::size_t m : lr_milestones) {
    if (m < 1 || m > epochs) {
      throw ConfigError("lr milestone " + std::to_string(m) + " outside 1.." +
                        std::to_string(epochs));
    }
  }
  mix.validate();
  sem.validate();
}

std::vector<std::size_t> TrainConfig::resolved_milestones() const {
  std::vector<std::size_t> out = lr_milestones;
  if (out.empty()) {
    for (double f : {0.5, 0.75}) {
      const auto m = static_cast<std::size_t>(std::floor(f * static_cast<double>(epochs)));
      if (m >= 1) out.push_back(m);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double TrainConfig::lr_for_epoch(std::size_t epoch) const {
  double rate = lr;
  for (std::size_t m : resolved_milestones()) {
    if (m < epoch) rate *= lr_factor;
  }
  return rate;
}

std::size_t TrainConfig::mixing_epochs() const {
  const auto trailing = static_cast<std::size_t>(
      std::llround(es_fraction * static_cast<double>(epochs)));
  return epochs - std::min(trailing, epochs);
}

template <typename T>
SemLossTerms sem_loss(BasicTape<T>& tape, const ModelSpec& spec,
                      std::span<const Var> params, const Batch& batch,
                      const MixedBatch& mixed, const SemConfig& sem) {
  sem.validate();
  const std::size_t n = batch.x.rank() > 0 ? batch.x.dim(0) : 0;
  if (mixed.x_mixed.shape() != batch.x.shape() || mixed.pair.size() != n ||
      mixed.row_lambdas.size() != n || mixed.y_mixed.shape() != batch.y.shape()) {
    throw UsageError("mixed batch does not derive from this batch");
  }
  const auto as_t = [](const Tensor& t) {
    if constexpr (std::is_same_v<T, float>) {
      return t;
    } else {
      return t.template cast<T>();
    }
  };
  const Tensor x_j = gather_rows(batch.x, std::span<const std::size_t>(mixed.pair));
  const Var x_mixed = tape.constant(as_t(mixed.x_mixed));
  const Var y_mixed = tape.constant(as_t(mixed.y_mixed));
  const Var x_i = tape.constant(as_t(batch.x));
  const Var x_p = tape.constant(as_t(x_j));

  const ForwardOutput out_mixed = forward(tape, spec, params, x_mixed);
  const ForwardOutput out_i = forward(tape, spec, params, x_i);
  const ForwardOutput out_j = forward(tape, spec, params, x_p);

  const Var label = tape.softmax_cross_entropy(out_mixed.logits, y_mixed);

  Var r_i = out_i.representation;
  Var r_j = out_j.representation;
  if (sem.stop_gradient_targets) {
    r_i = tape.detach(r_i);
    r_j = tape.detach(r_j);
  }
  const auto& lambdas = mixed.row_lambdas;
  const bool uniform = std::all_of(lambdas.begin(), lambdas.end(),
                                   [&](double l) { return l == lambdas.front(); });
  const Var target = uniform ? mix_representations(tape, r_i, r_j, lambdas.front())
                             : mix_representations(tape, r_i, r_j,
                                                   std::span<const double>(lambdas));
  const Var diff = tape.sub(out_mixed.representation, target);
  const Var per_row = sem.penalty == PenaltyVariant::kNorm ? tape.row_l2_norm(diff)
                                                           : tape.row_squared_norm(diff);
  const Var penalty = tape.mean(per_row);
  const Var total = tape.add(label, tape.scale(penalty, sem.gamma));
  return {total, label, penalty, out_mixed.logits};
}

template SemLossTerms sem_loss<float>(Tape&, const ModelSpec&, std::span<const Var>,
                                      const Batch&, const MixedBatch&, const SemConfig&);
template SemLossTerms sem_loss<double>(Tape64&, const ModelSpec&, std::span<const Var>,
                                       const Batch&, const MixedBatch&, const SemConfig&);

namespace {

std::string divergence_context(std::size_t epoch, std::size_t batch, double lr) {
  std::ostringstream os;
  os << "training diverged at epoch " << epoch << ", batch " << batch << ", lr " << lr;
  return os.str();
}

}  // namespace

MetricsRecord train_epoch(Model& model, Sgd& optimizer, const Dataset& data,
                          const TrainConfig& config, Rng& rng,
                          bool mixing_enabled, std::size_t epoch,
                          const StepHook& on_step) {
  config.validate();
  const bool use_sem = mixing_enabled && config.mix.kind != MixKind::kNone;
  const double lr = config.lr_for_epoch(epoch);
  const std::vector<std::size_t> order = rng.permutation(data.size());

  double sum_total = 0.0, sum_label = 0.0, sum_sem = 0.0, sum_correct = 0.0;
  std::size_t seen = 0;
  std::size_t batch_index = 0;
  std::vector<Tensor> grads;
  for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
    const std::size_t end = std::min(order.size(), begin + config.batch_size);
    if (end - begin < 2) break;
    const std::span<const std::size_t> rows(order.data() + begin, end - begin);
    Batch batch{gather_rows(data.images, rows), gather_rows(data.labels, rows)};
    ++batch_index;

    double total = 0.0, label = 0.0, penalty = 0.0, correct = 0.0;
    try {
      Tape tape;
      const std::vector<Var> params = bind_parameters(tape, model);
      Var loss;
      if (use_sem) {
        const MixedBatch mixed = make_mixed_batch(batch, config.mix, rng);
        const SemLossTerms terms =
            sem_loss(tape, model.spec(), params, batch, mixed, config.sem);
        loss = terms.total;
        label = tape.value(terms.label).item();
        penalty = tape.value(terms.sem).item();
        correct = accuracy_from_logits(tape.value(terms.logits), mixed.y_mixed) *
                  static_cast<double>(rows.size());
      } else {
        const Var x = tape.constant(batch.x);
        const Var y = tape.constant(batch.y);
        const ForwardOutput out = forward(tape, model.spec(), params, x);
        loss = tape.softmax_cross_entropy(out.logits, y);
        label = tape.value(loss).item();
        correct = accuracy_from_logits(tape.value(out.logits), batch.y) *
                  static_cast<double>(rows.size());
      }
      total = tape.value(loss).item();
      tape.backward(loss);
      grads.clear();
      for (const Var& p : params) {
        grads.push_back(tape.grad(p));
        if (!grads.back().all_finite()) throw NumericError("non-finite gradient");
      }
    } catch (const NumericError& e) {
      throw TrainingDiverged(divergence_context(epoch, batch_index, lr) + ": " + e.what());
    }
    optimizer.step(model.parameters(), grads, lr);
    if (on_step) on_step(model);

    const double w = static_cast<double>(rows.size());
    sum_total += total * w;
    sum_label += label * w;
    sum_sem += penalty * w;
    sum_correct += correct;
    seen += rows.size();
  }
  if (seen == 0) throw UsageError("training set yields no batch of two samples");
  const double inv = 1.0 / static_cast<double>(seen);
  return {epoch, "train", sum_total * inv, sum_label * inv, sum_sem * inv, sum_correct * inv};
}

MetricsRecord evaluate_record(const Model& model, const Dataset& data,
                              std::size_t epoch, const std::string& split) {
  const Inference out = infer(model, data.images);
  Tape tape;
  const Var loss = tape.softmax_cross_entropy(tape.constant(out.logits),
                                              tape.constant(data.labels));
  const double ce = tape.value(loss).item();
  return {epoch, split, ce, ce, 0.0, accuracy_from_logits(out.logits, data.labels)};
}

std::vector<MetricsRecord> train(Model& model, const Dataset& training,
                                 const Dataset* validation,
                                 const TrainConfig& config, const RecordSink& sink,
                                 const StepHook& on_step) {
  config.validate();
  Sgd optimizer(config.momentum, config.weight_decay);
  std::vector<MetricsRecord> records;
  const std::size_t mixing = config.mixing_epochs();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng = Rng::stream(config.seed, epoch);
    records.push_back(
        train_epoch(model, optimizer, training, config, rng, epoch <= mixing, epoch, on_step));
    if (sink) sink(records.back());
    if (validation != nullptr) {
      records.push_back(evaluate_record(model, *validation, epoch, "val"));
      if (sink) sink(records.back());
    }
  }
  return records;
}

}  // namespace semx
