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

#include <cstdint>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "semx/checkpoint.hpp"
#include "semx/cli.hpp"
#include "semx/config.hpp"
#include "semx/data.hpp"
#include "semx/errors.hpp"
#include "semx/evaluation.hpp"
#include "semx/gradcheck.hpp"
#include "semx/mixing.hpp"
#include "semx/model.hpp"
#include "semx/rng.hpp"
#include "semx/training.hpp"

namespace py = pybind11;
using namespace semx;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const FloatArray& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<float>(a.data(), a.data() + a.size()));
}

py::array_t<float> to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<float> out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

py::dict record_dict(const MetricsRecord& r) {
  py::dict d;
  d["epoch"] = r.epoch;
  d["split"] = r.split;
  d["loss_total"] = r.loss_total;
  d["loss_label"] = r.loss_label;
  d["loss_sem"] = r.loss_sem;
  d["accuracy"] = r.accuracy;
  return d;
}

}  // namespace

PYBIND11_MODULE(_semx, m) {
  m.doc() = "semantic equivariant mixup lab";

  // later registrations are tried first, so bases go before subclasses
  auto& base = py::register_exception<Error>(m, "Error");
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  auto& format = py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<LengthError>(m, "LengthError", format.ptr());

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](const FloatArray& images, const std::vector<std::size_t>& classes,
                       std::size_t class_count, const std::string& name) {
             return Dataset::make(to_tensor(images), one_hot(classes, class_count), class_count, name);
           }),
           py::arg("images"), py::arg("classes"), py::arg("class_count"), py::arg("name") = "array")
      .def_property_readonly("images", [](const Dataset& d) { return to_numpy(d.images); })
      .def_property_readonly("labels", [](const Dataset& d) { return to_numpy(d.labels); })
      .def_property_readonly("classes", &Dataset::classes)
      .def_readonly("class_count", &Dataset::class_count)
      .def_readonly("name", &Dataset::name)
      .def("__len__", &Dataset::size)
      .def("subset", [](const Dataset& d, const std::vector<std::size_t>& idx) { return d.subset(idx); });

  m.def("synth_shapes", &synth_shapes, py::arg("n"), py::arg("image_hw") = 16,
        py::arg("class_count") = 3, py::arg("noise") = 0.05, py::arg("seed") = 0);
  m.def("uniform_noise_images", &uniform_noise_images, py::arg("n"), py::arg("sample_shape"),
        py::arg("class_count"), py::arg("seed") = 0);
  m.def("read_idx", &read_idx, py::arg("images_path"), py::arg("labels_path"),
        py::arg("class_count") = 10);
  m.def("read_cifar_binary", &read_cifar_binary, py::arg("path"));
  m.def("load_dataset", [](const std::string& spec) { return load_dataset(DatasetSpec::parse(spec)); },
        py::arg("spec"), "Dataset from a spec string such as 'synth_shapes:n=600,seed=1'.");

  py::class_<Model>(m, "Model")
      .def_property_readonly("parameter_names", &Model::parameter_names)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def_property_readonly("representation_dim",
                             [](const Model& mo) { return mo.spec().representation_dim; })
      .def_property_readonly("class_count", [](const Model& mo) { return mo.spec().class_count; })
      .def("parameter", [](const Model& mo, const std::string& n) { return to_numpy(mo.parameter(n)); })
      .def("set_parameter",
           [](Model& mo, const std::string& n, const FloatArray& v) { mo.set_parameter(n, to_tensor(v)); })
      .def("copy", [](const Model& mo) { return Model(mo); });

  m.def("small_cnn", &small_cnn, py::arg("channels"), py::arg("image_hw"), py::arg("class_count"),
        py::arg("seed") = 0);
  m.def("small_mlp",
        [](const Shape& input_shape, const std::vector<std::size_t>& hidden, std::size_t k,
           std::uint64_t seed, bool affine) {
          return small_mlp(input_shape, hidden, k, seed, affine ? Activation::kNone : Activation::kRelu);
        },
        py::arg("input_shape"), py::arg("hidden"), py::arg("class_count"), py::arg("seed") = 0,
        py::arg("affine") = false);
  m.def("build_model", &build_model, py::arg("model"), py::arg("sample_shape"),
        py::arg("class_count"), py::arg("seed") = 0);

  m.def("infer",
        [](const Model& mo, const FloatArray& x) {
          const Inference r = infer(mo, to_tensor(x));
          return py::make_tuple(to_numpy(r.representation), to_numpy(r.logits));
        },
        py::arg("model"), py::arg("x"), "(representation, logits) for a batch.");

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("lr_milestones", &TrainConfig::lr_milestones)
      .def_readwrite("lr_factor", &TrainConfig::lr_factor)
      .def_readwrite("momentum", &TrainConfig::momentum)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("es_fraction", &TrainConfig::es_fraction)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_property("mix_kind", [](const TrainConfig& c) { return to_string(c.mix.kind); },
                    [](TrainConfig& c, const std::string& s) { c.mix.kind = parse_mix_kind(s); })
      .def_property("alpha", [](const TrainConfig& c) { return c.mix.alpha; },
                    [](TrainConfig& c, double a) { c.mix.alpha = a; })
      .def_property("lambda_granularity",
                    [](const TrainConfig& c) { return to_string(c.mix.granularity); },
                    [](TrainConfig& c, const std::string& s) {
                      c.mix.granularity = parse_lambda_granularity(s);
                    })
      .def_property("gamma", [](const TrainConfig& c) { return c.sem.gamma; },
                    [](TrainConfig& c, double g) { c.sem.gamma = g; })
      .def_property("stop_gradient_targets",
                    [](const TrainConfig& c) { return c.sem.stop_gradient_targets; },
                    [](TrainConfig& c, bool b) { c.sem.stop_gradient_targets = b; })
      .def_property("penalty", [](const TrainConfig& c) { return to_string(c.sem.penalty); },
                    [](TrainConfig& c, const std::string& s) {
                      c.sem.penalty = parse_penalty_variant(s);
                    })
      .def("validate", &TrainConfig::validate)
      .def("lr_for_epoch", &TrainConfig::lr_for_epoch)
      .def("mixing_epochs", &TrainConfig::mixing_epochs);

  m.def("train",
        [](Model& mo, const Dataset& training, const TrainConfig& config,
           const Dataset* validation) {
          std::vector<MetricsRecord> records;
          {
            py::gil_scoped_release release;
            records = train(mo, training, validation, config);
          }
          py::list out;
          for (const MetricsRecord& r : records) out.append(record_dict(r));
          return out;
        },
        py::arg("model"), py::arg("training"), py::arg("config"), py::arg("validation") = nullptr,
        "Trains in place and returns the per-epoch metrics rows.");

  m.def("sample_lambda",
        [](double alpha, std::size_t n, std::uint64_t seed) {
          Rng rng(seed);
          std::vector<double> out(n);
          for (double& v : out) v = sample_lambda(alpha, rng);
          return out;
        },
        py::arg("alpha"), py::arg("n"), py::arg("seed") = 0);
  m.def("mix_linear",
        [](const FloatArray& xi, const FloatArray& xj, const FloatArray& yi, const FloatArray& yj,
           double lam) {
          const MixedBatch b = mix_linear(to_tensor(xi), to_tensor(xj), to_tensor(yi), to_tensor(yj), lam);
          return py::make_tuple(to_numpy(b.x_mixed), to_numpy(b.y_mixed));
        },
        py::arg("x_i"), py::arg("x_j"), py::arg("y_i"), py::arg("y_j"), py::arg("lam"));
  m.def("mix_cutmix",
        [](const FloatArray& xi, const FloatArray& xj, const FloatArray& yi, const FloatArray& yj,
           double lam, std::uint64_t seed) {
          Rng rng(seed);
          const MixedBatch b =
              mix_cutmix(to_tensor(xi), to_tensor(xj), to_tensor(yi), to_tensor(yj), lam, rng);
          return py::make_tuple(to_numpy(b.x_mixed), to_numpy(b.y_mixed), b.lambda_eff,
                                to_numpy(*b.mask));
        },
        py::arg("x_i"), py::arg("x_j"), py::arg("y_i"), py::arg("y_j"), py::arg("lam"),
        py::arg("seed") = 0, "(x, y, lambda_eff, mask)");

  m.def("accuracy", &accuracy, py::arg("model"), py::arg("dataset"));
  m.def("auroc",
        [](const std::vector<double>& id, const std::vector<double>& ood) { return auroc(id, ood); },
        py::arg("id_scores"), py::arg("ood_scores"));
  m.def("msp_scores", &msp_scores, py::arg("model"), py::arg("dataset"));
  m.def("corruption_suite_eval",
        [](const Model& mo, const Dataset& d, std::uint64_t seed) {
          const CorruptionReport r = corruption_suite_eval(mo, d, seed);
          py::dict out;
          for (std::size_t k = 0; k < kCorruptionKinds.size(); ++k)
            out[py::str(to_string(kCorruptionKinds[k]))] =
                std::vector<double>(r.accuracy[k].begin(), r.accuracy[k].end());
          out["mean"] = r.mean;
          return out;
        },
        py::arg("model"), py::arg("dataset"), py::arg("seed") = 0);
  m.def("lambda_grid", &lambda_grid, py::arg("step"));
  m.def("equivariance_gap",
        [](const Model& mo, const FloatArray& a, const FloatArray& b, const std::vector<double>& lams) {
          const GapCurve c = equivariance_gap(mo, to_tensor(a), to_tensor(b), lams);
          py::dict out;
          out["lambdas"] = c.lambdas;
          out["gap_mean"] = c.gap_mean;
          out["gap_std"] = c.gap_std;
          out["pair_count"] = c.pair_count;
          return out;
        },
        py::arg("model"), py::arg("a"), py::arg("b"), py::arg("lambdas"));
  m.def("pca_project",
        [](const FloatArray& reps, std::size_t dims) { return to_numpy(pca_project(to_tensor(reps), dims)); },
        py::arg("reps"), py::arg("dims") = 2);

  m.def("gradcheck",
        [](std::uint64_t seed) {
          const GradcheckResult r = run_gradcheck(seed);
          py::dict out;
          out["max_relative_error"] = r.max_relative_error;
          out["worst_parameter"] = r.worst_parameter;
          out["entries_checked"] = r.entries_checked;
          out["kinks_skipped"] = r.kinks_skipped;
          out["passed"] = r.passed;
          return out;
        },
        py::arg("seed") = 0);

  m.def("save_checkpoint",
        [](const Model& mo, const std::string& path, std::string config_text) {
          save_checkpoint(make_checkpoint(mo, std::move(config_text)), path);
        },
        py::arg("model"), py::arg("path"), py::arg("config_text") = "");
  m.def("restore_checkpoint",
        [](Model& mo, const std::string& path) { restore_parameters(mo, load_checkpoint(path)); },
        py::arg("model"), py::arg("path"), "Loads parameters from a checkpoint into an existing model.");
  m.def("load_run", [](const std::string& path) { return load_run(path).model; }, py::arg("path"),
        "Model rebuilt from a checkpoint written by `semx train`.");

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          int code;
          {
            py::gil_scoped_release release;
            code = run_cli(args, out, err);
          }
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "(exit code, stdout, stderr) of a semx command line.");
}
