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

#ifndef SEMX_CONFIG_HPP_
#define SEMX_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semx/data.hpp"
#include "semx/model.hpp"
#include "semx/training.hpp"

namespace semx {

/// Where a run's samples come from. Text form (the `dataset` config value):
///   synth_shapes[:n=6000,hw=16,k=3,noise=0.05,seed=0]
///   idx:images=<path>,labels=<path>[,k=10]
///   cifar:path=<path>
///   uniform_noise[:n=1000,seed=0]   (OOD only; shape taken from the model)
struct DatasetSpec {
  std::string kind = "synth_shapes";
  std::size_t n = 6000;
  std::size_t image_hw = 16;
  std::size_t classes = 3;
  double noise = 0.05;
  std::uint64_t seed = 0;
  std::string images_path;
  std::string labels_path;
  std::string path;

  static DatasetSpec parse(const std::string& text);
  std::string to_string() const;
};

/// Loads or generates the dataset. uniform_noise needs `sample_shape` and
/// `class_count`.
Dataset load_dataset(const DatasetSpec& spec, const Shape& sample_shape = {},
                     std::size_t class_count = 2);

/// Model text form: `small_cnn` or `small_mlp:<h1>,<h2>,...`.
Model build_model(const std::string& model, const Shape& sample_shape,
                  std::size_t class_count, std::uint64_t seed);

/// Everything a `train` run needs. File format: one `key = value` per
/// line, `#` starts a comment, blank lines ignored, unknown keys rejected.
struct RunConfig {
  std::string dataset = "synth_shapes";
  std::string model = "small_cnn";
  std::string out_dir = "runs/default";
  TrainConfig train;

  RunConfig();
};

/// Keys accepted in a config file, in serialisation order.
const std::vector<std::string>& run_config_keys();

/// Sets one key from its text value. ConfigError for unknown keys or
/// unparsable values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Parses config text on top of the defaults. Errors name the source, the
/// line number and the offending line.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");

RunConfig load_run_config(const std::string& path);

/// Fully resolved `key = value` text, defaults included, canonical order.
/// parse_run_config(serialize_run_config(c)) reproduces c.
std::string serialize_run_config(const RunConfig& config);

/// Checks every field (TrainConfig::validate plus dataset and model text).
void validate_run_config(const RunConfig& config);

}  // namespace semx

#endif  // SEMX_CONFIG_HPP_
