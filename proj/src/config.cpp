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

#include "semx/config.hpp"

#include <charconv>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "semx/errors.hpp"

namespace semx {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end || text.empty()) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end || text.empty()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

std::size_t parse_size(const std::string& key, const std::string& text) {
  return static_cast<std::size_t>(parse_u64(key, text));
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // shortest text that reads back to the same value
  for (int prec = 1; prec <= 17; ++prec) {
    char tmp[40];
    std::snprintf(tmp, sizeof tmp, "%.*g", prec, v);
    if (std::strtod(tmp, nullptr) == v) return tmp;
  }
  return buf;
}

// key=value pairs after the first ':' of a dataset or model string
std::map<std::string, std::string> parse_params(const std::string& what,
                                                const std::string& text) {
  std::map<std::string, std::string> out;
  if (text.empty()) return out;
  for (const auto& item : split_on(text, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(what + ": expected name=value, got '" + item + "'");
    }
    out[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
  }
  return out;
}

}  // namespace

DatasetSpec DatasetSpec::parse(const std::string& text) {
  DatasetSpec spec;
  const auto colon = text.find(':');
  spec.kind = trim(text.substr(0, colon));
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  auto params = parse_params("dataset", rest);
  auto take = [&](const std::string& name) -> std::optional<std::string> {
    auto it = params.find(name);
    if (it == params.end()) return std::nullopt;
    std::string v = it->second;
    params.erase(it);
    return v;
  };
  if (spec.kind == "synth_shapes") {
    if (auto v = take("n")) spec.n = parse_size("dataset n", *v);
    if (auto v = take("hw")) spec.image_hw = parse_size("dataset hw", *v);
    if (auto v = take("k")) spec.classes = parse_size("dataset k", *v);
    if (auto v = take("noise")) spec.noise = parse_double("dataset noise", *v);
    if (auto v = take("seed")) spec.seed = parse_u64("dataset seed", *v);
  } else if (spec.kind == "idx") {
    spec.classes = 10;
    auto img = take("images");
    auto lab = take("labels");
    if (!img || !lab) throw ConfigError("dataset idx: needs images= and labels=");
    spec.images_path = *img;
    spec.labels_path = *lab;
    if (auto v = take("k")) spec.classes = parse_size("dataset k", *v);
  } else if (spec.kind == "cifar") {
    spec.classes = 10;
    auto p = take("path");
    if (!p) throw ConfigError("dataset cifar: needs path=");
    spec.path = *p;
  } else if (spec.kind == "uniform_noise") {
    spec.n = 1000;
    if (auto v = take("n")) spec.n = parse_size("dataset n", *v);
    if (auto v = take("seed")) spec.seed = parse_u64("dataset seed", *v);
  } else {
    throw ConfigError("dataset: unknown kind '" + spec.kind + "'");
  }
  if (!params.empty()) {
    throw ConfigError("dataset " + spec.kind + ": unknown parameter '" +
                      params.begin()->first + "'");
  }
  return spec;
}

std::string DatasetSpec::to_string() const {
  if (kind == "synth_shapes") {
    return "synth_shapes:n=" + std::to_string(n) + ",hw=" + std::to_string(image_hw) +
           ",k=" + std::to_string(classes) + ",noise=" + fmt_double(noise) +
           ",seed=" + std::to_string(seed);
  }
  if (kind == "idx") {
    return "idx:images=" + images_path + ",labels=" + labels_path +
           ",k=" + std::to_string(classes);
  }
  if (kind == "cifar") return "cifar:path=" + path;
  return "uniform_noise:n=" + std::to_string(n) + ",seed=" + std::to_string(seed);
}

Dataset load_dataset(const DatasetSpec& spec, const Shape& sample_shape,
                     std::size_t class_count) {
  if (spec.kind == "synth_shapes") {
    return synth_shapes(spec.n, spec.image_hw, spec.classes, spec.noise, spec.seed);
  }
  if (spec.kind == "idx") return read_idx(spec.images_path, spec.labels_path, spec.classes);
  if (spec.kind == "cifar") return read_cifar_binary(spec.path);
  if (spec.kind == "uniform_noise") {
    if (sample_shape.empty()) throw UsageError("uniform_noise needs a sample shape");
    return uniform_noise_images(spec.n, sample_shape, class_count, spec.seed);
  }
  throw ConfigError("dataset: unknown kind '" + spec.kind + "'");
}

Model build_model(const std::string& model, const Shape& sample_shape,
                  std::size_t class_count, std::uint64_t seed) {
  const auto colon = model.find(':');
  const std::string kind = trim(model.substr(0, colon));
  if (kind == "small_cnn") {
    if (colon != std::string::npos) throw ConfigError("model small_cnn takes no parameters");
    if (sample_shape.size() != 3 || sample_shape[1] != sample_shape[2]) {
      throw ConfigError("model small_cnn needs square images, got " +
                        shape_to_string(sample_shape));
    }
    return small_cnn(sample_shape[0], sample_shape[1], class_count, seed);
  }
  if (kind == "small_mlp") {
    std::vector<std::size_t> hidden;
    if (colon != std::string::npos) {
      for (const auto& h : split_on(model.substr(colon + 1), ',')) {
        hidden.push_back(parse_size("model hidden width", h));
      }
    }
    return small_mlp(sample_shape, hidden, class_count, seed);
  }
  throw ConfigError("model: unknown kind '" + kind + "'");
}

RunConfig::RunConfig() {
  train.mix.kind = MixKind::kLinear;
  train.mix.alpha = 1.0;
  train.sem.gamma = 0.5;
}

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys = {
      "dataset",      "model",         "epochs",   "batch_size",
      "lr",           "lr_milestones", "lr_factor", "momentum",
      "weight_decay", "mix_kind",      "alpha",    "lambda_granularity",
      "gamma",        "stop_gradient_targets",     "penalty_variant",
      "es_fraction",  "seed",          "out_dir"};
  return keys;
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  TrainConfig& t = c.train;
  if (key == "dataset") {
    DatasetSpec::parse(value);
    c.dataset = value;
  } else if (key == "model") {
    c.model = value;
  } else if (key == "epochs") {
    t.epochs = parse_size(key, value);
  } else if (key == "batch_size") {
    t.batch_size = parse_size(key, value);
  } else if (key == "lr") {
    t.lr = parse_double(key, value);
  } else if (key == "lr_milestones") {
    t.lr_milestones.clear();
    if (value != "auto" && !value.empty()) {
      for (const auto& m : split_on(value, ',')) t.lr_milestones.push_back(parse_size(key, m));
    }
  } else if (key == "lr_factor") {
    t.lr_factor = parse_double(key, value);
  } else if (key == "momentum") {
    t.momentum = parse_double(key, value);
  } else if (key == "weight_decay") {
    t.weight_decay = parse_double(key, value);
  } else if (key == "mix_kind") {
    t.mix.kind = parse_mix_kind(value);
  } else if (key == "alpha") {
    t.mix.alpha = parse_double(key, value);
  } else if (key == "lambda_granularity") {
    t.mix.granularity = parse_lambda_granularity(value);
  } else if (key == "gamma") {
    t.sem.gamma = parse_double(key, value);
  } else if (key == "stop_gradient_targets") {
    t.sem.stop_gradient_targets = parse_bool(key, value);
  } else if (key == "penalty_variant") {
    t.sem.penalty = parse_penalty_variant(value);
  } else if (key == "es_fraction") {
    t.es_fraction = parse_double(key, value);
  } else if (key == "seed") {
    t.seed = parse_u64(key, value);
  } else if (key == "out_dir") {
    c.out_dir = value;
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  RunConfig c;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = source + ":" + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + "expected key = value in '" + trim(raw) + "'");
    }
    try {
      apply_setting(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw ConfigError(where + e.what() + " in '" + trim(raw) + "'");
    }
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path);
}

std::string serialize_run_config(const RunConfig& c) {
  const TrainConfig& t = c.train;
  std::string milestones;
  for (auto m : t.resolved_milestones()) {
    if (!milestones.empty()) milestones += ",";
    milestones += std::to_string(m);
  }
  if (milestones.empty()) milestones = "auto";
  std::ostringstream o;
  o << "dataset = " << DatasetSpec::parse(c.dataset).to_string() << "\n"
    << "model = " << c.model << "\n"
    << "epochs = " << t.epochs << "\n"
    << "batch_size = " << t.batch_size << "\n"
    << "lr = " << fmt_double(t.lr) << "\n"
    << "lr_milestones = " << milestones << "\n"
    << "lr_factor = " << fmt_double(t.lr_factor) << "\n"
    << "momentum = " << fmt_double(t.momentum) << "\n"
    << "weight_decay = " << fmt_double(t.weight_decay) << "\n"
    << "mix_kind = " << to_string(t.mix.kind) << "\n"
    << "alpha = " << fmt_double(t.mix.alpha) << "\n"
    << "lambda_granularity = " << to_string(t.mix.granularity) << "\n"
    << "gamma = " << fmt_double(t.sem.gamma) << "\n"
    << "stop_gradient_targets = " << (t.sem.stop_gradient_targets ? "true" : "false") << "\n"
    << "penalty_variant = " << to_string(t.sem.penalty) << "\n"
    << "es_fraction = " << fmt_double(t.es_fraction) << "\n"
    << "seed = " << t.seed << "\n"
    << "out_dir = " << c.out_dir << "\n";
  if (t.mix.kind == MixKind::kCutMix) {
    o << "# cutmix: labels and representation targets both use the area ratio of the "
         "clipped box, not the drawn lambda\n";
  }
  return o.str();
}

void validate_run_config(const RunConfig& c) {
  c.train.validate();
  const auto ds = DatasetSpec::parse(c.dataset);
  if (ds.kind == "uniform_noise") throw ConfigError("dataset: uniform_noise is OOD-only");
  const auto colon = c.model.find(':');
  const std::string kind = trim(c.model.substr(0, colon));
  if (kind != "small_cnn" && kind != "small_mlp") {
    throw ConfigError("model: unknown kind '" + kind + "'");
  }
  if (c.out_dir.empty()) throw ConfigError("out_dir: must not be empty");
}

}  // namespace semx
