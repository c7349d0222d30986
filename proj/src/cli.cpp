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

#include "semx/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "semx/checkpoint.hpp"
#include "semx/errors.hpp"
#include "semx/evaluation.hpp"
#include "semx/metrics_csv.hpp"
#include "semx/training.hpp"

namespace semx {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

ordered_json config_json(const std::string& text) {
  ordered_json j = ordered_json::object();
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
    auto key = line.substr(0, eq);
    auto val = line.substr(eq + 1);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    while (!val.empty() && val.front() == ' ') val.erase(val.begin());
    j[key] = val;
  }
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write '" + path.string() + "'");
  out << text;
}

void write_json(const fs::path& path, const ordered_json& j, std::ostream& out) {
  const std::string text = j.dump(2);
  write_text(path, text + "\n");
  out << text << "\n";
}

// Evaluation set: --dataset replaces the run's dataset outright, otherwise
// --split picks a part of it.
Dataset eval_dataset(const LoadedRun& run, const std::string& dataset,
                     const std::string& which) {
  if (!dataset.empty()) {
    return load_dataset(DatasetSpec::parse(dataset), run.model.spec().input_shape,
                        run.model.spec().class_count);
  }
  if (which == "all") return load_dataset(DatasetSpec::parse(run.config.dataset));
  RunData data = prepare_run_data(run.config);
  if (which == "train") return data.train;
  if (which == "val") return data.val;
  throw UsageError("unknown split '" + which + "' (train, val, all)");
}

void check_compatible(const Model& model, const Dataset& data) {
  if (data.sample_shape() != model.spec().input_shape) {
    throw UsageError("dataset samples are " + shape_to_string(data.sample_shape()) +
                     ", the model expects " + shape_to_string(model.spec().input_shape));
  }
  if (data.class_count != model.spec().class_count) {
    throw UsageError("dataset has " + std::to_string(data.class_count) +
                     " classes, the model " + std::to_string(model.spec().class_count));
  }
}

fs::path default_output(const std::string& checkpoint, const std::string& name) {
  fs::path dir = fs::path(checkpoint).parent_path();
  return dir.empty() ? fs::path(name) : dir / name;
}

struct TrainArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::map<std::string, std::string> overrides;
};

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig config = args.config_path.empty() ? RunConfig{} : load_run_config(args.config_path);
  if (const char* env = std::getenv("SEMX_SEED"); env != nullptr && *env != '\0') {
    try {
      apply_setting(config, "seed", env);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("SEMX_SEED: ") + e.what());
    }
  }
  for (const auto& [key, value] : args.overrides) {
    try {
      apply_setting(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("--" + key + " " + value + ": " + e.what());
    }
  }
  if (args.seed) config.train.seed = *args.seed;
  validate_run_config(config);

  const std::string resolved = serialize_run_config(config);
  RunData data = prepare_run_data(config);
  Model model = build_model(config.model, data.train.sample_shape(), data.train.class_count,
                            config.train.seed);

  const fs::path dir(config.out_dir);
  fs::create_directories(dir);
  write_text(dir / "config.resolved", resolved);
  MetricsCsvWriter writer((dir / "metrics.csv").string());
  try {
    train(model, data.train, &data.val, config.train, [&](const MetricsRecord& r) {
      writer.append(r);
      out << format_metrics_row(r) << "\n";
    });
  } catch (const NumericError& e) {
    err << "training aborted: " << e.what() << "\n";
    return kExitNumeric;
  }
  save_checkpoint(make_checkpoint(model, resolved), (dir / "model.semx").string());
  out << "wrote " << (dir / "model.semx").string() << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  std::string split = "val";
  std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  LoadedRun run = load_run(a.checkpoint);
  Dataset data = eval_dataset(run, a.dataset, a.split);
  check_compatible(run.model, data);
  ordered_json j;
  j["accuracy"] = accuracy(run.model, data);
  j["dataset"] = a.dataset.empty() ? run.config.dataset + " [" + a.split + "]" : a.dataset;
  j["samples"] = data.size();
  j["config"] = config_json(serialize_run_config(run.config));
  write_json(a.out.empty() ? default_output(a.checkpoint, "eval.json") : fs::path(a.out), j,
             out);
  return kExitOk;
}

int cmd_corrupt_eval(const EvalArgs& a, std::uint64_t seed, std::ostream& out) {
  LoadedRun run = load_run(a.checkpoint);
  Dataset data = eval_dataset(run, a.dataset, a.split);
  check_compatible(run.model, data);
  const CorruptionReport report = corruption_suite_eval(run.model, data, seed);
  ordered_json cells = ordered_json::object();
  for (std::size_t k = 0; k < kCorruptionKinds.size(); ++k) {
    ordered_json row = ordered_json::array();
    for (int s = 0; s < kSeverityLevels; ++s) row.push_back(report.accuracy[k][s]);
    cells[to_string(kCorruptionKinds[k])] = row;
  }
  ordered_json j;
  j["per_kind_per_severity"] = cells;
  j["mean"] = report.mean;
  j["clean_accuracy"] = accuracy(run.model, data);
  j["dataset"] = a.dataset.empty() ? run.config.dataset + " [" + a.split + "]" : a.dataset;
  j["noise_seed"] = seed;
  j["config"] = config_json(serialize_run_config(run.config));
  write_json(a.out.empty() ? default_output(a.checkpoint, "corrupt_eval.json") : fs::path(a.out),
             j, out);
  return kExitOk;
}

int cmd_ood_eval(const EvalArgs& a, const std::string& ood, std::ostream& out) {
  LoadedRun run = load_run(a.checkpoint);
  Dataset id = eval_dataset(run, a.dataset, a.split);
  check_compatible(run.model, id);
  Dataset od = load_dataset(DatasetSpec::parse(ood), run.model.spec().input_shape,
                            run.model.spec().class_count);
  if (od.sample_shape() != run.model.spec().input_shape) {
    throw UsageError("OOD samples are " + shape_to_string(od.sample_shape()) +
                     ", the model expects " + shape_to_string(run.model.spec().input_shape));
  }
  const auto id_scores = msp_scores(run.model, id);
  const auto ood_scores = msp_scores(run.model, od);
  ordered_json j;
  j["auroc"] = auroc(id_scores, ood_scores);
  j["id_dataset"] = a.dataset.empty() ? run.config.dataset + " [" + a.split + "]" : a.dataset;
  j["ood_dataset"] = DatasetSpec::parse(ood).to_string();
  j["score"] = "max softmax probability";
  j["config"] = config_json(serialize_run_config(run.config));
  write_json(a.out.empty() ? default_output(a.checkpoint, "ood_eval.json") : fs::path(a.out), j,
             out);
  return kExitOk;
}

struct ProbeArgs {
  EvalArgs eval;
  std::size_t class_a = 0;
  std::size_t class_b = 1;
  std::size_t pairs = 100;
  double lambda_step = 0.1;
  std::uint64_t seed = 0;
  std::string out_dir;
};

int cmd_probe(const ProbeArgs& a, std::ostream& out) {
  LoadedRun run = load_run(a.eval.checkpoint);
  Dataset data = eval_dataset(run, a.eval.dataset, a.eval.split);
  check_compatible(run.model, data);
  if (a.class_a >= data.class_count || a.class_b >= data.class_count) {
    throw UsageError("class index outside 0.." + std::to_string(data.class_count - 1));
  }
  if (a.class_a == a.class_b) throw UsageError("class_a and class_b must differ");
  if (a.pairs < 1) throw UsageError("pair count must be positive");

  // first `pairs` members of each class in a seeded random order
  const auto classes = data.classes();
  Rng rng(a.seed);
  const auto order = rng.permutation(data.size());
  std::vector<std::size_t> ia, ib;
  for (std::size_t i : order) {
    if (classes[i] == a.class_a && ia.size() < a.pairs) ia.push_back(i);
    if (classes[i] == a.class_b && ib.size() < a.pairs) ib.push_back(i);
  }
  if (ia.size() < a.pairs || ib.size() < a.pairs) {
    throw UsageError("class " + std::to_string(ia.size() < a.pairs ? a.class_a : a.class_b) +
                     " has fewer than " + std::to_string(a.pairs) + " samples");
  }
  const auto lambdas = lambda_grid(a.lambda_step);
  std::vector<Tensor> mixed;
  const GapCurve curve = equivariance_gap(run.model, gather_rows(data.images, ia),
                                          gather_rows(data.images, ib), lambdas, &mixed);

  const fs::path dir = a.out_dir.empty() ? default_output(a.eval.checkpoint, "")
                                         : fs::path(a.out_dir);
  if (!dir.empty()) fs::create_directories(dir);
  std::ostringstream gap;
  gap << "lambda,gap_mean,gap_std\n";
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    gap << fmt("%.6g", lambdas[l]) << "," << fmt("%.9g", curve.gap_mean[l]) << ","
        << fmt("%.9g", curve.gap_std[l]) << "\n";
  }
  write_text(dir / "gap_curve.csv", gap.str());

  const Tensor reps = concat_rows(std::span<const Tensor>(mixed));
  const PcaResult p = pca(reps, 2);
  std::ostringstream proj;
  proj << "x,y,lambda,class\n";
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    const long tag = lambdas[l] == 1.0   ? static_cast<long>(a.class_a)
                     : lambdas[l] == 0.0 ? static_cast<long>(a.class_b)
                                         : -1L;
    for (std::size_t q = 0; q < a.pairs; ++q) {
      const std::size_t row = l * a.pairs + q;
      proj << fmt("%.9g", p.projection[2 * row]) << "," << fmt("%.9g", p.projection[2 * row + 1])
           << "," << fmt("%.6g", lambdas[l]) << "," << tag << "\n";
    }
  }
  write_text(dir / "projection.csv", proj.str());

  // the echo for the two CSVs, plus how the curve was reduced
  std::string meta = serialize_run_config(run.config);
  meta += "# probe: class_a = " + std::to_string(a.class_a) +
          ", class_b = " + std::to_string(a.class_b) + ", pairs = " + std::to_string(a.pairs) +
          ", lambda_step = " + fmt("%.6g", a.lambda_step) + ", pair_seed = " +
          std::to_string(a.seed) + "\n";
  meta += "# probe: gap = mean and sample std over pairs of the per-pair L2 gap\n";
  meta += "# probe: mixed input = lambda * class_a sample + (1 - lambda) * class_b sample\n";
  write_text(dir / "probe.config", meta);

  out << "lambda,gap_mean,gap_std\n";
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    out << fmt("%.2f", lambdas[l]) << "," << fmt("%.6g", curve.gap_mean[l]) << ","
        << fmt("%.6g", curve.gap_std[l]) << "\n";
  }
  return kExitOk;
}

int cmd_gen_data(const std::string& dataset, const std::string& images,
                 const std::string& labels, std::ostream& out) {
  const DatasetSpec spec = DatasetSpec::parse(dataset);
  Dataset d = load_dataset(spec);
  write_idx(d, images, labels);
  out << "wrote " << d.size() << " samples of " << shape_to_string(d.sample_shape()) << " to "
      << images << " and " << labels << "\n";
  return kExitOk;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UsageError*>(&e)) {
    return kExitConfig;
  }
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  if (dynamic_cast<const FormatError*>(&e)) return kExitFormat;
  if (dynamic_cast<const DimensionError*>(&e) || dynamic_cast<const ValidationError*>(&e)) {
    return kExitConfig;
  }
  return kExitFailure;
}

RunData prepare_run_data(const RunConfig& config) {
  Dataset all = load_dataset(DatasetSpec::parse(config.dataset));
  const double fractions[] = {0.9, 0.1};
  auto parts = split(all, fractions, config.train.seed);
  return RunData{std::move(parts[0]), std::move(parts[1])};
}

LoadedRun load_run(const std::string& checkpoint_path) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  RunConfig config;
  try {
    config = parse_run_config(ckpt.config_text, checkpoint_path + " (config echo)");
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  // synth_shapes geometry is in the spec itself; files have to be read
  const DatasetSpec ds = DatasetSpec::parse(config.dataset);
  Shape sample;
  std::size_t classes = ds.classes;
  if (ds.kind == "synth_shapes") {
    sample = {1, ds.image_hw, ds.image_hw};
  } else {
    const Dataset d = load_dataset(ds);
    sample = d.sample_shape();
    classes = d.class_count;
  }
  Model model = build_model(config.model, sample, classes, config.train.seed);
  restore_parameters(model, ckpt);
  return LoadedRun{std::move(config), std::move(model)};
}

int cmd_gradcheck(std::uint64_t seed, const GradcheckOptions& options, std::ostream& out,
                  std::ostream& err) {
  const GradcheckResult r = run_gradcheck(seed, options);
  out << "max relative error: " << fmt("%.6e", r.max_relative_error) << " over "
      << r.entries_checked << " entries, " << r.kinks_skipped
      << " skipped at relu kinks (worst " << r.worst_parameter << "[" << r.worst_index
      << "], analytic " << fmt("%.9g", r.worst_analytic) << ", numeric "
      << fmt("%.9g", r.worst_numeric) << ")\n";
  if (!r.passed) {
    err << "gradcheck failed: " << r.worst_parameter << " exceeds tolerance "
        << fmt("%g", options.tolerance) << "\n";
    return kExitCheck;
  }
  return kExitOk;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"semx: semantic equivariant mixup training lab", "semx"};
  app.require_subcommand(1);

  TrainArgs train_args;
  std::map<std::string, std::string> override_values;
  std::optional<std::uint64_t> seed_flag;
  auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
  train_cmd->add_option("config", train_args.config_path, "key = value config file");
  for (const auto& key : run_config_keys()) {
    if (key == "seed") continue;
    train_cmd->add_option("--" + key, override_values[key], "override " + key);
  }
  train_cmd->add_option("--seed", seed_flag, "run seed (beats SEMX_SEED and the file)");

  EvalArgs eval_args;
  auto add_eval_options = [&](CLI::App* cmd) {
    cmd->add_option("checkpoint", eval_args.checkpoint, "model.semx file")->required();
    cmd->add_option("--dataset", eval_args.dataset, "evaluate on this dataset instead");
    cmd->add_option("--split", eval_args.split, "part of the run's dataset: val, train, all");
    cmd->add_option("--out", eval_args.out, "JSON output path");
  };
  auto* eval_cmd = app.add_subcommand("eval", "clean accuracy");
  add_eval_options(eval_cmd);
  std::uint64_t noise_seed = 0;
  auto* corrupt_cmd = app.add_subcommand("corrupt-eval", "accuracy under 4 corruptions x 5 severities");
  add_eval_options(corrupt_cmd);
  corrupt_cmd->add_option("--seed", noise_seed, "corruption noise seed");
  std::string ood_spec;
  auto* ood_cmd = app.add_subcommand("ood-eval", "MSP AUROC against an OOD set");
  add_eval_options(ood_cmd);
  ood_cmd->add_option("--ood", ood_spec, "OOD dataset, e.g. uniform_noise:n=600")->required();

  ProbeArgs probe_args;
  auto* probe_cmd = app.add_subcommand("probe", "equivariance gap curve and PCA projection");
  add_eval_options(probe_cmd);
  probe_cmd->add_option("--class-a", probe_args.class_a, "class weighted by lambda")->required();
  probe_cmd->add_option("--class-b", probe_args.class_b, "class weighted by 1 - lambda")->required();
  probe_cmd->add_option("--pairs", probe_args.pairs, "pair count");
  probe_cmd->add_option("--lambda-step", probe_args.lambda_step, "grid step");
  probe_cmd->add_option("--seed", probe_args.seed, "pair selection seed");
  probe_cmd->add_option("--out-dir", probe_args.out_dir, "directory for the CSV files");

  std::string gen_dataset, gen_images, gen_labels;
  auto* gen_cmd = app.add_subcommand("gen-data", "write a dataset as an IDX pair");
  gen_cmd->add_option("--dataset", gen_dataset, "dataset spec")->required();
  gen_cmd->add_option("--images", gen_images, "images output path")->required();
  gen_cmd->add_option("--labels", gen_labels, "labels output path")->required();

  std::uint64_t gc_seed = 0;
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of the loss gradients");
  gc_cmd->add_option("--seed", gc_seed, "fixture seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "semx: " << e.what() << "\n";
    for (auto* sub : app.get_subcommands()) err << sub->help();
    return kExitConfig;
  }

  try {
    if (*train_cmd) {
      for (const auto& key : run_config_keys()) {
        if (key != "seed" && train_cmd->count("--" + key) > 0) {
          train_args.overrides[key] = override_values[key];
        }
      }
      train_args.seed = seed_flag;
      return cmd_train(train_args, out, err);
    }
    if (*eval_cmd) return cmd_eval(eval_args, out);
    if (*corrupt_cmd) return cmd_corrupt_eval(eval_args, noise_seed, out);
    if (*ood_cmd) return cmd_ood_eval(eval_args, ood_spec, out);
    if (*probe_cmd) {
      probe_args.eval = eval_args;
      return cmd_probe(probe_args, out);
    }
    if (*gen_cmd) return cmd_gen_data(gen_dataset, gen_images, gen_labels, out);
    if (*gc_cmd) return cmd_gradcheck(gc_seed, GradcheckOptions{}, out, err);
  } catch (const std::exception& e) {
    err << "semx: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitFailure;
}

}  // namespace semx
