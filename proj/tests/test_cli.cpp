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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "reference_mixup.hpp"
#include "semx/checkpoint.hpp"
#include "semx/cli.hpp"
#include "semx/config.hpp"
#include "semx/errors.hpp"
#include "semx/gradcheck.hpp"
#include "semx/metrics_csv.hpp"

namespace semx {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / "semx_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kTiny = "synth_shapes:n=90,hw=16,k=3,seed=4";

std::vector<std::string> tiny_train(const fs::path& dir, std::vector<std::string> extra = {},
                                    const std::string& epochs = "2") {
  std::vector<std::string> args = {"train",        "--dataset", kTiny,         "--model",
                                   "small_mlp:12", "--epochs",  epochs,        "--batch_size",
                                   "16",           "--out_dir", dir.string()};
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

TEST(RunConfigFile, ParsesCommentsAndDefaults) {
  const RunConfig c = parse_run_config("# lab run\nepochs = 7\n\n  gamma=0.25  # inline\nmix_kind = cutmix\n");
  EXPECT_EQ(c.train.epochs, 7u);
  EXPECT_EQ(c.train.sem.gamma, 0.25);
  EXPECT_EQ(c.train.mix.kind, MixKind::kCutMix);
  EXPECT_EQ(c.train.batch_size, 64u);
  EXPECT_EQ(c.model, "small_cnn");
}

TEST(RunConfigFile, UnknownKeyNamesTheLine) {
  try {
    parse_run_config("epochs = 3\nlr = 0.1\nlearning_rate = 0.2\n", "run.cfg");
    FAIL() << "accepted an unknown key";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("run.cfg:3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("learning_rate = 0.2"), std::string::npos) << msg;
  }
}

TEST(RunConfigFile, BadValues) {
  EXPECT_THROW(parse_run_config("epochs = three\n"), ConfigError);
  EXPECT_THROW(parse_run_config("mix_kind = blend\n"), ConfigError);
  EXPECT_THROW(parse_run_config("no equals sign\n"), ConfigError);
  EXPECT_THROW(validate_run_config(parse_run_config("alpha = 0\n")), ConfigError);
}

TEST(RunConfigFile, SerializeRoundTrip) {
  RunConfig c = parse_run_config("lr = 0.1\nalpha = 0.2\ngamma = 0.3\nseed = 18446744073709551615\n"
                                 "lr_milestones = 5,9\npenalty_variant = squared-norm\n");
  const std::string text = serialize_run_config(c);
  EXPECT_EQ(serialize_run_config(parse_run_config(text)), text);
  EXPECT_NE(text.find("lr = 0.1\n"), std::string::npos);
  EXPECT_NE(text.find("seed = 18446744073709551615\n"), std::string::npos);
  for (const std::string& key : run_config_keys())
    EXPECT_NE(text.find(key + " = "), std::string::npos) << key;
}

TEST(RunConfigFile, CutmixChoiceIsRecorded) {
  const std::string text = serialize_run_config(parse_run_config("mix_kind = cutmix\n"));
  EXPECT_NE(text.find("# cutmix:"), std::string::npos);
}

TEST(Checkpoint, BitExactRoundTrip) {
  const Model m = small_cnn(1, 16, 3, 8);
  const fs::path path = fresh_dir("ckpt") / "m.semx";
  save_checkpoint(make_checkpoint(m, "seed = 8\n"), path.string());
  const Checkpoint back = load_checkpoint(path.string());
  EXPECT_EQ(back.config_text, "seed = 8\n");
  Model restored = small_cnn(1, 16, 3, 9);
  restore_parameters(restored, back);
  for (std::size_t k = 0; k < m.parameters().size(); ++k) {
    const Tensor& a = m.parameters()[k];
    const Tensor& b = restored.parameters()[k];
    ASSERT_EQ(a.shape(), b.shape());
    EXPECT_EQ(std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(float)), 0);
  }
}

TEST(Checkpoint, LayoutIsLittleEndian) {
  Checkpoint c{"k", {{"w", Tensor(Shape{1}, {1.0f})}}};
  const std::vector<std::uint8_t> b = encode_checkpoint(c);
  ASSERT_GE(b.size(), 6u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "SEMX");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[5], 0);
  // 1.0f = 0x3f800000, stored low byte first at the very end
  EXPECT_EQ((std::vector<std::uint8_t>(b.end() - 4, b.end())), (std::vector<std::uint8_t>{0, 0, 0x80, 0x3f}));
}

TEST(Checkpoint, RejectsDamage) {
  Checkpoint c{"cfg", {{"w", Tensor(Shape{2, 2}, {1, 2, 3, 4})}}};
  std::vector<std::uint8_t> b = encode_checkpoint(c);
  auto version = b;
  version[4] = 2;
  EXPECT_THROW(decode_checkpoint(version), CheckpointVersionError);
  auto magic = b;
  magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(magic), FormatError);
  auto cut = b;
  cut.pop_back();
  EXPECT_THROW(decode_checkpoint(cut), LengthError);
  auto extra = b;
  extra.push_back(0);
  EXPECT_THROW(decode_checkpoint(extra), FormatError);
}

TEST(Checkpoint, RestoreChecksShapes) {
  Model m = small_mlp(4, {3}, 2, 0);
  Checkpoint c = make_checkpoint(small_mlp(4, {5}, 2, 0), "");
  EXPECT_THROW(restore_parameters(m, c), FormatError);
}

TEST(MetricsCsv, RoundTrip) {
  const fs::path path = fresh_dir("csv") / "metrics.csv";
  const std::vector<MetricsRecord> rows = {
      {1, "train", 1.0 / 3.0, 0.1 + 0.2, 0.0, 0.5},
      {1, "val", 1e-300, 123456.789, 2.5e-17, 1.0},
  };
  {
    MetricsCsvWriter w(path.string());
    for (const auto& r : rows) w.append(r);
  }
  EXPECT_EQ(read_metrics_csv(path.string()), rows);
  EXPECT_EQ(slurp(path).substr(0, std::string(kMetricsHeader).size()), kMetricsHeader);
}

TEST(MetricsCsv, MalformedRowNamesLine) {
  const fs::path path = fresh_dir("csv-bad") / "metrics.csv";
  std::ofstream(path) << kMetricsHeader << "\n1,train,1,1,0,0.5\n2,train,oops,1,0,0.5\n";
  try {
    read_metrics_csv(path.string());
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({}).code, kExitConfig);
  EXPECT_EQ(cli({"fly"}).code, kExitConfig);
  EXPECT_EQ(cli({"train", "--bogus", "1"}).code, kExitConfig);
  EXPECT_EQ(cli({"eval", (fresh_dir("nofile") / "none.semx").string()}).code, kExitConfig);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST(Cli, InvalidConfigFileExitsTwoWithLine) {
  const fs::path dir = fresh_dir("badcfg");
  std::ofstream(dir / "run.cfg") << "epochs = 2\nwarmup = 3\n";
  const Result r = cli({"train", (dir / "run.cfg").string()});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("warmup = 3"), std::string::npos) << r.err;
}

TEST(Cli, ErmRunHasNoPenalty) {
  const fs::path dir = fresh_dir("erm");
  ASSERT_EQ(cli(tiny_train(dir, {"--mix_kind", "none", "--gamma", "0"})).code, kExitOk);
  const std::vector<MetricsRecord> rows = read_metrics_csv((dir / "metrics.csv").string());
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) EXPECT_EQ(r.loss_sem, 0.0);
  EXPECT_TRUE(fs::exists(dir / "config.resolved"));
  EXPECT_TRUE(fs::exists(dir / "model.semx"));
}

TEST(Cli, RerunIsByteIdentical) {
  const fs::path a = fresh_dir("rerun-a"), b = fresh_dir("rerun-b");
  ASSERT_EQ(cli(tiny_train(a, {"--seed", "3"})).code, kExitOk);
  ASSERT_EQ(cli(tiny_train(b, {"--seed", "3"})).code, kExitOk);
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  EXPECT_EQ(slurp(a / "model.semx").size(), slurp(b / "model.semx").size());
}

TEST(Cli, ResolvedConfigReproducesRun) {
  const fs::path a = fresh_dir("replay-a"), b = fresh_dir("replay-b");
  ASSERT_EQ(cli(tiny_train(a, {"--gamma", "0.3"})).code, kExitOk);
  ASSERT_EQ(cli({"train", (a / "config.resolved").string(), "--out_dir", b.string()}).code, kExitOk);
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
}

TEST(Cli, SeedPrecedence) {
  const fs::path dir = fresh_dir("seed");
  std::ofstream(dir / "run.cfg") << "seed = 11\nepochs = 1\nmodel = small_mlp:4\ndataset = " << kTiny
                                 << "\nout_dir = " << (dir / "out").string() << "\n";
  auto seed_of = [&] {
    const RunConfig c = load_run_config((dir / "out" / "config.resolved").string());
    return c.train.seed;
  };
  ::unsetenv("SEMX_SEED");
  ASSERT_EQ(cli({"train", (dir / "run.cfg").string()}).code, kExitOk);
  EXPECT_EQ(seed_of(), 11u);
  ::setenv("SEMX_SEED", "22", 1);
  ASSERT_EQ(cli({"train", (dir / "run.cfg").string()}).code, kExitOk);
  EXPECT_EQ(seed_of(), 22u);
  ASSERT_EQ(cli({"train", (dir / "run.cfg").string(), "--seed", "33"}).code, kExitOk);
  EXPECT_EQ(seed_of(), 33u);
  ::unsetenv("SEMX_SEED");
  ASSERT_EQ(cli({"train", "--epochs", "1", "--model", "small_mlp:4", "--dataset", kTiny, "--out_dir",
                 (dir / "out").string()})
                .code,
            kExitOk);
  EXPECT_EQ(seed_of(), 0u);
}

TEST(Cli, ZeroGammaMatchesReferenceMetrics) {
  const fs::path dir = fresh_dir("reference");
  ASSERT_EQ(cli(tiny_train(dir, {"--gamma", "0", "--mix_kind", "linear", "--es_fraction", "0",
                                 "--seed", "6"},
                           "4"))
                .code,
            kExitOk);
  const RunConfig config = load_run_config((dir / "config.resolved").string());
  const RunData data = prepare_run_data(config);
  Model model = small_mlp(data.train.sample_shape(), {12}, 3, 6);
  testing::ReferenceMixup ref;
  ref.epochs = 4;
  ref.batch_size = 16;
  ref.seed = 6;
  ref.milestones = {2, 3};
  std::string csv = std::string(kMetricsHeader) + "\n";
  for (const MetricsRecord& r : ref.run(model, data.train, &data.val)) csv += format_metrics_row(r) + "\n";
  EXPECT_EQ(slurp(dir / "metrics.csv"), csv);
}

TEST(Cli, DivergenceExitsThree) {
  const Result r = cli(tiny_train(fresh_dir("diverge"), {"--lr", "1e25"}));
  EXPECT_EQ(r.code, kExitNumeric);
  EXPECT_NE(r.err.find("epoch"), std::string::npos);
}

struct Overfit {
  fs::path dir = fresh_dir("overfit");
  Overfit() {
    const Result r = cli({"train", "--dataset", "synth_shapes:n=40,hw=16,k=2,seed=9", "--model",
                          "small_mlp:64", "--epochs", "60", "--batch_size", "8", "--mix_kind", "none",
                          "--gamma", "0", "--lr", "0.05", "--out_dir", dir.string()});
    EXPECT_EQ(r.code, kExitOk) << r.err;
  }
  std::string ckpt() const { return (dir / "model.semx").string(); }
};

const Overfit& overfit() {
  static const Overfit o;
  return o;
}

TEST(Cli, EvalOnMemorisedTrainingSplit) {
  const Result r = cli({"eval", overfit().ckpt(), "--split", "train"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(slurp(overfit().dir / "eval.json"));
  EXPECT_EQ(j["accuracy"].get<double>(), 1.0);
  EXPECT_EQ(j["config"]["mix_kind"], "none");
}

TEST(Cli, CorruptEvalMeanIsMeanOfCells) {
  const fs::path out = fresh_dir("corrupt") / "c.json";
  ASSERT_EQ(cli({"corrupt-eval", overfit().ckpt(), "--split", "all", "--out", out.string()}).code, kExitOk);
  const auto j = nlohmann::json::parse(slurp(out));
  double s = 0;
  int cells = 0;
  for (const auto& [kind, row] : j["per_kind_per_severity"].items())
    for (double a : row) {
      s += a;
      ++cells;
    }
  EXPECT_EQ(cells, 20);
  EXPECT_NEAR(j["mean"].get<double>(), s / 20, 1e-9);
}

TEST(Cli, OodAgainstItselfIsChance) {
  const fs::path out = fresh_dir("ood") / "o.json";
  const Result r = cli({"ood-eval", overfit().ckpt(), "--split", "all", "--ood",
                        "synth_shapes:n=40,hw=16,k=2,seed=9", "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NEAR(nlohmann::json::parse(slurp(out))["auroc"].get<double>(), 0.5, 0.02);
}

TEST(Cli, OodAgainstNoise) {
  const fs::path out = fresh_dir("ood-noise") / "o.json";
  ASSERT_EQ(cli({"ood-eval", overfit().ckpt(), "--split", "all", "--ood", "uniform_noise:n=200",
                 "--out", out.string()})
                .code,
            kExitOk);
  const auto j = nlohmann::json::parse(slurp(out));
  EXPECT_GE(j["auroc"].get<double>(), 0.0);
  EXPECT_LE(j["auroc"].get<double>(), 1.0);
}

TEST(Cli, ProbeWritesGridAndProjection) {
  const fs::path dir = fresh_dir("probe");
  const Result r = cli({"probe", overfit().ckpt(), "--split", "all", "--class-a", "0", "--class-b", "1",
                        "--pairs", "10", "--out-dir", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream gap(dir / "gap_curve.csv");
  std::string line;
  std::getline(gap, line);
  EXPECT_EQ(line, "lambda,gap_mean,gap_std");
  std::vector<std::vector<double>> rows;
  while (std::getline(gap, line)) {
    std::vector<double> row;
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows[0][0], 0.0);
  EXPECT_LE(rows[0][1], 1e-5);
  EXPECT_LE(rows[10][1], 1e-5);
  EXPECT_TRUE(fs::exists(dir / "projection.csv"));
  EXPECT_TRUE(fs::exists(dir / "probe.config"));
  std::ifstream proj(dir / "projection.csv");
  std::getline(proj, line);
  EXPECT_EQ(line, "x,y,lambda,class");
}

TEST(Cli, ProbeWithTooFewSamplesExitsTwo) {
  EXPECT_EQ(cli({"probe", overfit().ckpt(), "--split", "all", "--class-a", "0", "--class-b", "1", "--pairs",
                 "1000", "--out-dir", fresh_dir("probe-small").string()})
                .code,
            kExitConfig);
}

TEST(Cli, VersionMismatchExitsFour) {
  const fs::path dir = fresh_dir("version");
  std::string bytes = slurp(overfit().ckpt());
  bytes[4] = 9;
  std::ofstream(dir / "model.semx", std::ios::binary) << bytes;
  const Result r = cli({"eval", (dir / "model.semx").string()});
  EXPECT_EQ(r.code, kExitFormat);
  EXPECT_NE(r.err.find("version"), std::string::npos) << r.err;
}

TEST(Cli, GenDataWritesIdx) {
  const fs::path dir = fresh_dir("gen");
  ASSERT_EQ(cli({"gen-data", "--dataset", "synth_shapes:n=12,hw=16,k=3", "--images", (dir / "i").string(),
                 "--labels", (dir / "l").string()})
                .code,
            kExitOk);
  EXPECT_EQ(read_idx((dir / "i").string(), (dir / "l").string(), 3).size(), 12u);
}

TEST(Gradcheck, DefaultPasses) {
  const Result r = cli({"gradcheck"});
  EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
  EXPECT_NE(r.out.find("max relative error"), std::string::npos);
}

TEST(Gradcheck, SameSeedSameOutput) {
  EXPECT_EQ(cli({"gradcheck", "--seed", "3"}).out, cli({"gradcheck", "--seed", "3"}).out);
}

TEST(Gradcheck, BrokenBackwardRuleIsCaught) {
  for (OpKind op : {OpKind::kMatmul, OpKind::kConv2d, OpKind::kRowL2Norm, OpKind::kScaleAdd}) {
    GradcheckOptions o;
    o.fault = BackwardFault{op, 1.5};
    std::ostringstream out, err;
    EXPECT_EQ(cmd_gradcheck(0, o, out, err), kExitCheck) << op_name(op);
    EXPECT_NE(err.str().find("exceeds tolerance"), std::string::npos);
  }
}

}  // namespace
}  // namespace semx
