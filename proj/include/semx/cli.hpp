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

#ifndef SEMX_CLI_HPP_
#define SEMX_CLI_HPP_

#include <cstdint>
#include <exception>
#include <ostream>
#include <string>
#include <vector>

#include "semx/config.hpp"
#include "semx/data.hpp"
#include "semx/gradcheck.hpp"
#include "semx/model.hpp"

namespace semx {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // anything unclassified
inline constexpr int kExitConfig = 2;   // ConfigError, UsageError, bad arguments
inline constexpr int kExitNumeric = 3;  // NumericError (training diverged)
inline constexpr int kExitFormat = 4;   // FormatError, checkpoint version
inline constexpr int kExitCheck = 5;    // gradcheck over tolerance

int exit_code_for(const std::exception& e);

/// Entry point behind the `semx` binary; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Train and validation parts of the configured dataset: a class-stratified
/// 0.9 / 0.1 split seeded with the run seed.
struct RunData {
  Dataset train;
  Dataset val;
};
RunData prepare_run_data(const RunConfig& config);

/// Config and model rebuilt from a checkpoint file.
struct LoadedRun {
  RunConfig config;
  Model model;
};
LoadedRun load_run(const std::string& checkpoint_path);

/// The gradcheck command with explicit options (tests use this to inject a
/// faulty backward rule).
int cmd_gradcheck(std::uint64_t seed, const GradcheckOptions& options, std::ostream& out,
                  std::ostream& err);

}  // namespace semx

#endif  // SEMX_CLI_HPP_
