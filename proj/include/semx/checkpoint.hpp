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

#ifndef SEMX_CHECKPOINT_HPP_
#define SEMX_CHECKPOINT_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semx/errors.hpp"
#include "semx/model.hpp"
#include "semx/tensor.hpp"

namespace semx {

inline constexpr char kCheckpointMagic[4] = {'S', 'E', 'M', 'X'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

/// A file written by a different format version.
class CheckpointVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Layout, all integers little-endian:
///   "SEMX" | u16 version | u32 n + n bytes of config text |
///   u32 count | count x (u32 n + name | u32 rank | rank x u32 extent |
///   f32 data, row-major)
struct Checkpoint {
  std::string config_text;
  std::vector<NamedTensor> tensors;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// FormatError on bad magic or a malformed table, LengthError on
/// truncation, CheckpointVersionError on a version other than ours.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint make_checkpoint(const Model& model, std::string config_text);

/// Copies every model parameter from the checkpoint. FormatError when a
/// name is missing or a shape differs.
void restore_parameters(Model& model, const Checkpoint& ckpt);

}  // namespace semx

#endif  // SEMX_CHECKPOINT_HPP_
