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

#include "semx/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace semx {
namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  if (s.size() > 0xffffffffu) throw UsageError("string too long for checkpoint");
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw LengthError("checkpoint truncated reading " + std::string(what) +
                        " at offset " + std::to_string(pos_));
    }
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_u16(out, kCheckpointVersion);
  put_string(out, ckpt.config_text);
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    put_string(out, t.name);
    put_u32(out, static_cast<std::uint32_t>(t.value.rank()));
    for (std::size_t d : t.value.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (float f : t.value.values()) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError("not a checkpoint: bad magic at offset 0");
  }
  Reader body(bytes.subspan(4));
  const std::uint16_t version = body.u16("version");
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError("checkpoint format version " + std::to_string(version) +
                                 ", expected " + std::to_string(kCheckpointVersion));
  }
  Checkpoint ckpt;
  ckpt.config_text = body.str("config");
  const std::uint32_t count = body.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = body.str("tensor name");
    const std::uint32_t rank = body.u32("rank");
    if (rank > 8) {
      throw FormatError("tensor '" + t.name + "' has rank " + std::to_string(rank));
    }
    Shape shape;
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t e = body.u32("extent");
      if (e == 0) throw FormatError("tensor '" + t.name + "' has a zero extent");
      shape.push_back(e);
      total *= e;
    }
    body.need(total * 4, "tensor data");
    Tensor value(shape);
    auto data = value.data();
    for (std::size_t k = 0; k < total; ++k) data[k] = std::bit_cast<float>(body.u32("data"));
    t.value = std::move(value);
    ckpt.tensors.push_back(std::move(t));
  }
  if (!body.done()) {
    throw FormatError("trailing bytes after checkpoint at offset " +
                      std::to_string(4 + body.pos()));
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write checkpoint '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw UsageError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open checkpoint '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

Checkpoint make_checkpoint(const Model& model, std::string config_text) {
  Checkpoint ckpt;
  ckpt.config_text = std::move(config_text);
  const auto& names = model.parameter_names();
  const auto params = model.parameters();
  for (std::size_t i = 0; i < names.size(); ++i) ckpt.tensors.push_back({names[i], params[i]});
  return ckpt;
}

void restore_parameters(Model& model, const Checkpoint& ckpt) {
  const auto& names = model.parameter_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const NamedTensor* found = nullptr;
    for (const auto& t : ckpt.tensors) {
      if (t.name == names[i]) found = &t;
    }
    if (!found) throw FormatError("checkpoint lacks parameter '" + names[i] + "'");
    if (found->value.shape() != model.parameters()[i].shape()) {
      throw FormatError("parameter '" + names[i] + "' is " +
                        shape_to_string(found->value.shape()) + " in the checkpoint, " +
                        shape_to_string(model.parameters()[i].shape()) + " in the model");
    }
    model.parameters()[i] = found->value;
  }
}

}  // namespace semx
