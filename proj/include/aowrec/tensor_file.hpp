/*
 * Copyright 2026 The aowrec Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef AOWREC_TENSOR_FILE_HPP_
#define AOWREC_TENSOR_FILE_HPP_

// Binary model file: magic `AOW1`, little-endian header, then length-prefixed
// named float32 tensors.
//
//   magic[4] version:u32 kind:u32 vocab:u32
//   config_len:u32 config[config_len]          (`key=value` lines)
//   epochs_run:u32 final_loss:f32 seed:u64
//   tensor_count:u32
//   per tensor: name_len:u32 name ndims:u32 dims:u32[ndims] payload:f32[prod]

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "aowrec/common.hpp"

namespace aowrec {

inline constexpr char kCheckpointMagic[4] = {'A', 'O', 'W', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Tensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  bool operator==(const Tensor&) const = default;
};

struct CheckpointData {
  std::uint32_t kind = 0;
  std::uint32_t vocab_size = 0;
  std::map<std::string, std::string> config;
  std::uint32_t epochs_run = 0;
  float final_loss = 0.0f;
  std::uint64_t seed = 0;
  std::vector<Tensor> tensors;

  const Tensor& Find(const std::string& name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return t;
    }
    throw CheckpointError("checkpoint: missing tensor '" + name + "'");
  }

  const std::string& Config(const std::string& key) const {
    auto it = config.find(key);
    if (it == config.end()) throw CheckpointError("checkpoint: missing config key '" + key + "'");
    return it->second;
  }
};

namespace detail {

class ByteWriter {
 public:
  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void U64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void F32(float f) { U32(std::bit_cast<std::uint32_t>(f)); }
  void Raw(const std::string& s) { bytes_ += s; }
  void Str(const std::string& s) {
    U32(static_cast<std::uint32_t>(s.size()));
    Raw(s);
  }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint32_t U32() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::uint64_t U64() {
    const std::uint64_t lo = U32();
    const std::uint64_t hi = U32();
    return lo | (hi << 32);
  }
  float F32() { return std::bit_cast<float>(U32()); }
  std::string Raw(std::size_t n) {
    Need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string Str() { return Raw(U32()); }
  bool AtEnd() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void Need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint: truncated file");
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string EncodeCheckpoint(const CheckpointData& ck) {
  detail::ByteWriter w;
  w.Raw(std::string(kCheckpointMagic, 4));
  w.U32(kCheckpointVersion);
  w.U32(ck.kind);
  w.U32(ck.vocab_size);
  std::string cfg;
  for (const auto& [k, v] : ck.config) cfg += k + "=" + v + "\n";
  w.Str(cfg);
  w.U32(ck.epochs_run);
  w.F32(ck.final_loss);
  w.U64(ck.seed);
  w.U32(static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& t : ck.tensors) {
    std::size_t count = 1;
    for (auto d : t.dims) count *= d;
    if (count != t.data.size()) {
      throw CheckpointError("checkpoint: tensor '" + t.name + "' shape/payload mismatch");
    }
    w.Str(t.name);
    w.U32(static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) w.U32(d);
    for (float f : t.data) w.F32(f);
  }
  return w.bytes();
}

inline CheckpointData DecodeCheckpoint(std::string bytes) {
  detail::ByteReader r(std::move(bytes));
  if (r.Raw(4) != std::string(kCheckpointMagic, 4)) {
    throw CheckpointError("checkpoint: bad magic (not an AOW1 file)");
  }
  const std::uint32_t version = r.U32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }
  CheckpointData ck;
  ck.kind = r.U32();
  ck.vocab_size = r.U32();
  std::istringstream cfg(r.Str());
  for (std::string line; std::getline(cfg, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("checkpoint: bad config line");
    ck.config[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ck.epochs_run = r.U32();
  ck.final_loss = r.F32();
  ck.seed = r.U64();
  const std::uint32_t n = r.U32();
  for (std::uint32_t i = 0; i < n; ++i) {
    Tensor t;
    t.name = r.Str();
    const std::uint32_t nd = r.U32();
    if (nd > 8) throw CheckpointError("checkpoint: implausible rank for '" + t.name + "'");
    std::size_t count = 1;
    for (std::uint32_t d = 0; d < nd; ++d) {
      t.dims.push_back(r.U32());
      const std::size_t dim = t.dims.back();
      constexpr std::size_t kCap = std::size_t{1} << 40;
      count = (dim != 0 && count > kCap / dim) ? kCap : count * dim;
    }
    if (count > r.remaining() / 4) throw CheckpointError("checkpoint: truncated file");
    t.data.resize(count);
    for (auto& f : t.data) f = r.F32();
    ck.tensors.push_back(std::move(t));
  }
  if (!r.AtEnd()) throw CheckpointError("checkpoint: trailing bytes");
  return ck;
}

inline std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void WriteFileBytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline std::string FileDigest(const std::string& path) {
  return HexDigest(Fnv1a64(ReadFileBytes(path)));
}

}  // namespace aowrec

#endif  // AOWREC_TENSOR_FILE_HPP_
