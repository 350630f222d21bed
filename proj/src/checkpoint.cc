/*
 * Copyright 2026 The fedseq Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "fedseq/checkpoint.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fedseq {
namespace {

constexpr char kMagic[8] = {'F', 'S', 'Q', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bits.begin(), bits.end());
  }
  out.append(reinterpret_cast<const char*>(bits.data()), bits.size());
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    std::array<unsigned char, sizeof(T)> bits;
    take(bits.data(), bits.size());
    if constexpr (std::endian::native == std::endian::big) {
      std::reverse(bits.begin(), bits.end());
    }
    return std::bit_cast<T>(bits);
  }

  std::string get_string(std::size_t n) {
    std::string s(n, '\0');
    take(s.data(), n);
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void take(void* dst, std::size_t n) {
    if (bytes_.size() - pos_ < n) throw std::runtime_error("checkpoint: truncated");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const ModelParams& params) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.dims.item_count));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.dims.dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.dims.ff_dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.dims.max_len));
  const auto tensors = params.tensors();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t->rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t->cols()));
    for (double v : t->values()) put<double>(out, v);
  }
  return out;
}

ModelParams decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.get_string(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  ModelDims dims;
  dims.item_count = static_cast<int>(in.get<std::uint32_t>());
  dims.dim = static_cast<int>(in.get<std::uint32_t>());
  dims.ff_dim = static_cast<int>(in.get<std::uint32_t>());
  dims.max_len = static_cast<int>(in.get<std::uint32_t>());
  ModelParams params = ModelParams::zeros(dims);
  auto tensors = params.tensors();
  if (in.get<std::uint32_t>() != tensors.size()) {
    throw std::runtime_error("checkpoint: unexpected tensor count");
  }
  for (auto& [name, t] : tensors) {
    const std::string stored = in.get_string(in.get<std::uint32_t>());
    if (stored != name) {
      throw std::runtime_error("checkpoint: expected tensor '" + std::string(name) +
                               "', found '" + stored + "'");
    }
    const auto rows = in.get<std::uint32_t>();
    const auto cols = in.get<std::uint32_t>();
    if (rows != t->rows() || cols != t->cols()) {
      throw std::runtime_error("checkpoint: shape mismatch for '" + stored + "'");
    }
    for (double& v : t->values()) v = in.get<double>();
  }
  if (!in.at_end()) throw std::runtime_error("checkpoint: trailing bytes");
  return params;
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  const std::string bytes = encode_checkpoint(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

}  // namespace fedseq
