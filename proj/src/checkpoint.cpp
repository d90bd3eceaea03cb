/**
 * Copyright 2026 The RankMatch Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "rankmatch/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include "rankmatch/core/error.hpp"

namespace rankmatch {
namespace {

constexpr char kMagic[8] = {'R', 'M', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kMaxNameLength = 4096;
constexpr std::uint32_t kMaxDim = 1u << 24;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(bits));
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

class Reader {
 public:
  Reader(std::istream& is, const std::string& path) : is_(is), path_(path) {}

  std::uint64_t offset() const { return offset_; }

  void bytes(char* out, std::size_t n, const char* what) {
    is_.read(out, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw DataFormatError("checkpoint '" + path_ + "': truncated while reading " +
                            what + " at byte offset " + std::to_string(offset_));
    }
    offset_ += n;
  }

  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  }

  double f64(const char* what) {
    unsigned char b[8];
    bytes(reinterpret_cast<char*>(b), 8, what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

 private:
  std::istream& is_;
  std::string path_;
  std::uint64_t offset_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params) {
  if (params.names.size() != params.values.size()) {
    throw Error("checkpoint: names/values size mismatch");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("checkpoint: cannot open '" + path + "' for writing");
  os.write(kMagic, sizeof(kMagic));
  write_u32(os, static_cast<std::uint32_t>(params.values.size()));
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    const std::string& name = params.names[i];
    const ad::Tensor& t = params.values[i];
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(t.rows()));
    write_u32(os, static_cast<std::uint32_t>(t.cols()));
    for (Index j = 0; j < t.size(); ++j) {
      write_f64(os, static_cast<double>(t.data()[j]));
    }
  }
  os.flush();
  if (!os) throw Error("checkpoint: write to '" + path + "' failed");
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataFormatError("checkpoint: cannot open '" + path + "'");
  Reader r(is, path);

  char magic[8];
  r.bytes(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataFormatError("checkpoint '" + path +
                          "': bad magic at byte offset 0 (not a checkpoint, or "
                          "unsupported version)");
  }
  const std::uint32_t count = r.u32("tensor count");
  if (count > 1u << 20) {
    throw DataFormatError("checkpoint '" + path + "': implausible tensor count " +
                          std::to_string(count));
  }
  ModelParams params;
  params.names.reserve(count);
  params.values.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t entry_offset = r.offset();
    const std::uint32_t name_len = r.u32("name length");
    if (name_len == 0 || name_len > kMaxNameLength) {
      throw DataFormatError("checkpoint '" + path + "': bad name length " +
                            std::to_string(name_len) + " at byte offset " +
                            std::to_string(entry_offset));
    }
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len, "tensor name");
    const std::uint32_t rows = r.u32("rows");
    const std::uint32_t cols = r.u32("cols");
    if (rows == 0 || cols == 0 || rows > kMaxDim || cols > kMaxDim) {
      throw DataFormatError("checkpoint '" + path + "': bad shape " +
                            std::to_string(rows) + "x" + std::to_string(cols) +
                            " for tensor '" + name + "' at byte offset " +
                            std::to_string(entry_offset));
    }
    ad::Tensor t({static_cast<Index>(rows), static_cast<Index>(cols)});
    for (Index j = 0; j < t.size(); ++j) {
      t.data()[j] = static_cast<Real>(r.f64("tensor data"));
    }
    params.names.push_back(std::move(name));
    params.values.push_back(std::move(t));
  }
  char trailing;
  is.read(&trailing, 1);
  if (is.gcount() != 0) {
    throw DataFormatError("checkpoint '" + path + "': trailing bytes after " +
                          std::to_string(count) + " tensors at byte offset " +
                          std::to_string(r.offset()));
  }
  return params;
}

}  // namespace rankmatch
