// Copyright 2026 The RePlug Engine Authors.
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

#include "replug/rpix_format.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "replug/error.h"

namespace replug {
namespace {

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
  }
}

class Reader {
 public:
  Reader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

  template <typename T>
  T get_le() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      throw Error(ErrorKind::kIo, path_ + ": truncated RPIX file");
    }
  }

  const std::string& data_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_rpix(const std::string& path, const RpixFile& file) {
  std::string out;
  out.append(kRpixMagic, 4);
  put_le<std::uint16_t>(out, kRpixVersion);
  put_le<std::uint32_t>(out, file.dim);
  put_le<std::uint64_t>(out, file.records.size());
  put_le<std::uint64_t>(out, file.generation);
  for (const auto& rec : file.records) {
    if (rec.values.size() != file.dim) {
      throw Error(ErrorKind::kContract, "record '" + rec.id + "' has wrong dimension");
    }
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rec.id.size()));
    out += rec.id;
    for (double v : rec.values) {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(ErrorKind::kIo, "write failed for " + path);
}

RpixFile read_rpix(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIo, "cannot open " + path);
  const std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(data, path);
  if (r.bytes(4) != std::string(kRpixMagic, 4)) {
    throw Error(ErrorKind::kIo, path + ": not an RPIX file");
  }
  const auto version = r.get_le<std::uint16_t>();
  if (version != kRpixVersion) {
    throw Error(ErrorKind::kIo, path + ": unsupported RPIX version " + std::to_string(version));
  }
  RpixFile file;
  file.dim = r.get_le<std::uint32_t>();
  const auto count = r.get_le<std::uint64_t>();
  file.generation = r.get_le<std::uint64_t>();
  file.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    RpixRecord rec;
    rec.id = r.bytes(r.get_le<std::uint32_t>());
    rec.values.resize(file.dim);
    for (auto& v : rec.values) v = std::bit_cast<float>(r.get_le<std::uint32_t>());
    file.records.push_back(std::move(rec));
  }
  if (!r.done()) throw Error(ErrorKind::kIo, path + ": trailing bytes after last record");
  return file;
}

}  // namespace replug
