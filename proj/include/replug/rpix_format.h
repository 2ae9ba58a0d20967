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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace replug {

// Binary snapshot layout, all integers and floats little-endian:
//   magic "RPIX" | version u16 | dim u32 | count u64 | generation u64
//   count x ( id_len u32 | id bytes (UTF-8) | dim x f32 )
inline constexpr char kRpixMagic[4] = {'R', 'P', 'I', 'X'};
inline constexpr std::uint16_t kRpixVersion = 1;

struct RpixRecord {
  std::string id;
  std::vector<double> values;
};

struct RpixFile {
  std::uint32_t dim = 0;
  std::uint64_t generation = 0;
  std::vector<RpixRecord> records;
};

void write_rpix(const std::string& path, const RpixFile& file);
RpixFile read_rpix(const std::string& path);

}  // namespace replug
