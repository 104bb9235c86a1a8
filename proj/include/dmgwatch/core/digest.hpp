// Copyright 2026 The dmgwatch Authors
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

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace dmgwatch {

/// 128-bit content digest (MD5 of a byte stream).
struct Digest128 {
  std::array<std::uint8_t, 16> bytes{};

  std::string hex() const;
  static Digest128 from_hex(std::string_view hex);

  friend auto operator<=>(const Digest128&, const Digest128&) = default;
};

Digest128 md5(std::span<const std::uint8_t> data);
Digest128 md5(std::string_view data);

struct Digest128Hash {
  std::size_t operator()(const Digest128& d) const noexcept {
    std::size_t h = 0;
    for (int i = 0; i < 8; ++i) h = (h << 8) | d.bytes[i];
    return h;
  }
};

}  // namespace dmgwatch
