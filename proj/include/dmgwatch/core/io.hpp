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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmgwatch/core/image.hpp"

namespace dmgwatch {

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);

/// Decodes PNG/JPEG/BMP/... bytes into 8-bit gray or RGB. Alpha is dropped.
Image decode_image(std::span<const std::uint8_t> bytes);
Image read_image(const std::filesystem::path& path);

Bytes encode_png(const Image& image);
Bytes encode_jpeg(const Image& image, int quality = 90);

/// File extension (with dot) matching the encoded payload, or "" if unknown.
std::string sniff_image_extension(std::span<const std::uint8_t> bytes);

// JSON-lines
void append_json_line(const std::filesystem::path& path, const nlohmann::json& value);
std::vector<nlohmann::json> read_json_lines(const std::filesystem::path& path);

}  // namespace dmgwatch
