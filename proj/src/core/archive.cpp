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

#include "dmgwatch/core/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <regex>

#include "dmgwatch/core/error.hpp"

namespace dmgwatch {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "archive payloads are little-endian");

namespace {

constexpr char kMagic[4] = {'D', 'M', 'G', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kAlign = 64;

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::ifstream& in, const fs::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) {
    throw Error(ErrorCode::parse, "truncated archive " + path.string(), path.string());
  }
  return value;
}

}  // namespace

std::int64_t NamedTensor::element_count() const {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

const NamedTensor* TensorArchive::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void write_archive(const fs::path& path, const TensorArchive& archive) {
  nlohmann::json header;
  header["metadata"] = archive.metadata;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : archive.tensors) {
    if (t.element_count() != static_cast<std::int64_t>(t.values.size())) {
      throw Error(ErrorCode::shape_mismatch, "tensor values do not match its shape", t.name);
    }
    header["tensors"].push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += t.values.size() * sizeof(float);
  }
  const std::string text = header.dump();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string(), path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const std::size_t used = 4 + 4 + 8 + text.size();
  const std::string pad((kAlign - used % kAlign) % kAlign, '\0');
  out.write(pad.data(), static_cast<std::streamsize>(pad.size()));
  for (const auto& t : archive.tensors) {
    out.write(reinterpret_cast<const char*>(t.values.data()),
              static_cast<std::streamsize>(t.values.size() * sizeof(float)));
  }
  if (!out) throw Error(ErrorCode::io, "short write to " + path.string(), path.string());
}

TensorArchive read_archive(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string(), path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorCode::parse, path.string() + " is not a tensor archive", path.string());
  }
  if (get<std::uint32_t>(in, path) != kVersion) {
    throw Error(ErrorCode::parse, "unsupported archive version in " + path.string(), path.string());
  }
  const auto header_len = get<std::uint64_t>(in, path);
  if (header_len > (1u << 26)) throw Error(ErrorCode::parse, "archive header too large", path.string());
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw Error(ErrorCode::parse, "truncated archive header", path.string());
  }
  const std::size_t used = 4 + 4 + 8 + header_len;
  in.seekg(static_cast<std::streamoff>(used + (kAlign - used % kAlign) % kAlign));

  TensorArchive archive;
  try {
    const auto header = nlohmann::json::parse(text);
    archive.metadata = header.value("metadata", nlohmann::json::object());
    for (const auto& entry : header.at("tensors")) {
      NamedTensor t;
      t.name = entry.at("name").get<std::string>();
      t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
      for (auto d : t.shape) {
        if (d < 0) throw Error(ErrorCode::parse, "negative dimension", t.name);
      }
      t.values.resize(static_cast<std::size_t>(t.element_count()));
      if (!in.read(reinterpret_cast<char*>(t.values.data()),
                   static_cast<std::streamsize>(t.values.size() * sizeof(float)))) {
        throw Error(ErrorCode::parse, "truncated payload for tensor " + t.name, t.name);
      }
      archive.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, "malformed archive header: " + std::string(e.what()), path.string());
  }
  return archive;
}

void write_npy(const fs::path& path, int rows, int cols, const std::vector<float>& values) {
  if (rows < 1 || cols < 1 || static_cast<std::size_t>(rows) * cols != values.size()) {
    throw Error(ErrorCode::shape_mismatch, "npy shape does not match value count");
  }
  std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" + std::to_string(rows) +
                       ", " + std::to_string(cols) + "), }";
  const std::size_t base = 10 + header.size() + 1;
  header.append((16 - base % 16) % 16, ' ');
  header.push_back('\n');
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string(), path.string());
  out.write("\x93NUMPY\x01\x00", 8);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
}

std::vector<float> read_npy(const fs::path& path, int& rows, int& cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string(), path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, "\x93NUMPY\x01\x00", 8) != 0) {
    throw Error(ErrorCode::parse, path.string() + " is not an npy v1.0 file", path.string());
  }
  const auto len = get<std::uint16_t>(in, path);
  std::string header(len, '\0');
  in.read(header.data(), len);
  static const std::regex shape_re(R"('shape':\s*\((\d+),\s*(\d+)\))");
  std::smatch m;
  if (header.find("'<f4'") == std::string::npos || !std::regex_search(header, m, shape_re)) {
    throw Error(ErrorCode::parse, "unsupported npy header in " + path.string(), path.string());
  }
  rows = std::stoi(m[1]);
  cols = std::stoi(m[2]);
  std::vector<float> values(static_cast<std::size_t>(rows) * cols);
  if (!in.read(reinterpret_cast<char*>(values.data()),
               static_cast<std::streamsize>(values.size() * sizeof(float)))) {
    throw Error(ErrorCode::parse, "truncated npy payload", path.string());
  }
  return values;
}

}  // namespace dmgwatch
