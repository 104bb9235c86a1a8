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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dmgwatch {

struct NamedTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> values;

  std::int64_t element_count() const;
};

/// Self-describing tensor container used for backbone weights and checkpoints.
///
/// Layout: "DMGT" magic, u32 version, u64 header length, JSON header
/// ({"metadata": ..., "tensors": [{name, shape, offset}]}), zero padding to a
/// 64-byte boundary, then little-endian float32 payloads in header order.
struct TensorArchive {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

void write_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive read_archive(const std::filesystem::path& path);

/// 2-D float32 array in NumPy .npy (v1.0) format.
void write_npy(const std::filesystem::path& path, int rows, int cols, const std::vector<float>& values);
std::vector<float> read_npy(const std::filesystem::path& path, int& rows, int& cols);

}  // namespace dmgwatch
