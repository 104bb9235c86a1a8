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

#include "dmgwatch/core/time.hpp"

namespace dmgwatch::cli {

inline constexpr const char* kVersion = "0.1.0";

/// MD5 of a file, or of the sorted (relative path, file digest) list of a
/// directory. Empty when the path does not exist.
std::string path_digest(const std::filesystem::path& path);

/// Machine-readable record of one invocation, appended to <out-dir>/runs.jsonl.
/// Inputs and outputs carry content digests, so a stage's inputs can be
/// matched against an earlier stage's outputs.
class RunRecord {
 public:
  RunRecord(std::vector<std::string> argv, std::uint64_t seed);

  void set_command(std::string command) { command_ = std::move(command); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void add_input(const std::string& role, const std::filesystem::path& path);
  void add_output(const std::string& role, const std::filesystem::path& path);
  void note(const std::string& key, nlohmann::json value) { notes_[key] = std::move(value); }

  nlohmann::json to_json(const std::string& status) const;
  void append(const std::filesystem::path& out_dir, const std::string& status) const;

 private:
  std::vector<std::string> argv_;
  std::uint64_t seed_;
  std::string command_;
  Timestamp started_;
  std::vector<std::pair<std::string, std::filesystem::path>> inputs_;
  std::vector<std::pair<std::string, std::filesystem::path>> outputs_;
  nlohmann::json notes_ = nlohmann::json::object();
};

}  // namespace dmgwatch::cli
