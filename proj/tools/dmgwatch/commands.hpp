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
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "run_record.hpp"

namespace dmgwatch::cli {

struct Context {
  std::uint64_t seed = 0;
  bool seed_given = false;  // --seed overrides seeds in config files
  std::string config;  // global --config
  std::string out_dir = ".";
  RunRecord* record = nullptr;

  /// Section `name` of the global config document; {} when either is absent.
  nlohmann::json section(const std::string& name) const;
  std::filesystem::path out() const;
};

/// Adds corpus, dedup, model, eval, explain and monitor to `app`.
void register_commands(CLI::App& app, Context& ctx);

}  // namespace dmgwatch::cli
