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

#include "run_record.hpp"

#include <algorithm>

#include "dmgwatch/core/digest.hpp"
#include "dmgwatch/core/io.hpp"

namespace dmgwatch::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string path_digest(const fs::path& path) {
  if (fs::is_regular_file(path)) {
    const Bytes bytes = read_file(path);
    return md5(std::span<const std::uint8_t>(bytes)).hex();
  }
  if (!fs::is_directory(path)) return {};
  std::vector<std::string> lines;
  for (const auto& entry : fs::recursive_directory_iterator(path)) {
    if (!entry.is_regular_file()) continue;
    lines.push_back(fs::relative(entry.path(), path).generic_string() + " " + path_digest(entry.path()));
  }
  std::sort(lines.begin(), lines.end());
  std::string joined;
  for (const auto& l : lines) joined += l + "\n";
  return md5(std::string_view(joined)).hex();
}

RunRecord::RunRecord(std::vector<std::string> argv, std::uint64_t seed)
    : argv_(std::move(argv)), seed_(seed), started_(now_utc()) {}

void RunRecord::add_input(const std::string& role, const fs::path& path) { inputs_.emplace_back(role, path); }

void RunRecord::add_output(const std::string& role, const fs::path& path) { outputs_.emplace_back(role, path); }

json RunRecord::to_json(const std::string& status) const {
  auto files = [](const auto& list) {
    json out = json::array();
    for (const auto& [role, path] : list) {
      out.push_back({{"role", role},
                     {"path", fs::absolute(path).lexically_normal().string()},
                     {"md5", path_digest(path)}});
    }
    return out;
  };
  return {{"command", command_},
          {"args", argv_},
          {"versions",
           {{"dmgwatch", kVersion},
            {"compiler", __VERSION__},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
          {"seed", seed_},
          {"inputs", files(inputs_)},
          {"outputs", files(outputs_)},
          {"notes", notes_},
          {"status", status},
          {"started_at", format_rfc3339(started_)},
          {"finished_at", format_rfc3339(now_utc())}};
}

void RunRecord::append(const fs::path& out_dir, const std::string& status) const {
  append_json_line(out_dir / "runs.jsonl", to_json(status));
}

}  // namespace dmgwatch::cli
