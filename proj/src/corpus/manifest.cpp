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

#include "dmgwatch/corpus/manifest.hpp"

#include <sstream>
#include <unordered_map>

#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/io.hpp"

namespace dmgwatch::corpus {

namespace {

constexpr std::string_view kHeader = "image_id,url,label";

std::string quote_if_needed(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

// Splits text into CSV records, honoring newlines inside quoted fields.
std::vector<std::string> split_records(std::string_view text) {
  std::vector<std::string> records;
  std::string current;
  bool quoted = false;
  for (char c : text) {
    if (c == '"') quoted = !quoted;
    if (!quoted && (c == '\n')) {
      if (!current.empty() && current.back() == '\r') current.pop_back();
      records.push_back(std::move(current));
      current.clear();
      continue;
    }
    current += c;
  }
  if (!current.empty()) {
    if (current.back() == '\r') current.pop_back();
    records.push_back(std::move(current));
  }
  return records;
}

}  // namespace

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw Error(ErrorCode::parse, "unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

DatasetManifest parse_manifest(std::string_view text, Split split) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  const auto records = split_records(text);
  if (records.empty() || records.front() != kHeader) {
    throw Error(ErrorCode::parse,
                "manifest header must be exactly '" + std::string(kHeader) + "'",
                records.empty() ? std::string() : records.front());
  }
  DatasetManifest manifest;
  manifest.split = split;
  std::unordered_map<std::string, std::size_t> first_row;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const std::size_t row = i;
    if (records[i].empty()) continue;
    std::vector<std::string> fields;
    try {
      fields = split_csv_line(records[i]);
    } catch (const Error& e) {
      throw Error(ErrorCode::parse, "row " + std::to_string(row) + ": " + e.what(), std::to_string(row));
    }
    if (fields.size() != 3) {
      throw Error(ErrorCode::parse, "row " + std::to_string(row) + ": expected 3 fields, got " +
                                        std::to_string(fields.size()),
                  std::to_string(row));
    }
    ManifestEntry entry{fields[0], fields[1], LabelValue::non_damage};
    if (entry.image_id.empty()) {
      throw Error(ErrorCode::parse, "row " + std::to_string(row) + ": empty image_id", std::to_string(row));
    }
    if (fields[2] == "damage") entry.label = LabelValue::damage;
    else if (fields[2] == "non_damage") entry.label = LabelValue::non_damage;
    else {
      throw Error(ErrorCode::parse,
                  "row " + std::to_string(row) + ": label must be damage or non_damage, got '" + fields[2] + "'",
                  entry.image_id);
    }
    if (auto [it, inserted] = first_row.emplace(entry.image_id, row); !inserted) {
      throw Error(ErrorCode::duplicate_id,
                  "row " + std::to_string(row) + ": duplicate image_id '" + entry.image_id +
                      "' (first seen at row " + std::to_string(it->second) + ")",
                  entry.image_id);
    }
    if (!is_well_formed_url(entry.url)) {
      manifest.issues.push_back({row, entry.image_id, "malformed url '" + entry.url + "'"});
    }
    manifest.entries.push_back(std::move(entry));
  }
  manifest.recount();
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path, Split split) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::io, "manifest not found: " + path.string(), path.string());
  }
  return parse_manifest(read_text(path), split);
}

std::string format_manifest(const DatasetManifest& manifest) {
  std::ostringstream out;
  out << kHeader << '\n';
  for (const auto& e : manifest.entries) {
    out << quote_if_needed(e.image_id) << ',' << quote_if_needed(e.url) << ',' << to_string(e.label) << '\n';
  }
  return out.str();
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  manifest.validate();
  write_text(path, format_manifest(manifest));
}

}  // namespace dmgwatch::corpus
