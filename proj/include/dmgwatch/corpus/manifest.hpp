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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dmgwatch/corpus/types.hpp"

namespace dmgwatch::corpus {

/// Reads a manifest CSV with the exact header `image_id,url,label`.
///
/// Rows whose URL is malformed stay in the manifest and are listed in
/// `issues`. A duplicate image_id or an unknown label aborts the load with an
/// error whose subject names the row's id.
DatasetManifest load_manifest(const std::filesystem::path& path, Split split = Split::train);
DatasetManifest parse_manifest(std::string_view csv_text, Split split = Split::train);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
std::string format_manifest(const DatasetManifest& manifest);

/// RFC 4180 field splitting for one record (quotes, doubled quotes).
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace dmgwatch::corpus
