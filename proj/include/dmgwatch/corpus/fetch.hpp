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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dmgwatch/core/io.hpp"
#include "dmgwatch/core/time.hpp"
#include "dmgwatch/corpus/types.hpp"

namespace dmgwatch::corpus {

enum class FetchFailureKind { malformed_url, unreachable, http_status, decode, duplicate_url, io };

std::string_view to_string(FetchFailureKind kind);

struct FetchFailure {
  std::string image_id;
  std::string url;
  FetchFailureKind kind = FetchFailureKind::unreachable;
  std::string message;
};

struct FetchReport {
  std::vector<ImageRecord> records;
  std::vector<FetchFailure> failures;
};

/// Downloads the bytes behind a remote URL; throws dmgwatch::Error on failure.
using RemoteTransport = std::function<Bytes(const std::string& url)>;

struct FetchOptions {
  /// Directory that relative local paths in the manifest are resolved against.
  std::filesystem::path base_dir = ".";
  /// Source tag for remote hosts that are not recognisably Twitter or Getty.
  Source remote_source = Source::twitter;
  int concurrency = 4;
  RemoteTransport transport;  // defaults to HTTP GET
  Clock clock;                // defaults to now_utc
};

/// Fetches each unique URL of `manifest` into `dest` and decodes it.
///
/// Local paths and file:// URLs are read from disk (source = replay) without
/// touching the transport. Repeated URLs, dead links and undecodable payloads
/// become failure entries; nothing here is fatal except an unwritable `dest`.
FetchReport fetch_images(const DatasetManifest& manifest, const std::filesystem::path& dest,
                         const FetchOptions& options = {});

/// Writes `records.jsonl` and `fetch_failures.jsonl` under `dest`.
void save_fetch_report(const std::filesystem::path& dest, const FetchReport& report);
std::vector<ImageRecord> load_records(const std::filesystem::path& records_jsonl);

/// Builds a record for an image file already on disk.
ImageRecord record_from_file(const std::filesystem::path& path, std::string image_id, Source source,
                             Timestamp fetched_at, std::optional<std::string> url = std::nullopt);

/// True iff both sides are at least `min_px`. Throws Error(decode) when the
/// record never decoded (non-positive dimensions), which is not the same as
/// failing the size rule.
bool validate_min_size(const ImageRecord& record, int min_px = 150);

}  // namespace dmgwatch::corpus
