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

#include "dmgwatch/corpus/fetch.hpp"

#include <algorithm>
#include <atomic>
#include <future>
#include <set>
#include <unordered_map>
#include <variant>

#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/http.hpp"

namespace dmgwatch::corpus {

namespace fs = std::filesystem;

std::string_view to_string(FetchFailureKind kind) {
  switch (kind) {
    case FetchFailureKind::malformed_url: return "malformed_url";
    case FetchFailureKind::unreachable: return "unreachable";
    case FetchFailureKind::http_status: return "http_status";
    case FetchFailureKind::decode: return "decode";
    case FetchFailureKind::duplicate_url: return "duplicate_url";
    case FetchFailureKind::io: return "io";
  }
  return "io";
}

namespace {

bool is_remote(const std::string& url) {
  return url.starts_with("http://") || url.starts_with("https://");
}

Source classify_host(const std::string& url, Source fallback) {
  const auto host_start = url.find("://") + 3;
  const auto host = url.substr(host_start, url.find('/', host_start) - host_start);
  if (host.find("twimg.com") != std::string::npos || host.find("twitter.com") != std::string::npos) {
    return Source::twitter;
  }
  if (host.find("gettyimages") != std::string::npos) return Source::getty;
  return fallback;
}

std::string storage_stem(const std::string& image_id) {
  std::string stem;
  for (char c : image_id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    stem += ok ? c : '_';
  }
  return stem;
}

Bytes default_transport(const std::string& url) {
  auto response = http_get(url);
  if (response.status < 200 || response.status >= 300) {
    throw Error(ErrorCode::fetch, "HTTP status " + std::to_string(response.status), "http_status");
  }
  return std::move(response.body);
}

struct Job {
  std::size_t index;
  ManifestEntry entry;
  std::string stem;
};

using Outcome = std::variant<ImageRecord, FetchFailure>;

Outcome run_job(const Job& job, const fs::path& dest, const FetchOptions& opts, const Clock& clock) {
  const auto& url = job.entry.url;
  const bool remote = is_remote(url);
  Bytes bytes;
  try {
    if (remote) {
      bytes = opts.transport(url);
    } else {
      fs::path local = url.starts_with("file://") ? fs::path(url.substr(7)) : fs::path(url);
      if (local.is_relative()) local = opts.base_dir / local;
      bytes = read_file(local);
    }
  } catch (const Error& e) {
    const auto kind = e.subject() == "http_status" ? FetchFailureKind::http_status : FetchFailureKind::unreachable;
    return FetchFailure{job.entry.image_id, url, kind, e.what()};
  }

  Image decoded;
  try {
    decoded = decode_image(bytes);
  } catch (const Error& e) {
    return FetchFailure{job.entry.image_id, url, FetchFailureKind::decode, e.what()};
  }

  const fs::path target = dest / (job.stem + sniff_image_extension(bytes));
  try {
    write_file(target, bytes);
  } catch (const Error& e) {
    return FetchFailure{job.entry.image_id, url, FetchFailureKind::io, e.what()};
  }
  ImageRecord record;
  record.image_id = job.entry.image_id;
  record.source = remote ? classify_host(url, opts.remote_source) : Source::replay;
  record.url = url;
  record.local_ref = target.string();
  record.width = decoded.width;
  record.height = decoded.height;
  record.content_digest = md5(bytes);
  record.fetched_at = clock();
  return record;
}

}  // namespace

FetchReport fetch_images(const DatasetManifest& manifest, const fs::path& dest, const FetchOptions& options) {
  std::error_code ec;
  fs::create_directories(dest, ec);
  if (ec || !fs::is_directory(dest)) {
    throw Error(ErrorCode::io, "destination is not writable: " + dest.string(), dest.string());
  }
  FetchOptions opts = options;
  if (!opts.transport) opts.transport = default_transport;
  const Clock clock = opts.clock ? opts.clock : Clock(now_utc);

  FetchReport report;
  std::vector<Job> jobs;
  std::unordered_map<std::string, std::string> url_owner;
  std::set<std::string> stems;
  for (const auto& entry : manifest.entries) {
    if (!is_well_formed_url(entry.url)) {
      report.failures.push_back({entry.image_id, entry.url, FetchFailureKind::malformed_url, "malformed url"});
      continue;
    }
    if (auto [it, fresh] = url_owner.emplace(entry.url, entry.image_id); !fresh) {
      report.failures.push_back({entry.image_id, entry.url, FetchFailureKind::duplicate_url,
                                 "url already fetched for " + it->second});
      continue;
    }
    std::string stem = storage_stem(entry.image_id);
    for (int n = 1; !stems.insert(stem).second; ++n) stem = storage_stem(entry.image_id) + "_" + std::to_string(n);
    jobs.push_back({jobs.size(), entry, stem});
  }

  std::vector<std::optional<Outcome>> outcomes(jobs.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(opts.concurrency, jobs.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      outcomes[i] = run_job(jobs[i], dest, opts, clock);
    }
  };
  std::vector<std::future<void>> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.push_back(std::async(std::launch::async, worker));
  for (auto& f : pool) f.get();

  for (auto& outcome : outcomes) {
    if (auto* record = std::get_if<ImageRecord>(&*outcome)) report.records.push_back(std::move(*record));
    else report.failures.push_back(std::get<FetchFailure>(std::move(*outcome)));
  }
  return report;
}

void save_fetch_report(const fs::path& dest, const FetchReport& report) {
  std::string records, failures;
  for (const auto& r : report.records) records += to_json(r).dump() + "\n";
  for (const auto& f : report.failures) {
    failures += nlohmann::json{{"image_id", f.image_id},
                               {"url", f.url},
                               {"kind", to_string(f.kind)},
                               {"message", f.message}}
                    .dump() +
                "\n";
  }
  write_text(dest / "records.jsonl", records);
  write_text(dest / "fetch_failures.jsonl", failures);
}

std::vector<ImageRecord> load_records(const fs::path& records_jsonl) {
  std::vector<ImageRecord> records;
  for (const auto& row : read_json_lines(records_jsonl)) records.push_back(record_from_json(row));
  return records;
}

ImageRecord record_from_file(const fs::path& path, std::string image_id, Source source, Timestamp fetched_at,
                             std::optional<std::string> url) {
  const Bytes bytes = read_file(path);
  const Image image = decode_image(bytes);
  ImageRecord r;
  r.image_id = std::move(image_id);
  r.source = source;
  r.url = std::move(url);
  r.local_ref = path.string();
  r.width = image.width;
  r.height = image.height;
  r.content_digest = md5(bytes);
  r.fetched_at = fetched_at;
  return r;
}

bool validate_min_size(const ImageRecord& record, int min_px) {
  if (record.width < 1 || record.height < 1) {
    throw Error(ErrorCode::decode, "record '" + record.image_id + "' has no decoded dimensions", record.image_id);
  }
  return record.width >= min_px && record.height >= min_px;
}

}  // namespace dmgwatch::corpus
