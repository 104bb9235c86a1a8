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

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmgwatch/corpus/dataset.hpp"
#include "dmgwatch/corpus/types.hpp"
#include "dmgwatch/monitor/stream_dedup.hpp"
#include "dmgwatch/monitor/types.hpp"

namespace dmgwatch::monitor {

struct QueueFilter {
  std::optional<ReviewState> state;
  std::optional<double> min_p_damage;
  std::optional<Timestamp> since;  // processed_at >= since
};

struct QueuePage {
  std::vector<ClassifiedItem> items;
  std::size_t total = 0;  // matches across all pages
  std::size_t page = 1;
  std::size_t page_size = 0;
};

nlohmann::json to_json(const QueuePage& page);

enum class Verdict { confirm, override_label };

struct ReviewRequest {
  Verdict verdict = Verdict::confirm;
  std::optional<corpus::LabelValue> label;  // required for override
  std::string reviewer;
};

/// Parses {verdict: "confirm"|"override", label?, reviewer}.
ReviewRequest review_request_from_json(const nlohmann::json& j);

struct ReviewOutcome {
  ClassifiedItem item;
  bool changed = false;  // false when the submit repeated the latest review
};

struct SuppressedRecord {
  std::string image_id;
  std::string post_id;
  SuppressReason reason = SuppressReason::exact;
  std::string matched_image_id;
  std::string source_ref;
  std::string content_digest;
  Timestamp at{};
};

nlohmann::json to_json(const SuppressedRecord& r);

/// Event-sourced store of classified items and their reviews.
///
/// Layout under `dir`: items.jsonl (one line per classified item),
/// reviews.jsonl (every accepted review, with the state it replaced),
/// suppressed.jsonl, overflow.jsonl, labels.jsonl (corpus journal) and
/// heatmaps/. Opening a directory replays the event files. Reads take a
/// shared lock; writes are serialized.
class ItemStore {
 public:
  ItemStore(std::filesystem::path dir, bool allow_rereview = true);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::filesystem::path heatmap_dir() const { return dir_ / "heatmaps"; }
  const corpus::LabelJournal& journal() const noexcept { return journal_; }

  /// Throws Error(conflict) if the image id is already stored.
  void put(const ClassifiedItem& item);
  void record_suppressed(const SuppressedRecord& record);
  void record_overflow(const std::string& post_id, std::size_t depth, Timestamp at);

  bool contains(const std::string& image_id) const;
  std::optional<ClassifiedItem> get(const std::string& image_id) const;
  std::size_t size() const;
  std::size_t suppressed_count() const;
  std::size_t overflow_count() const;
  std::vector<ClassifiedItem> all() const;

  /// Ordered by processed_at descending, then post_id, then image_id.
  /// `page` is 1-based; throws Error(invalid_argument) for page 0 or size 0.
  QueuePage query(const QueueFilter& filter, std::size_t page = 1, std::size_t page_size = 50) const;

  /// Errors: not_found for an unknown id; invalid_argument for an override
  /// without a label, to an excluded label, or to the predicted label;
  /// conflict when the item is already reviewed and re-review is off, or
  /// when the item failed classification. A submit identical to the latest
  /// review (reviewer, verdict, label) changes nothing.
  ReviewOutcome submit_review(const std::string& image_id, const ReviewRequest& request, Timestamp at);

  /// Absolute path of an item's heatmap overlay for `cls`, if one exists.
  std::optional<std::filesystem::path> heatmap_path(const std::string& image_id, const std::string& cls) const;

  /// Every reviewed item with its final label; reviewed_at >= since when given.
  corpus::DatasetManifest export_corrections(std::optional<Timestamp> since = std::nullopt) const;

 private:
  void apply_review(ClassifiedItem& item, const ReviewRequest& request, Timestamp at);
  void load();

  std::filesystem::path dir_;
  bool allow_rereview_;
  corpus::LabelJournal journal_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, ClassifiedItem> items_;
  std::size_t suppressed_ = 0;
  std::size_t overflow_ = 0;
};

}  // namespace dmgwatch::monitor
