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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmgwatch/core/random.hpp"
#include "dmgwatch/core/time.hpp"
#include "dmgwatch/corpus/types.hpp"
#include "dmgwatch/vision/tensor.hpp"

namespace dmgwatch::monitor {

struct FeedItem {
  std::string post_id;
  Timestamp created_at{};
  std::string text;
  std::vector<std::string> image_refs;
  std::string source_tag;

  friend bool operator==(const FeedItem&, const FeedItem&) = default;
};

nlohmann::json to_json(const FeedItem& item);
FeedItem feed_item_from_json(const nlohmann::json& j);

enum class ReviewState { pending, confirmed, overridden };
std::string_view to_string(ReviewState s);
ReviewState parse_review_state(std::string_view s);

struct ClassifiedItem {
  std::string image_id;
  std::string post_id;
  vision::ClassProbabilities probs;
  corpus::LabelValue predicted = corpus::LabelValue::non_damage;
  std::map<std::string, std::string> heatmap_refs;  // class -> file
  Timestamp processed_at{};
  ReviewState review_state = ReviewState::pending;
  std::optional<corpus::LabelValue> reviewer_label;
  std::optional<std::string> reviewer;
  std::optional<Timestamp> reviewed_at;
  /// Where the image bytes were read from, and their digest.
  std::string source_ref;
  std::string content_digest;
  /// Set when fetching, decoding or classifying the image failed.
  std::optional<std::string> failure;

  /// Reviewer label when overridden, otherwise the prediction.
  corpus::LabelValue final_label() const;
  /// Throws when overridden without a differing reviewer label.
  void validate() const;

  friend bool operator==(const ClassifiedItem&, const ClassifiedItem&) = default;
};

nlohmann::json to_json(const ClassifiedItem& item);
ClassifiedItem classified_item_from_json(const nlohmann::json& j);

/// Exponential backoff with multiplicative jitter, capped at max_delay.
struct ReconnectPolicy {
  std::chrono::milliseconds initial_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{30000};
  double jitter = 0.2;  // delay scaled by a uniform factor in [1 - jitter, 1 + jitter]
  int max_attempts = 10;  // consecutive failures before giving up

  /// Delay before reconnect attempt `attempt` (1-based).
  std::chrono::milliseconds delay(int attempt, Rng& rng) const;
};

/// How far back near-duplicate suppression looks. Exact digests are always
/// remembered for the whole run.
struct DedupWindow {
  enum class Kind { whole_run, count, duration } kind = Kind::whole_run;
  std::size_t count = 0;
  std::chrono::milliseconds duration{0};
};

struct MonitorConfig {
  std::string keyword = "earthquake";
  bool require_images = true;
  DedupWindow dedup_window;
  bool near_dedup = true;
  double near_threshold = 0.5;
  std::filesystem::path checkpoint;
  double threshold = 0.5;
  bool explain = false;
  std::filesystem::path store_dir = "monitor_store";
  std::optional<std::filesystem::path> output_jsonl;
  ReconnectPolicy reconnect;
  std::size_t queue_capacity = 64;
  int workers = 2;
  bool allow_rereview = true;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static MonitorConfig from_json(const nlohmann::json& j);
};

/// Case-insensitive substring match.
bool matches_keyword(const std::string& text, const std::string& keyword);

}  // namespace dmgwatch::monitor
