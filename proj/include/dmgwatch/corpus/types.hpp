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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmgwatch/core/digest.hpp"
#include "dmgwatch/core/time.hpp"

namespace dmgwatch::corpus {

enum class Source { twitter, getty, replay, local };

/// One fetched image: provenance, where its bytes live, and what they hash to.
struct ImageRecord {
  std::string image_id;
  Source source = Source::local;
  std::optional<std::string> url;
  std::string local_ref;
  int width = 0;
  int height = 0;
  Digest128 content_digest;
  Timestamp fetched_at{};

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

enum class LabelValue { damage, non_damage, excluded };

enum class ExclusionRationale { not_a_building, composite_or_overlay, under_20_percent, other };

/// A class label; exclusions must say why, inclusions must not.
class Label {
 public:
  static Label damage() { return Label(LabelValue::damage, std::nullopt); }
  static Label non_damage() { return Label(LabelValue::non_damage, std::nullopt); }
  static Label excluded(ExclusionRationale why) { return Label(LabelValue::excluded, why); }
  static Label make(LabelValue value, std::optional<ExclusionRationale> rationale);

  LabelValue value() const noexcept { return value_; }
  const std::optional<ExclusionRationale>& rationale() const noexcept { return rationale_; }

  friend bool operator==(const Label&, const Label&) = default;

 private:
  Label(LabelValue v, std::optional<ExclusionRationale> r) : value_(v), rationale_(r) {}
  LabelValue value_;
  std::optional<ExclusionRationale> rationale_;
};

/// Labeling rule for an image: damaged when visible building damage covers
/// more than ~20% of the frame; excluded images are not building damage or
/// are composites, overlays, or clippings.
Label label_by_damage_fraction(double damaged_area_fraction, bool shows_building = true,
                               bool composite = false);

struct LabeledExample {
  std::string image_id;
  Label label = Label::non_damage();
  std::string labeler;
  Timestamp labeled_at{};

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

enum class Split { train, validation, test1, test2 };

struct ManifestEntry {
  std::string image_id;
  std::string url;
  LabelValue label = LabelValue::non_damage;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct ClassCounts {
  std::size_t damage = 0;
  std::size_t non_damage = 0;

  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// A row the loader accepted but flagged (e.g. a malformed URL).
struct ManifestIssue {
  std::size_t row = 0;  // 1-based data row (header excluded)
  std::string image_id;
  std::string message;

  friend bool operator==(const ManifestIssue&, const ManifestIssue&) = default;
};

struct DatasetManifest {
  Split split = Split::train;
  std::vector<ManifestEntry> entries;
  ClassCounts counts;
  std::vector<ManifestIssue> issues;

  /// Recomputes `counts` from `entries`.
  void recount();
  /// Throws on duplicate ids, excluded labels or counts that disagree with entries.
  void validate() const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct ClassWeights {
  double non_damage = 1.0;
  double damage = 1.0;

  double for_label(LabelValue v) const;
};

std::string_view to_string(Source s);
std::string_view to_string(LabelValue v);
std::string_view to_string(ExclusionRationale r);
std::string_view to_string(Split s);
Source parse_source(std::string_view s);
LabelValue parse_label(std::string_view s);
ExclusionRationale parse_rationale(std::string_view s);
Split parse_split(std::string_view s);

nlohmann::json to_json(const ImageRecord& r);
ImageRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LabeledExample& e);
LabeledExample example_from_json(const nlohmann::json& j);

/// Whether a manifest URL is usable: http(s) with a host, file://, or a plain path.
bool is_well_formed_url(std::string_view url);

}  // namespace dmgwatch::corpus
