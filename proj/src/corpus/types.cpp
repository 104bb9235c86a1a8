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

#include "dmgwatch/corpus/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

#include "dmgwatch/core/error.hpp"

namespace dmgwatch::corpus {

Label Label::make(LabelValue value, std::optional<ExclusionRationale> rationale) {
  if ((value == LabelValue::excluded) != rationale.has_value()) {
    throw Error(ErrorCode::invalid_argument,
                "a rationale is required for excluded labels and forbidden otherwise");
  }
  return Label(value, rationale);
}

Label label_by_damage_fraction(double damaged_area_fraction, bool shows_building, bool composite) {
  if (!std::isfinite(damaged_area_fraction) || damaged_area_fraction < 0.0 || damaged_area_fraction > 1.0) {
    throw Error(ErrorCode::invalid_argument, "damaged area fraction must be in [0, 1]");
  }
  if (composite) return Label::excluded(ExclusionRationale::composite_or_overlay);
  if (damaged_area_fraction > 0.20) {
    return shows_building ? Label::damage() : Label::excluded(ExclusionRationale::not_a_building);
  }
  if (damaged_area_fraction > 0.0 && shows_building) {
    return Label::excluded(ExclusionRationale::under_20_percent);
  }
  return Label::non_damage();
}

void DatasetManifest::recount() {
  counts = {};
  for (const auto& e : entries) {
    if (e.label == LabelValue::damage) ++counts.damage;
    else if (e.label == LabelValue::non_damage) ++counts.non_damage;
  }
}

void DatasetManifest::validate() const {
  std::unordered_set<std::string> seen;
  ClassCounts tally;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!seen.insert(e.image_id).second) {
      throw Error(ErrorCode::duplicate_id,
                  "duplicate image_id '" + e.image_id + "' at row " + std::to_string(i + 1), e.image_id);
    }
    if (e.label == LabelValue::excluded) {
      throw Error(ErrorCode::invalid_argument, "manifests carry only damage/non_damage labels", e.image_id);
    }
    (e.label == LabelValue::damage ? tally.damage : tally.non_damage)++;
  }
  if (tally != counts) throw Error(ErrorCode::invalid_argument, "manifest counts disagree with entries");
}

double ClassWeights::for_label(LabelValue v) const {
  switch (v) {
    case LabelValue::damage: return damage;
    case LabelValue::non_damage: return non_damage;
    case LabelValue::excluded: break;
  }
  throw Error(ErrorCode::invalid_argument, "excluded examples carry no class weight");
}

std::string_view to_string(Source s) {
  switch (s) {
    case Source::twitter: return "twitter";
    case Source::getty: return "getty";
    case Source::replay: return "replay";
    case Source::local: return "local";
  }
  return "local";
}

std::string_view to_string(LabelValue v) {
  switch (v) {
    case LabelValue::damage: return "damage";
    case LabelValue::non_damage: return "non_damage";
    case LabelValue::excluded: return "excluded";
  }
  return "excluded";
}

std::string_view to_string(ExclusionRationale r) {
  switch (r) {
    case ExclusionRationale::not_a_building: return "not_a_building";
    case ExclusionRationale::composite_or_overlay: return "composite_or_overlay";
    case ExclusionRationale::under_20_percent: return "under_20_percent";
    case ExclusionRationale::other: return "other";
  }
  return "other";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test1: return "test1";
    case Split::test2: return "test2";
  }
  return "train";
}

Source parse_source(std::string_view s) {
  for (auto v : {Source::twitter, Source::getty, Source::replay, Source::local}) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::parse, "unknown source '" + std::string(s) + "'", std::string(s));
}

LabelValue parse_label(std::string_view s) {
  for (auto v : {LabelValue::damage, LabelValue::non_damage, LabelValue::excluded}) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::parse, "unknown label '" + std::string(s) + "'", std::string(s));
}

ExclusionRationale parse_rationale(std::string_view s) {
  for (auto v : {ExclusionRationale::not_a_building, ExclusionRationale::composite_or_overlay,
                 ExclusionRationale::under_20_percent, ExclusionRationale::other}) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::parse, "unknown exclusion rationale '" + std::string(s) + "'", std::string(s));
}

Split parse_split(std::string_view s) {
  for (auto v : {Split::train, Split::validation, Split::test1, Split::test2}) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::parse, "unknown split '" + std::string(s) + "'", std::string(s));
}

nlohmann::json to_json(const ImageRecord& r) {
  nlohmann::json j = {{"image_id", r.image_id},
                      {"source", to_string(r.source)},
                      {"local_ref", r.local_ref},
                      {"width", r.width},
                      {"height", r.height},
                      {"content_digest", r.content_digest.hex()},
                      {"fetched_at", format_rfc3339(r.fetched_at)}};
  j["url"] = r.url ? nlohmann::json(*r.url) : nlohmann::json(nullptr);
  return j;
}

ImageRecord record_from_json(const nlohmann::json& j) {
  try {
    ImageRecord r;
    r.image_id = j.at("image_id").get<std::string>();
    r.source = parse_source(j.at("source").get<std::string>());
    if (j.contains("url") && !j.at("url").is_null()) r.url = j.at("url").get<std::string>();
    r.local_ref = j.at("local_ref").get<std::string>();
    r.width = j.at("width").get<int>();
    r.height = j.at("height").get<int>();
    r.content_digest = Digest128::from_hex(j.at("content_digest").get<std::string>());
    r.fetched_at = parse_rfc3339(j.at("fetched_at").get<std::string>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("malformed image record: ") + e.what());
  }
}

nlohmann::json to_json(const LabeledExample& e) {
  nlohmann::json j = {{"image_id", e.image_id},
                      {"label", to_string(e.label.value())},
                      {"labeler", e.labeler},
                      {"labeled_at", format_rfc3339(e.labeled_at)}};
  if (e.label.rationale()) j["rationale"] = to_string(*e.label.rationale());
  return j;
}

LabeledExample example_from_json(const nlohmann::json& j) {
  try {
    LabeledExample e;
    e.image_id = j.at("image_id").get<std::string>();
    std::optional<ExclusionRationale> why;
    if (j.contains("rationale") && !j.at("rationale").is_null()) {
      why = parse_rationale(j.at("rationale").get<std::string>());
    }
    e.label = Label::make(parse_label(j.at("label").get<std::string>()), why);
    e.labeler = j.at("labeler").get<std::string>();
    e.labeled_at = parse_rfc3339(j.at("labeled_at").get<std::string>());
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::parse, std::string("malformed labeled example: ") + ex.what());
  }
}

bool is_well_formed_url(std::string_view url) {
  if (url.empty()) return false;
  if (std::any_of(url.begin(), url.end(), [](unsigned char c) { return std::isspace(c) || std::iscntrl(c); })) {
    return false;
  }
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) return true;  // plain local path
  const auto scheme = url.substr(0, scheme_end);
  const auto rest = url.substr(scheme_end + 3);
  if (scheme == "file") return !rest.empty();
  if (scheme != "http" && scheme != "https") return false;
  const auto host = rest.substr(0, rest.find_first_of("/?#"));
  return !host.empty() && host.front() != ':' && host.find('@') == std::string_view::npos;
}

}  // namespace dmgwatch::corpus
