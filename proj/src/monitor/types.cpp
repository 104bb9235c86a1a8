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

#include "dmgwatch/monitor/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "dmgwatch/core/error.hpp"

namespace dmgwatch::monitor {

using corpus::LabelValue;
using nlohmann::json;

json to_json(const FeedItem& item) {
  return {{"post_id", item.post_id},
          {"created_at", format_rfc3339(item.created_at)},
          {"text", item.text},
          {"image_refs", item.image_refs},
          {"source_tag", item.source_tag}};
}

FeedItem feed_item_from_json(const json& j) {
  try {
    FeedItem f;
    f.post_id = j.at("post_id").get<std::string>();
    f.created_at = parse_rfc3339(j.at("created_at").get<std::string>());
    f.text = j.at("text").get<std::string>();
    f.image_refs = j.value("image_refs", std::vector<std::string>{});
    f.source_tag = j.value("source_tag", std::string("replay"));
    if (f.post_id.empty()) throw Error(ErrorCode::parse, "feed item without post_id");
    return f;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("bad feed item: ") + e.what());
  }
}

std::string_view to_string(ReviewState s) {
  switch (s) {
    case ReviewState::pending: return "pending";
    case ReviewState::confirmed: return "confirmed";
    case ReviewState::overridden: return "overridden";
  }
  return "pending";
}

ReviewState parse_review_state(std::string_view s) {
  for (auto v : {ReviewState::pending, ReviewState::confirmed, ReviewState::overridden}) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::parse, "unknown review state '" + std::string(s) + "'");
}

LabelValue ClassifiedItem::final_label() const {
  return review_state == ReviewState::overridden && reviewer_label ? *reviewer_label : predicted;
}

void ClassifiedItem::validate() const {
  if (review_state == ReviewState::overridden && (!reviewer_label || *reviewer_label == predicted)) {
    throw Error(ErrorCode::invalid_argument, "overridden item needs a reviewer label that differs from the prediction",
                image_id);
  }
}

json to_json(const ClassifiedItem& item) {
  json j = {{"image_id", item.image_id},
            {"post_id", item.post_id},
            {"probs", {{"p_non_damage", item.probs.p_non_damage}, {"p_damage", item.probs.p_damage}}},
            {"predicted", corpus::to_string(item.predicted)},
            {"heatmap_refs", item.heatmap_refs},
            {"processed_at", format_rfc3339(item.processed_at)},
            {"review_state", to_string(item.review_state)},
            {"reviewer_label", item.reviewer_label ? json(corpus::to_string(*item.reviewer_label)) : json(nullptr)},
            {"source_ref", item.source_ref},
            {"content_digest", item.content_digest}};
  if (item.reviewer) j["reviewer"] = *item.reviewer;
  if (item.reviewed_at) j["reviewed_at"] = format_rfc3339(*item.reviewed_at);
  if (item.failure) j["failure"] = *item.failure;
  return j;
}

ClassifiedItem classified_item_from_json(const json& j) {
  try {
    ClassifiedItem c;
    c.image_id = j.at("image_id").get<std::string>();
    c.post_id = j.at("post_id").get<std::string>();
    c.probs.p_non_damage = j.at("probs").at("p_non_damage").get<double>();
    c.probs.p_damage = j.at("probs").at("p_damage").get<double>();
    c.predicted = corpus::parse_label(j.at("predicted").get<std::string>());
    c.heatmap_refs = j.value("heatmap_refs", std::map<std::string, std::string>{});
    c.processed_at = parse_rfc3339(j.at("processed_at").get<std::string>());
    c.review_state = parse_review_state(j.value("review_state", std::string("pending")));
    if (j.contains("reviewer_label") && !j["reviewer_label"].is_null()) {
      c.reviewer_label = corpus::parse_label(j["reviewer_label"].get<std::string>());
    }
    if (j.contains("reviewer")) c.reviewer = j["reviewer"].get<std::string>();
    if (j.contains("reviewed_at")) c.reviewed_at = parse_rfc3339(j["reviewed_at"].get<std::string>());
    c.source_ref = j.value("source_ref", std::string());
    c.content_digest = j.value("content_digest", std::string());
    if (j.contains("failure")) c.failure = j["failure"].get<std::string>();
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("bad classified item: ") + e.what());
  }
}

std::chrono::milliseconds ReconnectPolicy::delay(int attempt, Rng& rng) const {
  const double base = static_cast<double>(initial_delay.count()) * std::pow(multiplier, std::max(0, attempt - 1));
  const double capped = std::min(base, static_cast<double>(max_delay.count()));
  const double factor = 1.0 + jitter * (2.0 * rng.uniform() - 1.0);
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(std::min(capped * factor,
                                                                                   static_cast<double>(max_delay.count())))));
}

void MonitorConfig::validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorCode::invalid_argument, "threshold must lie in [0, 1]");
  if (!(near_threshold >= 0.0 && near_threshold <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "near-duplicate threshold must lie in [0, 1]");
  }
  if (queue_capacity < 1) throw Error(ErrorCode::invalid_argument, "queue capacity must be at least 1");
  if (workers < 1) throw Error(ErrorCode::invalid_argument, "need at least one worker");
  if (reconnect.multiplier < 1.0 || reconnect.jitter < 0.0 || reconnect.jitter >= 1.0 || reconnect.max_attempts < 1) {
    throw Error(ErrorCode::invalid_argument, "bad reconnect policy");
  }
}

json MonitorConfig::to_json() const {
  json window = {{"kind", dedup_window.kind == DedupWindow::Kind::whole_run ? "whole_run"
                          : dedup_window.kind == DedupWindow::Kind::count   ? "count"
                                                                            : "duration"}};
  if (dedup_window.kind == DedupWindow::Kind::count) window["count"] = dedup_window.count;
  if (dedup_window.kind == DedupWindow::Kind::duration) window["seconds"] = dedup_window.duration.count() / 1000.0;
  json j = {{"keyword", keyword},
            {"require_images", require_images},
            {"dedup_window", window},
            {"near_dedup", near_dedup},
            {"near_threshold", near_threshold},
            {"checkpoint", checkpoint.string()},
            {"threshold", threshold},
            {"explain", explain},
            {"store_dir", store_dir.string()},
            {"reconnect",
             {{"initial_ms", reconnect.initial_delay.count()},
              {"multiplier", reconnect.multiplier},
              {"max_ms", reconnect.max_delay.count()},
              {"jitter", reconnect.jitter},
              {"max_attempts", reconnect.max_attempts}}},
            {"queue_capacity", queue_capacity},
            {"workers", workers},
            {"allow_rereview", allow_rereview},
            {"seed", seed}};
  if (output_jsonl) j["output_jsonl"] = output_jsonl->string();
  return j;
}

MonitorConfig MonitorConfig::from_json(const json& j) {
  MonitorConfig c;
  try {
    c.keyword = j.value("keyword", c.keyword);
    c.require_images = j.value("require_images", c.require_images);
    if (j.contains("dedup_window")) {
      const auto& w = j["dedup_window"];
      const std::string kind = w.value("kind", std::string("whole_run"));
      if (kind == "whole_run") {
        c.dedup_window.kind = DedupWindow::Kind::whole_run;
      } else if (kind == "count") {
        c.dedup_window.kind = DedupWindow::Kind::count;
        c.dedup_window.count = w.at("count").get<std::size_t>();
      } else if (kind == "duration") {
        c.dedup_window.kind = DedupWindow::Kind::duration;
        c.dedup_window.duration = std::chrono::milliseconds(std::llround(w.at("seconds").get<double>() * 1000.0));
      } else {
        throw Error(ErrorCode::parse, "unknown dedup window kind '" + kind + "'");
      }
    }
    c.near_dedup = j.value("near_dedup", c.near_dedup);
    c.near_threshold = j.value("near_threshold", c.near_threshold);
    c.checkpoint = j.value("checkpoint", std::string());
    c.threshold = j.value("threshold", c.threshold);
    c.explain = j.value("explain", c.explain);
    c.store_dir = j.value("store_dir", c.store_dir.string());
    if (j.contains("output_jsonl")) c.output_jsonl = j["output_jsonl"].get<std::string>();
    if (j.contains("reconnect")) {
      const auto& r = j["reconnect"];
      c.reconnect.initial_delay = std::chrono::milliseconds(r.value("initial_ms", c.reconnect.initial_delay.count()));
      c.reconnect.multiplier = r.value("multiplier", c.reconnect.multiplier);
      c.reconnect.max_delay = std::chrono::milliseconds(r.value("max_ms", c.reconnect.max_delay.count()));
      c.reconnect.jitter = r.value("jitter", c.reconnect.jitter);
      c.reconnect.max_attempts = r.value("max_attempts", c.reconnect.max_attempts);
    }
    c.queue_capacity = j.value("queue_capacity", c.queue_capacity);
    c.workers = j.value("workers", c.workers);
    c.allow_rereview = j.value("allow_rereview", c.allow_rereview);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("bad monitor config: ") + e.what());
  }
  c.validate();
  return c;
}

bool matches_keyword(const std::string& text, const std::string& keyword) {
  if (keyword.empty()) return true;
  auto lower = [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); };
  std::string t(text.size(), ' '), k(keyword.size(), ' ');
  std::transform(text.begin(), text.end(), t.begin(), lower);
  std::transform(keyword.begin(), keyword.end(), k.begin(), lower);
  return t.find(k) != std::string::npos;
}

}  // namespace dmgwatch::monitor
