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

#include "dmgwatch/monitor/store.hpp"

#include <algorithm>
#include <mutex>

#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/io.hpp"

namespace dmgwatch::monitor {

namespace fs = std::filesystem;
using corpus::LabelValue;
using nlohmann::json;

namespace {

std::string_view to_string(Verdict v) { return v == Verdict::confirm ? "confirm" : "override"; }

Verdict parse_verdict(std::string_view s) {
  if (s == "confirm") return Verdict::confirm;
  if (s == "override") return Verdict::override_label;
  throw Error(ErrorCode::invalid_argument, "verdict must be 'confirm' or 'override'");
}

std::optional<Verdict> current_verdict(const ClassifiedItem& item) {
  switch (item.review_state) {
    case ReviewState::pending: return std::nullopt;
    case ReviewState::confirmed: return Verdict::confirm;
    case ReviewState::overridden: return Verdict::override_label;
  }
  return std::nullopt;
}

bool queue_order(const ClassifiedItem& a, const ClassifiedItem& b) {
  if (a.processed_at != b.processed_at) return a.processed_at > b.processed_at;
  if (a.post_id != b.post_id) return a.post_id < b.post_id;
  return a.image_id < b.image_id;
}

}  // namespace

json to_json(const QueuePage& page) {
  json items = json::array();
  for (const auto& item : page.items) items.push_back(to_json(item));
  return {{"items", items}, {"total", page.total}, {"page", page.page}, {"page_size", page.page_size}};
}

ReviewRequest review_request_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "review body must be a JSON object");
  ReviewRequest r;
  try {
    r.verdict = parse_verdict(j.at("verdict").get<std::string>());
    if (j.contains("label") && !j["label"].is_null()) r.label = corpus::parse_label(j["label"].get<std::string>());
    r.reviewer = j.at("reviewer").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("bad review body: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::invalid_argument, e.what());
  }
  if (r.reviewer.empty()) throw Error(ErrorCode::invalid_argument, "reviewer name is required");
  return r;
}

json to_json(const SuppressedRecord& r) {
  return {{"image_id", r.image_id},
          {"post_id", r.post_id},
          {"reason", to_string(r.reason)},
          {"matched_image_id", r.matched_image_id},
          {"source_ref", r.source_ref},
          {"content_digest", r.content_digest},
          {"at", format_rfc3339(r.at)}};
}

ItemStore::ItemStore(fs::path dir, bool allow_rereview)
    : dir_(std::move(dir)), allow_rereview_(allow_rereview), journal_(dir_ / "labels.jsonl") {
  fs::create_directories(dir_);
  load();
}

void ItemStore::load() {
  auto lines = [&](const char* name) {
    const fs::path p = dir_ / name;
    return fs::exists(p) ? read_json_lines(p) : std::vector<json>{};
  };
  for (const auto& row : lines("items.jsonl")) {
    ClassifiedItem item = classified_item_from_json(row);
    items_[item.image_id] = std::move(item);
  }
  for (const auto& row : lines("reviews.jsonl")) {
    const std::string id = row.at("image_id").get<std::string>();
    const auto it = items_.find(id);
    if (it == items_.end()) throw Error(ErrorCode::parse, "review for unknown item in " + dir_.string(), id);
    ReviewRequest r;
    r.verdict = parse_verdict(row.at("verdict").get<std::string>());
    if (!row.at("label").is_null()) r.label = corpus::parse_label(row["label"].get<std::string>());
    r.reviewer = row.at("reviewer").get<std::string>();
    apply_review(it->second, r, parse_rfc3339(row.at("at").get<std::string>()));
  }
  suppressed_ = lines("suppressed.jsonl").size();
  overflow_ = lines("overflow.jsonl").size();
}

void ItemStore::put(const ClassifiedItem& item) {
  item.validate();
  std::unique_lock lock(mutex_);
  if (items_.count(item.image_id)) throw Error(ErrorCode::conflict, "item already stored", item.image_id);
  append_json_line(dir_ / "items.jsonl", to_json(item));
  items_.emplace(item.image_id, item);
}

void ItemStore::record_suppressed(const SuppressedRecord& record) {
  std::unique_lock lock(mutex_);
  append_json_line(dir_ / "suppressed.jsonl", to_json(record));
  ++suppressed_;
}

void ItemStore::record_overflow(const std::string& post_id, std::size_t depth, Timestamp at) {
  std::unique_lock lock(mutex_);
  append_json_line(dir_ / "overflow.jsonl", {{"post_id", post_id}, {"queue_depth", depth}, {"at", format_rfc3339(at)}});
  ++overflow_;
}

bool ItemStore::contains(const std::string& image_id) const {
  std::shared_lock lock(mutex_);
  return items_.count(image_id) > 0;
}

std::optional<ClassifiedItem> ItemStore::get(const std::string& image_id) const {
  std::shared_lock lock(mutex_);
  const auto it = items_.find(image_id);
  if (it == items_.end()) return std::nullopt;
  return it->second;
}

std::size_t ItemStore::size() const {
  std::shared_lock lock(mutex_);
  return items_.size();
}

std::size_t ItemStore::suppressed_count() const {
  std::shared_lock lock(mutex_);
  return suppressed_;
}

std::size_t ItemStore::overflow_count() const {
  std::shared_lock lock(mutex_);
  return overflow_;
}

std::vector<ClassifiedItem> ItemStore::all() const {
  std::vector<ClassifiedItem> out;
  {
    std::shared_lock lock(mutex_);
    out.reserve(items_.size());
    for (const auto& [id, item] : items_) out.push_back(item);
  }
  std::sort(out.begin(), out.end(), queue_order);
  return out;
}

QueuePage ItemStore::query(const QueueFilter& filter, std::size_t page, std::size_t page_size) const {
  if (page == 0 || page_size == 0) throw Error(ErrorCode::invalid_argument, "page and page_size start at 1");
  if (filter.min_p_damage && !(*filter.min_p_damage >= 0.0 && *filter.min_p_damage <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "min_p_damage must lie in [0, 1]");
  }
  std::vector<ClassifiedItem> matches;
  {
    std::shared_lock lock(mutex_);
    for (const auto& [id, item] : items_) {
      if (filter.state && item.review_state != *filter.state) continue;
      if (filter.min_p_damage && item.probs.p_damage < *filter.min_p_damage) continue;
      if (filter.since && item.processed_at < *filter.since) continue;
      matches.push_back(item);
    }
  }
  std::sort(matches.begin(), matches.end(), queue_order);
  QueuePage out;
  out.total = matches.size();
  out.page = page;
  out.page_size = page_size;
  const std::size_t begin = std::min(matches.size(), (page - 1) * page_size);
  const std::size_t end = std::min(matches.size(), begin + page_size);
  out.items.assign(std::make_move_iterator(matches.begin() + begin), std::make_move_iterator(matches.begin() + end));
  return out;
}

void ItemStore::apply_review(ClassifiedItem& item, const ReviewRequest& request, Timestamp at) {
  if (request.verdict == Verdict::confirm) {
    item.review_state = ReviewState::confirmed;
    item.reviewer_label.reset();
  } else {
    item.review_state = ReviewState::overridden;
    item.reviewer_label = request.label;
  }
  item.reviewer = request.reviewer;
  item.reviewed_at = at;
}

ReviewOutcome ItemStore::submit_review(const std::string& image_id, const ReviewRequest& request, Timestamp at) {
  if (request.reviewer.empty()) throw Error(ErrorCode::invalid_argument, "reviewer name is required", image_id);
  std::unique_lock lock(mutex_);
  const auto it = items_.find(image_id);
  if (it == items_.end()) throw Error(ErrorCode::not_found, "no such item", image_id);
  ClassifiedItem& item = it->second;

  std::optional<LabelValue> label;
  if (request.verdict == Verdict::override_label) {
    if (!request.label) throw Error(ErrorCode::invalid_argument, "override needs a label", image_id);
    if (*request.label == LabelValue::excluded) {
      throw Error(ErrorCode::invalid_argument, "override label must be damage or non_damage", image_id);
    }
    if (*request.label == item.predicted) {
      throw Error(ErrorCode::invalid_argument, "override label equals the prediction; use confirm", image_id);
    }
    label = request.label;
  }

  if (current_verdict(item) == request.verdict && item.reviewer == request.reviewer && item.reviewer_label == label) {
    return {item, false};
  }
  if (item.failure) throw Error(ErrorCode::conflict, "item failed classification and cannot be reviewed", image_id);
  if (!allow_rereview_ && item.review_state != ReviewState::pending) {
    throw Error(ErrorCode::conflict, "item already reviewed", image_id);
  }

  json event = {{"image_id", image_id},
                {"verdict", to_string(request.verdict)},
                {"label", label ? json(corpus::to_string(*label)) : json(nullptr)},
                {"reviewer", request.reviewer},
                {"at", format_rfc3339(at)},
                {"previous",
                 {{"review_state", to_string(item.review_state)},
                  {"reviewer_label", item.reviewer_label ? json(corpus::to_string(*item.reviewer_label)) : json(nullptr)},
                  {"reviewer", item.reviewer ? json(*item.reviewer) : json(nullptr)}}}};
  append_json_line(dir_ / "reviews.jsonl", event);

  ReviewRequest normalized = request;
  normalized.label = label;
  apply_review(item, normalized, at);

  corpus::LabeledExample example;
  example.image_id = image_id;
  example.label = item.final_label() == LabelValue::damage ? corpus::Label::damage() : corpus::Label::non_damage();
  example.labeler = request.reviewer;
  example.labeled_at = at;
  journal_.append(example);
  return {item, true};
}

std::optional<fs::path> ItemStore::heatmap_path(const std::string& image_id, const std::string& cls) const {
  std::shared_lock lock(mutex_);
  const auto it = items_.find(image_id);
  if (it == items_.end()) return std::nullopt;
  const auto ref = it->second.heatmap_refs.find(cls);
  if (ref == it->second.heatmap_refs.end()) return std::nullopt;
  const fs::path p = fs::path(ref->second).is_absolute() ? fs::path(ref->second) : dir_ / ref->second;
  if (!fs::exists(p)) return std::nullopt;
  return p;
}

corpus::DatasetManifest ItemStore::export_corrections(std::optional<Timestamp> since) const {
  corpus::DatasetManifest m;
  {
    std::shared_lock lock(mutex_);
    for (const auto& [id, item] : items_) {
      if (item.review_state == ReviewState::pending) continue;
      if (since && item.reviewed_at && *item.reviewed_at < *since) continue;
      m.entries.push_back({item.image_id, item.source_ref, item.final_label()});
    }
  }
  std::sort(m.entries.begin(), m.entries.end(),
            [](const corpus::ManifestEntry& a, const corpus::ManifestEntry& b) { return a.image_id < b.image_id; });
  m.recount();
  return m;
}

}  // namespace dmgwatch::monitor
