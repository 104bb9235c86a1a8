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

#include "dmgwatch/monitor/adapters.hpp"

#include <cctype>
#include <cstdio>
#include <thread>

#include "dmgwatch/core/http.hpp"

namespace dmgwatch::monitor {

namespace {

bool is_remote(const std::string& ref) { return ref.rfind("http://", 0) == 0 || ref.rfind("https://", 0) == 0; }

std::string url_encode(const std::string& s) {
  std::string out;
  char buf[4];
  for (unsigned char ch : s) {
    if (std::isalnum(ch) || ch == '-' || ch == '_' || ch == '.' || ch == '~') {
      out += static_cast<char>(ch);
    } else {
      std::snprintf(buf, sizeof buf, "%%%02X", ch);
      out += buf;
    }
  }
  return out;
}

Bytes fetch_remote(const std::string& url) {
  const HttpResponse r = http_get(url);
  if (r.status < 200 || r.status >= 300) {
    throw Error(ErrorCode::fetch, "HTTP " + std::to_string(r.status) + " for " + url, url);
  }
  return r.body;
}

}  // namespace

ReplayAdapter::ReplayAdapter(const std::filesystem::path& fixture, std::set<std::size_t> drop_at)
    : base_(fixture.parent_path()), drop_at_(std::move(drop_at)) {
  for (const auto& line : read_json_lines(fixture)) items_.push_back(feed_item_from_json(line));
}

void ReplayAdapter::connect(const std::optional<std::string>& cursor) {
  if (cursor) {
    try {
      position_ = std::stoul(*cursor);
    } catch (const std::exception&) {
      throw Error(ErrorCode::parse, "bad replay cursor '" + *cursor + "'");
    }
    if (position_ > items_.size()) throw Error(ErrorCode::invalid_argument, "replay cursor beyond end of fixture");
  } else {
    position_ = 0;
  }
  connected_ = true;
  ++connects_;
}

std::optional<FeedItem> ReplayAdapter::next() {
  if (!connected_) throw Disconnected("replay adapter is not connected");
  if (position_ >= items_.size()) return std::nullopt;
  if (drop_at_.erase(position_)) {
    connected_ = false;
    throw Disconnected("injected disconnect before item " + std::to_string(position_));
  }
  return items_[position_++];
}

Bytes ReplayAdapter::load_image(const std::string& ref) const {
  if (is_remote(ref)) return fetch_remote(ref);
  return read_file(base_ / ref);
}

std::string ReplayAdapter::resolve(const std::string& ref) const {
  return is_remote(ref) ? ref : (base_ / ref).lexically_normal().string();
}

HttpPollingAdapter::HttpPollingAdapter(Options options) : options_(std::move(options)) {
  if (options_.endpoint.empty()) throw Error(ErrorCode::invalid_argument, "polling adapter needs an endpoint");
  if (!options_.get) options_.get = [](const std::string& url) { return http_get(url); };
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

void HttpPollingAdapter::connect(const std::optional<std::string>& cursor) {
  cursor_ = cursor.value_or("");
  page_.clear();
  page_pos_ = 0;
}

// Cursors are "<server cursor>#<items consumed from that page>" so a resume
// mid-page skips exactly what was already delivered.
std::optional<FeedItem> HttpPollingAdapter::next() {
  while (page_pos_ >= page_.size()) {
    std::string server_cursor = cursor_;
    std::size_t skip = 0;
    if (const auto hash = cursor_.rfind('#'); hash != std::string::npos) {
      server_cursor = cursor_.substr(0, hash);
      skip = std::stoul(cursor_.substr(hash + 1));
    }
    const std::string sep = options_.endpoint.find('?') == std::string::npos ? "?" : "&";
    HttpResponse r;
    try {
      r = options_.get(options_.endpoint + sep + "cursor=" + url_encode(server_cursor));
    } catch (const Error& e) {
      throw Disconnected(std::string("poll failed: ") + e.what());
    }
    if (r.status < 200 || r.status >= 300) throw Disconnected("poll returned HTTP " + std::to_string(r.status));
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(r.body.begin(), r.body.end());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, std::string("bad poll response: ") + e.what());
    }
    std::vector<FeedItem> items;
    for (const auto& j : body.value("items", nlohmann::json::array())) items.push_back(feed_item_from_json(j));
    const std::string next_cursor = body.value("cursor", server_cursor);
    if (skip >= items.size()) {
      if (next_cursor == server_cursor) {
        ++idle_;
        if (options_.idle_polls_before_end > 0 && idle_ >= options_.idle_polls_before_end) return std::nullopt;
        options_.sleep(options_.poll_interval);
      }
      cursor_ = next_cursor;
      continue;
    }
    idle_ = 0;
    page_ = std::move(items);
    page_pos_ = skip;
    page_cursor_ = server_cursor;
    next_page_cursor_ = next_cursor;
  }
  FeedItem item = page_[page_pos_++];
  cursor_ = page_pos_ >= page_.size() ? next_page_cursor_ : page_cursor_ + "#" + std::to_string(page_pos_);
  return item;
}

Bytes HttpPollingAdapter::load_image(const std::string& ref) const {
  if (is_remote(ref)) return fetch_remote(ref);
  return read_file(options_.image_base / ref);
}

std::string HttpPollingAdapter::resolve(const std::string& ref) const {
  return is_remote(ref) ? ref : (options_.image_base / ref).lexically_normal().string();
}

}  // namespace dmgwatch::monitor
