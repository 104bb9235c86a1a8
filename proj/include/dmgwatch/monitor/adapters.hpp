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
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/http.hpp"
#include "dmgwatch/core/io.hpp"
#include "dmgwatch/monitor/types.hpp"

namespace dmgwatch::monitor {

/// Raised by an adapter when its connection drops. The pipeline reconnects
/// from the last cursor it consumed.
class Disconnected : public Error {
 public:
  explicit Disconnected(const std::string& message) : Error(ErrorCode::fetch, message) {}
};

/// Feed source contract. `cursor()` identifies the position after the last
/// item returned by next(); connect(cursor) resumes exactly there.
class FeedAdapter {
 public:
  virtual ~FeedAdapter() = default;
  virtual void connect(const std::optional<std::string>& cursor) = 0;
  /// Next item, or nullopt once the feed is exhausted. Throws Disconnected.
  virtual std::optional<FeedItem> next() = 0;
  virtual std::string cursor() const = 0;
  /// Bytes behind an image reference carried by an item.
  virtual Bytes load_image(const std::string& ref) const = 0;
  /// Stable, human-readable location of an image reference.
  virtual std::string resolve(const std::string& ref) const = 0;
};

/// JSON-lines replay of FeedItems; image refs are paths relative to the
/// fixture's directory. `drop_at` lists line indices before which the
/// connection fails once (fault injection for reconnect tests).
class ReplayAdapter : public FeedAdapter {
 public:
  explicit ReplayAdapter(const std::filesystem::path& fixture, std::set<std::size_t> drop_at = {});

  void connect(const std::optional<std::string>& cursor) override;
  std::optional<FeedItem> next() override;
  std::string cursor() const override { return std::to_string(position_); }
  Bytes load_image(const std::string& ref) const override;
  std::string resolve(const std::string& ref) const override;

  std::size_t connects() const noexcept { return connects_; }
  std::size_t size() const noexcept { return items_.size(); }

 private:
  std::filesystem::path base_;
  std::vector<FeedItem> items_;
  std::set<std::size_t> drop_at_;
  std::size_t position_ = 0;
  bool connected_ = false;
  std::size_t connects_ = 0;
};

/// Polls `endpoint?cursor=<c>` expecting {"items": [FeedItem...], "cursor": c'}.
/// An empty page waits `poll_interval` before asking again; after
/// `idle_polls_before_end` empty pages in a row the feed counts as exhausted
/// (0 = never). Image refs are URLs, or paths relative to `image_base`.
class HttpPollingAdapter : public FeedAdapter {
 public:
  using Getter = std::function<HttpResponse(const std::string& url)>;
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  struct Options {
    std::string endpoint;
    std::chrono::milliseconds poll_interval{5000};
    int idle_polls_before_end = 0;
    std::filesystem::path image_base;
    Getter get;  // defaults to http_get
    Sleeper sleep;  // defaults to std::this_thread::sleep_for
  };

  explicit HttpPollingAdapter(Options options);

  void connect(const std::optional<std::string>& cursor) override;
  std::optional<FeedItem> next() override;
  std::string cursor() const override { return cursor_; }
  Bytes load_image(const std::string& ref) const override;
  std::string resolve(const std::string& ref) const override;

 private:
  Options options_;
  std::string cursor_;
  std::string page_cursor_;
  std::string next_page_cursor_;
  std::vector<FeedItem> page_;
  std::size_t page_pos_ = 0;
  int idle_ = 0;
};

}  // namespace dmgwatch::monitor
