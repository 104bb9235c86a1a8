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
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>

#include <nlohmann/json.hpp>

#include "dmgwatch/core/time.hpp"
#include "dmgwatch/monitor/adapters.hpp"
#include "dmgwatch/monitor/store.hpp"
#include "dmgwatch/monitor/types.hpp"
#include "dmgwatch/vision/model.hpp"

namespace dmgwatch::monitor {

/// Blocking FIFO with a fixed capacity. push() waits while full and reports
/// whether it had to; pop() returns nullopt once closed and drained.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  bool push(T value) {
    std::unique_lock lock(mutex_);
    const bool waited = items_.size() >= capacity_;
    not_full_.wait(lock, [&] { return items_.size() < capacity_; });
    items_.push_back(std::move(value));
    not_empty_.notify_one();
    return waited;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T value = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return value;
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return items_.size();
  }
  std::size_t capacity() const noexcept { return capacity_; }

 private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<T> items_;
  bool closed_ = false;
};

struct MonitorSummary {
  std::size_t posts_seen = 0;
  std::size_t posts_off_keyword = 0;
  std::size_t posts_without_images = 0;
  std::size_t images_seen = 0;
  std::size_t classified = 0;  // stored items, failed ones included
  std::size_t failed = 0;
  std::size_t suppressed_exact = 0;
  std::size_t suppressed_near = 0;
  std::size_t reconnects = 0;
  std::size_t overflow_events = 0;

  nlohmann::json to_json() const;
};

struct MonitorOptions {
  Clock clock;  // processed_at; defaults to now_utc
  std::function<void(std::chrono::milliseconds)> sleep;  // reconnect backoff
  std::function<void(const ClassifiedItem&)> on_item;  // called in sequence order
  std::function<void(const FeedItem&)> on_post;  // called for every post read, before filtering
};

/// keyword filter -> image fetch -> stream dedup -> classify -> (explain)
/// -> persist. Intake, dedup and store writes run on the calling thread and
/// one writer thread; classification runs on `config.workers` threads fed
/// through a queue of `config.queue_capacity`. Items are persisted in intake
/// order. A disconnect reconnects from the last consumed cursor with the
/// configured backoff; exhausting max_attempts throws Error(fetch).
MonitorSummary run_monitor(FeedAdapter& adapter, const MonitorConfig& config, const vision::ConvClassifier& model,
                           ItemStore& store, const MonitorOptions& options = {});

}  // namespace dmgwatch::monitor
