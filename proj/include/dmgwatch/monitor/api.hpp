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

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "dmgwatch/core/time.hpp"
#include "dmgwatch/monitor/store.hpp"

namespace dmgwatch::monitor {

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

using QueryParams = std::map<std::string, std::string>;

/// Transport-free queue/label API over an ItemStore.
///
///   GET  /api/queue?state=&min_p_damage=&since=&page=&page_size=
///   GET  /api/items/{image_id}
///   GET  /api/items/{image_id}/heatmap?class=damage|non_damage   (PNG)
///   POST /api/items/{image_id}/review   {verdict, label?, reviewer}
///   GET  /api/export?since=                                       (manifest CSV)
///
/// Empty query values count as absent. Errors are JSON {error, message}
/// with 400 for bad input, 404 for unknown items or routes and 409 for
/// review conflicts.
class ApiHandler {
 public:
  explicit ApiHandler(ItemStore& store, Clock clock = now_utc);

  ApiResponse handle(const std::string& method, const std::string& path, const QueryParams& query,
                     const std::string& body) const;

 private:
  ApiResponse queue(const QueryParams& query) const;
  ApiResponse item(const std::string& id) const;
  ApiResponse heatmap(const std::string& id, const QueryParams& query) const;
  ApiResponse review(const std::string& id, const std::string& body) const;
  ApiResponse export_csv(const QueryParams& query) const;

  ItemStore& store_;
  Clock clock_;
};

/// HTTP front end for ApiHandler. Optionally serves a static bundle (the
/// review UI) from `static_dir` at "/".
class ApiServer {
 public:
  ApiServer(ItemStore& store, Clock clock = now_utc, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds `host:port` (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void listen();
  /// bind + listen on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dmgwatch::monitor
