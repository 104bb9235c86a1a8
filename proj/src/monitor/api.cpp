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

#include "dmgwatch/monitor/api.hpp"

#include <charconv>
#include <thread>

#include <httplib.h>

#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/io.hpp"
#include "dmgwatch/corpus/manifest.hpp"

namespace dmgwatch::monitor {

using nlohmann::json;

namespace {

ApiResponse json_response(int status, const json& j) { return {status, "application/json", j.dump()}; }

ApiResponse error_response(int status, std::string_view code, const std::string& message) {
  return json_response(status, {{"error", code}, {"message", message}});
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::parse: return 400;
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict: return 409;
    default: return 500;
  }
}

std::optional<std::string> param(const QueryParams& q, const std::string& key) {
  const auto it = q.find(key);
  if (it == q.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

std::size_t parse_count(const std::string& key, const std::string& text) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || v == 0) {
    throw Error(ErrorCode::invalid_argument, key + " must be a positive integer");
  }
  return v;
}

double parse_probability(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !(v >= 0.0 && v <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, key + " must be a number in [0, 1]");
  }
  return v;
}

Timestamp parse_since(const std::string& text) {
  try {
    return parse_rfc3339(text);
  } catch (const Error&) {
    throw Error(ErrorCode::invalid_argument, "since must be an RFC 3339 timestamp");
  }
}

}  // namespace

ApiHandler::ApiHandler(ItemStore& store, Clock clock) : store_(store), clock_(std::move(clock)) {}

ApiResponse ApiHandler::handle(const std::string& method, const std::string& path, const QueryParams& query,
                               const std::string& body) const {
  try {
    static const std::string items_prefix = "/api/items/";
    if (path == "/api/queue") {
      if (method != "GET") return error_response(405, "method_not_allowed", "use GET");
      return queue(query);
    }
    if (path == "/api/export") {
      if (method != "GET") return error_response(405, "method_not_allowed", "use GET");
      return export_csv(query);
    }
    if (path.rfind(items_prefix, 0) == 0) {
      std::string rest = path.substr(items_prefix.size());
      std::string action;
      if (const auto slash = rest.find('/'); slash != std::string::npos) {
        action = rest.substr(slash + 1);
        rest.resize(slash);
      }
      if (rest.empty()) return error_response(404, "not_found", "no such route");
      if (action.empty()) {
        if (method != "GET") return error_response(405, "method_not_allowed", "use GET");
        return item(rest);
      }
      if (action == "heatmap") {
        if (method != "GET") return error_response(405, "method_not_allowed", "use GET");
        return heatmap(rest, query);
      }
      if (action == "review") {
        if (method != "POST") return error_response(405, "method_not_allowed", "use POST");
        return review(rest, body);
      }
    }
    return error_response(404, "not_found", "no such route");
  } catch (const Error& e) {
    return error_response(status_for(e.code()), to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

ApiResponse ApiHandler::queue(const QueryParams& query) const {
  QueueFilter filter;
  if (const auto s = param(query, "state")) {
    try {
      filter.state = parse_review_state(*s);
    } catch (const Error& e) {
      throw Error(ErrorCode::invalid_argument, e.what());
    }
  }
  if (const auto p = param(query, "min_p_damage")) filter.min_p_damage = parse_probability("min_p_damage", *p);
  if (const auto s = param(query, "since")) filter.since = parse_since(*s);
  const std::size_t page = param(query, "page") ? parse_count("page", *param(query, "page")) : 1;
  const std::size_t size = param(query, "page_size") ? parse_count("page_size", *param(query, "page_size")) : 50;
  return json_response(200, to_json(store_.query(filter, page, size)));
}

ApiResponse ApiHandler::item(const std::string& id) const {
  const auto found = store_.get(id);
  if (!found) return error_response(404, "not_found", "no such item: " + id);
  return json_response(200, to_json(*found));
}

ApiResponse ApiHandler::heatmap(const std::string& id, const QueryParams& query) const {
  const std::string cls = param(query, "class").value_or("damage");
  if (cls != "damage" && cls != "non_damage") {
    return error_response(400, "invalid_argument", "class must be damage or non_damage");
  }
  if (!store_.contains(id)) return error_response(404, "not_found", "no such item: " + id);
  const auto path = store_.heatmap_path(id, cls);
  if (!path) return error_response(404, "not_found", "no " + cls + " heatmap for " + id);
  const Bytes png = read_file(*path);
  return {200, "image/png", std::string(png.begin(), png.end())};
}

ApiResponse ApiHandler::review(const std::string& id, const std::string& body) const {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    return error_response(400, "invalid_argument", "review body is not JSON");
  }
  const ReviewRequest request = review_request_from_json(j);
  const ReviewOutcome outcome = store_.submit_review(id, request, clock_());
  json out = to_json(outcome.item);
  out["changed"] = outcome.changed;
  return json_response(200, out);
}

ApiResponse ApiHandler::export_csv(const QueryParams& query) const {
  std::optional<Timestamp> since;
  if (const auto s = param(query, "since")) since = parse_since(*s);
  return {200, "text/csv", corpus::format_manifest(store_.export_corrections(since))};
}

struct ApiServer::Impl {
  ApiHandler handler;
  httplib::Server server;
  std::thread thread;

  Impl(ItemStore& store, Clock clock) : handler(store, std::move(clock)) {}
};

ApiServer::ApiServer(ItemStore& store, Clock clock, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(store, std::move(clock))) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    QueryParams query;
    for (const auto& [k, v] : req.params) query.emplace(k, v);
    const ApiResponse r = impl_->handler.handle(req.method, req.path, query, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  impl_->server.Get(R"(/api/.*)", route);
  impl_->server.Post(R"(/api/.*)", route);
  impl_->server.Put(R"(/api/.*)", route);
  impl_->server.Delete(R"(/api/.*)", route);
  if (static_dir && !impl_->server.set_mount_point("/", static_dir->string())) {
    throw Error(ErrorCode::io, "cannot serve static files from " + static_dir->string(), static_dir->string());
  }
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::io, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void ApiServer::listen() { impl_->server.listen_after_bind(); }

int ApiServer::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void ApiServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace dmgwatch::monitor
