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

#include "dmgwatch/monitor/stream_dedup.hpp"

#include "dmgwatch/core/error.hpp"

namespace dmgwatch::monitor {

std::string_view to_string(SuppressReason r) { return r == SuppressReason::exact ? "exact" : "near"; }

StreamDedup::StreamDedup(DedupWindow window, bool near_enabled, double near_threshold)
    : window_(window), near_enabled_(near_enabled), near_threshold_(near_threshold) {
  if (!(near_threshold >= 0.0 && near_threshold <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "near-duplicate threshold must lie in [0, 1]");
  }
  if (window_.kind == DedupWindow::Kind::count && window_.count == 0) {
    throw Error(ErrorCode::invalid_argument, "count window must hold at least one image");
  }
}

void StreamDedup::expire(Timestamp now) {
  switch (window_.kind) {
    case DedupWindow::Kind::whole_run:
      break;
    case DedupWindow::Kind::count:
      while (recent_.size() > window_.count) recent_.pop_front();
      break;
    case DedupWindow::Kind::duration:
      while (!recent_.empty() && now - recent_.front().at > window_.duration) recent_.pop_front();
      break;
  }
}

DedupDecision StreamDedup::decide(const std::string& image_id, const Digest128& digest,
                                  const std::optional<dedup::PerceptualSignature>& signature, Timestamp at) {
  if (const auto it = exact_.find(digest); it != exact_.end()) {
    return {false, SuppressReason::exact, it->second};
  }
  if (near_enabled_ && signature) {
    expire(at);
    // Newest first, so the match reported is the most recent similar image.
    for (auto it = recent_.rbegin(); it != recent_.rend(); ++it) {
      if (dedup::chance_corrected_similarity(*signature, it->signature) >= near_threshold_) {
        return {false, SuppressReason::near, it->image_id};
      }
    }
  }
  exact_.emplace(digest, image_id);
  if (signature) {
    recent_.push_back({image_id, *signature, at});
    if (window_.kind == DedupWindow::Kind::count) expire(at);
  }
  return {true, std::nullopt, std::nullopt};
}

}  // namespace dmgwatch::monitor
