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

#include <deque>
#include <optional>
#include <string>
#include <unordered_map>

#include "dmgwatch/core/digest.hpp"
#include "dmgwatch/core/time.hpp"
#include "dmgwatch/dedup/dedup.hpp"
#include "dmgwatch/monitor/types.hpp"

namespace dmgwatch::monitor {

enum class SuppressReason { exact, near };
std::string_view to_string(SuppressReason r);

struct DedupDecision {
  bool keep = true;
  std::optional<SuppressReason> reason;
  std::optional<std::string> matched_image_id;  // the kept image this one duplicates
};

/// Rolling duplicate filter for a live stream. Exact digests of kept images
/// are remembered for the whole run; near-duplicate signatures only within
/// the window. State changes only when an image is kept.
class StreamDedup {
 public:
  StreamDedup(DedupWindow window, bool near_enabled, double near_threshold);

  DedupDecision decide(const std::string& image_id, const Digest128& digest,
                       const std::optional<dedup::PerceptualSignature>& signature, Timestamp at);

  std::size_t kept() const noexcept { return exact_.size(); }

 private:
  struct Entry {
    std::string image_id;
    dedup::PerceptualSignature signature;
    Timestamp at;
  };
  void expire(Timestamp now);

  DedupWindow window_;
  bool near_enabled_;
  double near_threshold_;
  std::unordered_map<Digest128, std::string, Digest128Hash> exact_;
  std::deque<Entry> recent_;
};

}  // namespace dmgwatch::monitor
