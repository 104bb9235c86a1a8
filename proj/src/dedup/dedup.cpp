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

#include "dmgwatch/dedup/dedup.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <numeric>
#include <unordered_map>

#include <opencv2/imgproc.hpp>

#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/io.hpp"

namespace dmgwatch::dedup {

using corpus::ImageRecord;

Digest128 exact_digest(std::span<const std::uint8_t> bytes) { return md5(bytes); }

PerceptualSignature near_signature(const Image& image) {
  if (image.empty()) throw Error(ErrorCode::decode, "cannot sign an empty image");
  Image gray = to_gray(image);
  cv::Mat luma;
  cv::Mat(gray.height, gray.width, CV_8UC1, gray.pixels.data()).convertTo(luma, CV_32F);
  cv::GaussianBlur(luma, luma, {0, 0}, kSignatureBlur * std::min(gray.width, gray.height));
  cv::Mat cells;
  cv::resize(luma, cells, {9, 8}, 0, 0, cv::INTER_AREA);
  std::uint64_t bits = 0;
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      bits <<= 1;
      if (cells.at<float>(y, x) > cells.at<float>(y, x + 1)) bits |= 1u;
    }
  }
  return {bits, std::string(kDifferenceHashTag)};
}

int hamming_distance(const PerceptualSignature& a, const PerceptualSignature& b) {
  if (a.algorithm_tag != b.algorithm_tag) {
    throw Error(ErrorCode::invalid_argument, "signatures come from different algorithms");
  }
  return std::popcount(a.bits ^ b.bits);
}

double similarity(const PerceptualSignature& a, const PerceptualSignature& b) {
  return 1.0 - hamming_distance(a, b) / 64.0;
}

double chance_corrected_similarity(const PerceptualSignature& a, const PerceptualSignature& b) {
  return std::max(0.0, 2.0 * similarity(a, b) - 1.0);
}

bool earlier(const ImageRecord& a, const ImageRecord& b) {
  if (a.fetched_at != b.fetched_at) return a.fetched_at < b.fetched_at;
  return a.image_id < b.image_id;
}

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

// Groups indices by root and reports each group in representative order.
template <typename Records>
std::vector<std::vector<std::size_t>> groups_of(DisjointSets& sets, const Records& records,
                                                const std::function<const ImageRecord&(std::size_t)>& at) {
  std::map<std::size_t, std::vector<std::size_t>> by_root;
  for (std::size_t i = 0; i < records.size(); ++i) by_root[sets.find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> groups;
  for (auto& [root, members] : by_root) {
    std::sort(members.begin(), members.end(),
              [&](std::size_t a, std::size_t b) { return earlier(at(a), at(b)); });
    groups.push_back(std::move(members));
  }
  std::sort(groups.begin(), groups.end(), [&](const auto& a, const auto& b) {
    return at(a.front()).image_id < at(b.front()).image_id;
  });
  return groups;
}

}  // namespace

std::vector<DuplicateCluster> cluster_near_duplicates(const std::vector<SignedRecord>& records, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "near-duplicate threshold must lie in [0, 1]");
  }
  DisjointSets sets(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t j = i + 1; j < records.size(); ++j) {
      if (chance_corrected_similarity(records[i].signature, records[j].signature) >= threshold) sets.unite(i, j);
    }
  }
  const auto groups = groups_of(sets, records, [&](std::size_t i) -> const ImageRecord& { return records[i].record; });
  std::vector<DuplicateCluster> clusters;
  for (const auto& group : groups) {
    DuplicateCluster c;
    c.representative = records[group.front()].record.image_id;
    bool all_exact = true;
    for (auto i : group) {
      c.members.push_back(records[i].record.image_id);
      all_exact = all_exact && records[i].record.content_digest == records[group.front()].record.content_digest;
    }
    std::sort(c.members.begin(), c.members.end());
    c.basis = all_exact ? DuplicateBasis::exact : DuplicateBasis::near;
    clusters.push_back(std::move(c));
  }
  return clusters;
}

std::string_view to_string(RemovalRule rule) {
  switch (rule) {
    case RemovalRule::unique_url: return "unique_url";
    case RemovalRule::exact: return "exact";
    case RemovalRule::min_size: return "min_size";
    case RemovalRule::near: return "near";
  }
  return "exact";
}

RemovalRule parse_removal_rule(std::string_view text) {
  for (auto r : {RemovalRule::unique_url, RemovalRule::exact, RemovalRule::min_size, RemovalRule::near}) {
    if (to_string(r) == text) return r;
  }
  throw Error(ErrorCode::parse, "unknown removal rule '" + std::string(text) + "'");
}

nlohmann::json to_json(const Removal& removal) {
  nlohmann::json j = {{"image_id", removal.image_id}, {"rule", to_string(removal.rule)}};
  if (removal.cluster_rep) j["cluster_rep"] = *removal.cluster_rep;
  return j;
}

namespace {

// Keeps the earliest record per key; the rest are removed under `rule`.
template <typename KeyFn>
std::vector<ImageRecord> keep_first_by(std::vector<ImageRecord> records, KeyFn key, RemovalRule rule,
                                       std::vector<Removal>& removed) {
  std::sort(records.begin(), records.end(), earlier);
  std::unordered_map<std::string, std::string> owner;
  std::vector<ImageRecord> kept;
  for (auto& r : records) {
    const std::optional<std::string> k = key(r);
    if (!k) {
      kept.push_back(std::move(r));
      continue;
    }
    auto [it, fresh] = owner.emplace(*k, r.image_id);
    if (fresh) kept.push_back(std::move(r));
    else removed.push_back({r.image_id, rule, it->second});
  }
  return kept;
}

PerceptualSignature signature_from_disk(const ImageRecord& record) {
  return near_signature(read_image(record.local_ref));
}

}  // namespace

DedupResult dedupe_corpus(const std::vector<ImageRecord>& records, const DedupOptions& options) {
  DedupResult result;
  auto stage = keep_first_by(
      records, [](const ImageRecord& r) { return r.url; }, RemovalRule::unique_url, result.removed);
  stage = keep_first_by(
      std::move(stage), [](const ImageRecord& r) { return std::optional(r.content_digest.hex()); },
      RemovalRule::exact, result.removed);

  std::vector<ImageRecord> sized;
  for (auto& r : stage) {
    if (r.width >= options.min_px && r.height >= options.min_px) sized.push_back(std::move(r));
    else result.removed.push_back({r.image_id, RemovalRule::min_size, std::nullopt});
  }

  const SignatureProvider sign = options.signature_of ? options.signature_of : SignatureProvider(signature_from_disk);
  std::vector<SignedRecord> signed_records;
  signed_records.reserve(sized.size());
  for (auto& r : sized) {
    auto sig = sign(r);
    signed_records.push_back({std::move(r), std::move(sig)});
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < signed_records.size(); ++i) index[signed_records[i].record.image_id] = i;
  for (const auto& cluster : cluster_near_duplicates(signed_records, options.near_threshold)) {
    for (const auto& id : cluster.members) {
      if (id == cluster.representative) result.kept.push_back(signed_records[index.at(id)].record);
      else result.removed.push_back({id, RemovalRule::near, cluster.representative});
    }
  }
  std::sort(result.kept.begin(), result.kept.end(), earlier);
  return result;
}

}  // namespace dmgwatch::dedup
