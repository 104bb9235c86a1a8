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

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmgwatch/core/digest.hpp"
#include "dmgwatch/core/image.hpp"
#include "dmgwatch/corpus/types.hpp"

namespace dmgwatch::dedup {

/// MD5 of the raw encoded bytes; sees bytes, not pixels.
Digest128 exact_digest(std::span<const std::uint8_t> bytes);

struct PerceptualSignature {
  std::uint64_t bits = 0;
  std::string algorithm_tag;

  friend bool operator==(const PerceptualSignature&, const PerceptualSignature&) = default;
};

inline constexpr std::string_view kDifferenceHashTag = "dhash64";

/// Gaussian sigma applied before the signature's downscale, as a fraction of
/// the shorter image side.
inline constexpr double kSignatureBlur = 0.02;

/// 64-bit difference hash: luma is blurred, box-filtered down to 9x8, and each
/// bit records whether a cell is brighter than its right-hand neighbour.
PerceptualSignature near_signature(const Image& image);

int hamming_distance(const PerceptualSignature& a, const PerceptualSignature& b);

/// Fraction of agreeing bits, 1 - hamming/64. Unrelated images score ~0.5.
double similarity(const PerceptualSignature& a, const PerceptualSignature& b);

/// Agreement above chance, rescaled so that 0 means "no more alike than two
/// unrelated images" and 1 means identical: max(0, 2 * similarity - 1).
/// Clustering thresholds are expressed on this scale.
double chance_corrected_similarity(const PerceptualSignature& a, const PerceptualSignature& b);

enum class DuplicateBasis { exact, near };

struct DuplicateCluster {
  std::string representative;
  std::vector<std::string> members;  // sorted, includes the representative
  DuplicateBasis basis = DuplicateBasis::near;
};

struct SignedRecord {
  corpus::ImageRecord record;
  PerceptualSignature signature;
};

/// Transitive closure of pairs whose chance-corrected similarity is at least
/// `threshold`. Each cluster keeps its earliest-fetched member (ties broken by
/// image_id) as representative. Clusters are returned ordered by representative.
std::vector<DuplicateCluster> cluster_near_duplicates(const std::vector<SignedRecord>& records,
                                                      double threshold = 0.5);

enum class RemovalRule { unique_url, exact, min_size, near };

std::string_view to_string(RemovalRule rule);
RemovalRule parse_removal_rule(std::string_view text);

struct Removal {
  std::string image_id;
  RemovalRule rule = RemovalRule::exact;
  std::optional<std::string> cluster_rep;

  friend bool operator==(const Removal&, const Removal&) = default;
};

nlohmann::json to_json(const Removal& removal);

using SignatureProvider = std::function<PerceptualSignature(const corpus::ImageRecord&)>;

struct DedupOptions {
  int min_px = 150;
  double near_threshold = 0.5;
  /// Defaults to decoding `local_ref` and hashing its pixels.
  SignatureProvider signature_of;
};

struct DedupResult {
  std::vector<corpus::ImageRecord> kept;
  std::vector<Removal> removed;
};

/// Applies, in order: unique URL, exact digest, minimum size, near-duplicate
/// clustering. Every input record ends up in exactly one of kept/removed, and
/// each removal names the rule that fired.
DedupResult dedupe_corpus(const std::vector<corpus::ImageRecord>& records, const DedupOptions& options = {});

/// Orders records by (fetched_at, image_id); the first of a group is retained.
bool earlier(const corpus::ImageRecord& a, const corpus::ImageRecord& b);

}  // namespace dmgwatch::dedup
