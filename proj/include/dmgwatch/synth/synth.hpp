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
#include <filesystem>
#include <string>
#include <vector>

#include "dmgwatch/core/image.hpp"
#include "dmgwatch/corpus/types.hpp"

namespace dmgwatch::synth {

/// Street-level scene: sky, ground and either intact buildings (straight
/// edges, regular window grids) or collapse debris (fragment clutter, broken
/// outlines, cracks, dust).
Image make_scene(bool damaged, int width, int height, std::uint64_t seed);

inline constexpr int kTextureClasses = 10;

/// Procedural texture of class 0..9 (stripes at four orientations, checkers,
/// dots, block mosaics, polygon clutter, crack lines, smooth blobs). Used as
/// the source task for backbone pretraining.
Image make_texture(int texture_class, int side, std::uint64_t seed);

/// Pan (offset crop) and zoom of `image`, resized back to its own size.
Image pan_zoom(const Image& image, double zoom, double pan_x, double pan_y);

struct LabeledImage {
  std::string image_id;
  std::filesystem::path path;
  corpus::LabelValue label;
};

/// Writes `per_class` damage and `per_class` non-damage scenes as PNG under
/// `dir` and returns them in generation order.
std::vector<LabeledImage> write_scene_set(const std::filesystem::path& dir, int per_class, int side,
                                          std::uint64_t seed);

/// Ground truth for the deduplication fixture.
struct DedupFixture {
  std::vector<corpus::ImageRecord> records;
  std::vector<std::string> unique_ids;
  std::vector<std::string> exact_copies;
  std::vector<std::string> undersized;
  std::vector<std::string> near_copies;
  std::filesystem::path manifest;  // image_id,url,label over every file
};

/// 60 images: 40 distinct scenes, 10 byte-identical copies, 5 images below
/// 150 px, and 5 pan/zoom re-encodes (zoom 1.05-1.15, JPEG quality 88) of
/// scenes 10-14.
DedupFixture write_dedup_fixture(const std::filesystem::path& dir, std::uint64_t seed);

struct FeedFixture {
  std::filesystem::path feed;  // JSON-lines FeedItems
  std::size_t posts = 0;
  std::size_t raw_images = 0;
  std::size_t planted_duplicates = 0;
  std::size_t unique_images = 0;
};

/// Event-shaped replay feed: `unique` distinct images, `duplicates` extra
/// references to already-posted images (a mix of byte-identical reposts and
/// pan/zoom re-encodes), plus posts that fail the keyword or image filters.
/// Encoded uniques are more than 16 signature bits apart and each re-encode is
/// within 16 bits of its source only, so the deduplicated count is exact.
FeedFixture write_feed_fixture(const std::filesystem::path& dir, std::size_t unique, std::size_t duplicates,
                               std::uint64_t seed, int side = 160);

/// Labels and damage probabilities whose confusion at threshold 0.5 is
/// exactly (tp, fn, fp, tn). Scores spread over (0, 1) so sweeps are non-trivial.
struct ScoredLabel {
  std::string image_id;
  int label;  // 1 = damage
  double p_damage;
};
std::vector<ScoredLabel> make_scored_fixture(std::size_t tp, std::size_t fn, std::size_t fp, std::size_t tn,
                                             std::uint64_t seed);

}  // namespace dmgwatch::synth
