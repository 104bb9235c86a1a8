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
#include <vector>

#include "dmgwatch/core/image.hpp"

namespace dmgwatch::vision {

inline constexpr int kInputSide = 150;

/// side x side x 3 values in [0, 1]. Stored channel-major (CHW) so a tensor
/// drops straight into a batch.
class InputTensor {
 public:
  InputTensor() = default;
  /// Validates shape and range; throws Error(shape_mismatch / numeric).
  InputTensor(int side, std::vector<float> chw);

  int side() const noexcept { return side_; }
  float at(int y, int x, int c) const { return values_[(static_cast<std::size_t>(c) * side_ + y) * side_ + x]; }
  const std::vector<float>& values() const noexcept { return values_; }

  friend bool operator==(const InputTensor&, const InputTensor&) = default;

 private:
  int side_ = 0;
  std::vector<float> values_;
};

struct ClassProbabilities {
  double p_non_damage = 0.5;
  double p_damage = 0.5;

  friend bool operator==(const ClassProbabilities&, const ClassProbabilities&) = default;
};

/// Bilinear resize to side x side, values / 255, gray replicated to RGB.
InputTensor resize_normalize(const Image& image, int side = kInputSide);

struct AugmentParams {
  double shift_x = 0.0;  // fraction of width, |.| <= 0.2
  double shift_y = 0.0;  // fraction of height, |.| <= 0.2
  double rotate_deg = 0.0;  // reduced to (-180, 180], then |.| <= 30
  double contrast = 1.0;  // [0.5, 1.5], about the image mean
  double brightness = 1.0;  // [0.5, 1.5], multiplicative

  bool is_identity() const;
};

void validate(const AugmentParams& params);

/// Affine shift/rotate about the centre with nearest-edge fill, then
/// contrast and brightness, clipped to [0, 255]. Output has the input's size.
Image augment(const Image& image, const AugmentParams& params);

/// Draws parameters uniformly from the given half-ranges.
struct AugmentRanges {
  double shift = 0.1;
  double rotate_deg = 15.0;
  double contrast = 0.2;
  double brightness = 0.2;
};
AugmentParams sample_augment(std::uint64_t seed, const AugmentRanges& ranges = {});

}  // namespace dmgwatch::vision
