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

#include <algorithm>
#include <cmath>
#include <string>

#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/random.hpp"
#include "dmgwatch/vision/tensor.hpp"

namespace dmgwatch::vision {

InputTensor::InputTensor(int side, std::vector<float> chw) : side_(side), values_(std::move(chw)) {
  if (side < 1 || values_.size() != static_cast<std::size_t>(side) * side * 3) {
    throw Error(ErrorCode::shape_mismatch,
                "input tensor must be " + std::to_string(side) + "x" + std::to_string(side) + "x3");
  }
  for (float v : values_) {
    if (!(v >= 0.0f && v <= 1.0f)) throw Error(ErrorCode::numeric, "input tensor values must lie in [0, 1]");
  }
}

InputTensor resize_normalize(const Image& image, int side) {
  if (image.empty()) throw Error(ErrorCode::decode, "cannot preprocess an empty image");
  const FloatImage resized = resize_bilinear(to_rgb(image), side, side);
  std::vector<float> chw(static_cast<std::size_t>(side) * side * 3);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const float v = resized.at(x, y, c) / 255.0f;
        chw[(static_cast<std::size_t>(c) * side + y) * side + x] = std::clamp(v, 0.0f, 1.0f);
      }
    }
  }
  return InputTensor(side, std::move(chw));
}

namespace {

double reduce_angle(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r <= -180.0) r += 360.0;
  if (r > 180.0) r -= 360.0;
  return r;
}

}  // namespace

bool AugmentParams::is_identity() const {
  return shift_x == 0.0 && shift_y == 0.0 && reduce_angle(rotate_deg) == 0.0 && contrast == 1.0 && brightness == 1.0;
}

void validate(const AugmentParams& p) {
  auto check = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::invalid_argument, std::string("augment parameter out of range: ") + what, what);
  };
  check(std::abs(p.shift_x) <= 0.2, "shift_x");
  check(std::abs(p.shift_y) <= 0.2, "shift_y");
  check(std::isfinite(p.rotate_deg) && std::abs(reduce_angle(p.rotate_deg)) <= 30.0, "rotate_deg");
  check(p.contrast >= 0.5 && p.contrast <= 1.5, "contrast");
  check(p.brightness >= 0.5 && p.brightness <= 1.5, "brightness");
}

Image augment(const Image& image, const AugmentParams& p) {
  validate(p);
  if (image.empty()) throw Error(ErrorCode::invalid_argument, "cannot augment an empty image");

  Image out = image;
  const double theta = reduce_angle(p.rotate_deg) * M_PI / 180.0;
  const double dx = p.shift_x * image.width;
  const double dy = p.shift_y * image.height;
  if (theta != 0.0 || dx != 0.0 || dy != 0.0) {
    const double cx = (image.width - 1) / 2.0;
    const double cy = (image.height - 1) / 2.0;
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        // Inverse map: undo the shift, then rotate back about the centre.
        const double ux = x - dx - cx;
        const double uy = y - dy - cy;
        const double sx = cos_t * ux + sin_t * uy + cx;
        const double sy = -sin_t * ux + cos_t * uy + cy;
        for (int c = 0; c < image.channels; ++c) {
          out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(sample_bilinear(image, sx, sy, c)), 0L, 255L));
        }
      }
    }
  }

  if (p.contrast != 1.0 || p.brightness != 1.0) {
    std::vector<double> mean(out.channels, 0.0);
    const std::size_t pixels = static_cast<std::size_t>(out.width) * out.height;
    for (std::size_t i = 0; i < pixels; ++i) {
      for (int c = 0; c < out.channels; ++c) mean[c] += out.pixels[i * out.channels + c];
    }
    for (auto& m : mean) m /= static_cast<double>(pixels);
    for (std::size_t i = 0; i < pixels; ++i) {
      for (int c = 0; c < out.channels; ++c) {
        auto& v = out.pixels[i * out.channels + c];
        const double adjusted = (mean[c] + p.contrast * (v - mean[c])) * p.brightness;
        v = static_cast<std::uint8_t>(std::clamp(std::lround(adjusted), 0L, 255L));
      }
    }
  }
  return out;
}

AugmentParams sample_augment(std::uint64_t seed, const AugmentRanges& r) {
  Rng rng(seed);
  AugmentParams p;
  p.shift_x = rng.uniform(-r.shift, r.shift);
  p.shift_y = rng.uniform(-r.shift, r.shift);
  p.rotate_deg = rng.uniform(-r.rotate_deg, r.rotate_deg);
  p.contrast = rng.uniform(1.0 - r.contrast, 1.0 + r.contrast);
  p.brightness = rng.uniform(1.0 - r.brightness, 1.0 + r.brightness);
  validate(p);
  return p;
}

}  // namespace dmgwatch::vision
