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

namespace dmgwatch {

/// 8-bit interleaved raster. Channel count is 1 (gray) or 3 (RGB).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0);

  bool empty() const noexcept { return pixels.empty(); }

  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Single-precision planar image used for intermediate resampling.
struct FloatImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> values;  // interleaved, same layout as Image

  float at(int x, int y, int c) const {
    return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

Image to_rgb(const Image& image);
Image to_gray(const Image& image);

/// Bilinear resampling with pixel-center alignment; edge pixels are clamped.
FloatImage resize_bilinear(const Image& image, int width, int height);

/// Box-filter downsampling (each output pixel averages its source footprint).
FloatImage resize_area(const Image& image, int width, int height);

/// Samples channel `c` at fractional source coordinates with edge clamping.
float sample_bilinear(const Image& image, double x, double y, int c);

Image crop(const Image& image, int x, int y, int width, int height);
Image to_image(const FloatImage& image);

}  // namespace dmgwatch
