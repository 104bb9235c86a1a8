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

#include "dmgwatch/core/image.hpp"

#include <algorithm>
#include <cmath>

#include "dmgwatch/core/error.hpp"

namespace dmgwatch {

Image::Image(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c),
      pixels(static_cast<std::size_t>(w) * h * c, fill) {
  if (w < 1 || h < 1 || (c != 1 && c != 3)) {
    throw Error(ErrorCode::invalid_argument, "image dimensions must be positive with 1 or 3 channels");
  }
}

Image to_rgb(const Image& image) {
  if (image.channels == 3) return image;
  Image out(image.width, image.height, 3);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    out.pixels[3 * i] = out.pixels[3 * i + 1] = out.pixels[3 * i + 2] = image.pixels[i];
  }
  return out;
}

Image to_gray(const Image& image) {
  if (image.channels == 1) return image;
  Image out(image.width, image.height, 1);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const double y = 0.299 * image.pixels[3 * i] + 0.587 * image.pixels[3 * i + 1] +
                     0.114 * image.pixels[3 * i + 2];
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
  }
  return out;
}

float sample_bilinear(const Image& image, double x, double y, int c) {
  x = std::clamp(x, 0.0, static_cast<double>(image.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(image.height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, image.width - 1);
  const int y1 = std::min(y0 + 1, image.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * image.at(x0, y0, c) + fx * image.at(x1, y0, c);
  const double bottom = (1.0 - fx) * image.at(x0, y1, c) + fx * image.at(x1, y1, c);
  return static_cast<float>((1.0 - fy) * top + fy * bottom);
}

FloatImage resize_bilinear(const Image& image, int width, int height) {
  if (image.empty() || width < 1 || height < 1) {
    throw Error(ErrorCode::invalid_argument, "resize of an empty image or to an empty size");
  }
  FloatImage out{width, height, image.channels,
                 std::vector<float>(static_cast<std::size_t>(width) * height * image.channels)};
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  for (int y = 0; y < height; ++y) {
    const double src_y = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < width; ++x) {
      const double src_x = (x + 0.5) * sx - 0.5;
      for (int c = 0; c < image.channels; ++c) {
        out.values[(static_cast<std::size_t>(y) * width + x) * image.channels + c] =
            sample_bilinear(image, src_x, src_y, c);
      }
    }
  }
  return out;
}

FloatImage resize_area(const Image& image, int width, int height) {
  if (image.empty() || width < 1 || height < 1) {
    throw Error(ErrorCode::invalid_argument, "resize of an empty image or to an empty size");
  }
  const int channels = image.channels;
  FloatImage out{width, height, channels,
                 std::vector<float>(static_cast<std::size_t>(width) * height * channels)};
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  std::vector<double> acc(channels);
  for (int y = 0; y < height; ++y) {
    const double y0 = y * sy, y1 = (y + 1) * sy;
    for (int x = 0; x < width; ++x) {
      const double x0 = x * sx, x1 = (x + 1) * sx;
      std::fill(acc.begin(), acc.end(), 0.0);
      double area = 0.0;
      for (int py = static_cast<int>(std::floor(y0)); py < std::min(image.height, static_cast<int>(std::ceil(y1))); ++py) {
        const double wy = std::min<double>(py + 1, y1) - std::max<double>(py, y0);
        if (wy <= 0) continue;
        for (int px = static_cast<int>(std::floor(x0)); px < std::min(image.width, static_cast<int>(std::ceil(x1))); ++px) {
          const double wx = std::min<double>(px + 1, x1) - std::max<double>(px, x0);
          if (wx <= 0) continue;
          const double w = wx * wy;
          area += w;
          for (int c = 0; c < channels; ++c) acc[c] += w * image.at(px, py, c);
        }
      }
      for (int c = 0; c < channels; ++c) {
        out.values[(static_cast<std::size_t>(y) * width + x) * channels + c] =
            static_cast<float>(acc[c] / area);
      }
    }
  }
  return out;
}

Image crop(const Image& image, int x, int y, int width, int height) {
  if (x < 0 || y < 0 || width < 1 || height < 1 || x + width > image.width ||
      y + height > image.height) {
    throw Error(ErrorCode::invalid_argument, "crop window outside image bounds");
  }
  Image out(width, height, image.channels);
  for (int row = 0; row < height; ++row) {
    const auto* src = &image.pixels[(static_cast<std::size_t>(y + row) * image.width + x) * image.channels];
    std::copy(src, src + static_cast<std::size_t>(width) * image.channels,
              &out.pixels[static_cast<std::size_t>(row) * width * image.channels]);
  }
  return out;
}

Image to_image(const FloatImage& image) {
  Image out(image.width, image.height, image.channels);
  for (std::size_t i = 0; i < image.values.size(); ++i) {
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(image.values[i]), 0L, 255L));
  }
  return out;
}

}  // namespace dmgwatch
