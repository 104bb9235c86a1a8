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

#include "dmgwatch/core/io.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "dmgwatch/core/error.hpp"

namespace dmgwatch {

namespace fs = std::filesystem;

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string(), path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string(), path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string(), path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io, "short write to " + path.string(), path.string());
}

void write_text(const fs::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Image decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw Error(ErrorCode::decode, "empty image payload");
  cv::Mat raw;
  try {
    const cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8U,
                         const_cast<std::uint8_t*>(bytes.data()));
    raw = cv::imdecode(buffer, cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::decode, std::string("image decode failed: ") + e.what());
  }
  if (raw.empty()) throw Error(ErrorCode::decode, "payload is not a decodable image");

  if (raw.depth() != CV_8U) {
    cv::Mat scaled;
    const double scale = raw.depth() == CV_16U ? 1.0 / 257.0 : 1.0;
    raw.convertTo(scaled, CV_8U, scale);
    raw = scaled;
  }
  cv::Mat converted;
  int channels = 3;
  switch (raw.channels()) {
    case 1:
      converted = raw;
      channels = 1;
      break;
    case 3:
      cv::cvtColor(raw, converted, cv::COLOR_BGR2RGB);
      break;
    case 4:
      cv::cvtColor(raw, converted, cv::COLOR_BGRA2RGB);
      break;
    default:
      throw Error(ErrorCode::decode, "unsupported channel count");
  }
  Image out(converted.cols, converted.rows, channels);
  for (int y = 0; y < converted.rows; ++y) {
    const auto* row = converted.ptr<std::uint8_t>(y);
    std::copy(row, row + static_cast<std::size_t>(converted.cols) * channels,
              &out.pixels[static_cast<std::size_t>(y) * converted.cols * channels]);
  }
  return out;
}

Image read_image(const fs::path& path) {
  try {
    return decode_image(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), e.what() + std::string(" (") + path.string() + ")", path.string());
  }
}

namespace {

cv::Mat to_mat_bgr(const Image& image) {
  cv::Mat view(image.height, image.width, image.channels == 1 ? CV_8UC1 : CV_8UC3,
               const_cast<std::uint8_t*>(image.pixels.data()));
  if (image.channels == 1) return view.clone();
  cv::Mat bgr;
  cv::cvtColor(view, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

Bytes encode(const Image& image, const std::string& ext, const std::vector<int>& params) {
  if (image.empty()) throw Error(ErrorCode::invalid_argument, "cannot encode an empty image");
  std::vector<std::uint8_t> out;
  if (!cv::imencode(ext, to_mat_bgr(image), out, params)) {
    throw Error(ErrorCode::io, "image encoding failed for " + ext);
  }
  return out;
}

}  // namespace

Bytes encode_png(const Image& image) {
  return encode(image, ".png", {cv::IMWRITE_PNG_COMPRESSION, 6});
}

Bytes encode_jpeg(const Image& image, int quality) {
  return encode(image, ".jpg", {cv::IMWRITE_JPEG_QUALITY, quality});
}

std::string sniff_image_extension(std::span<const std::uint8_t> b) {
  auto starts = [&](std::initializer_list<int> sig) {
    if (b.size() < sig.size()) return false;
    std::size_t i = 0;
    for (int v : sig) {
      if (b[i++] != static_cast<std::uint8_t>(v)) return false;
    }
    return true;
  };
  if (starts({0x89, 'P', 'N', 'G'})) return ".png";
  if (starts({0xFF, 0xD8, 0xFF})) return ".jpg";
  if (starts({'G', 'I', 'F', '8'})) return ".gif";
  if (starts({'B', 'M'})) return ".bmp";
  if (b.size() >= 12 && starts({'R', 'I', 'F', 'F'}) && b[8] == 'W' && b[9] == 'E' && b[10] == 'B' && b[11] == 'P') {
    return ".webp";
  }
  return "";
}

void append_json_line(const fs::path& path, const nlohmann::json& value) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::io, "cannot append to " + path.string(), path.string());
  out << value.dump() << '\n';
  out.flush();
}

std::vector<nlohmann::json> read_json_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string(), path.string());
  std::vector<nlohmann::json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::parse,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what(),
                  std::to_string(line_no));
    }
  }
  return rows;
}

}  // namespace dmgwatch
