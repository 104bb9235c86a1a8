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

#include "dmgwatch/synth/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>

#include <opencv2/imgproc.hpp>

#include "dmgwatch/core/digest.hpp"
#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/io.hpp"
#include "dmgwatch/core/random.hpp"
#include "dmgwatch/core/time.hpp"
#include "dmgwatch/corpus/fetch.hpp"
#include "dmgwatch/corpus/manifest.hpp"
#include "dmgwatch/dedup/dedup.hpp"

namespace dmgwatch::synth {

namespace {

namespace fs = std::filesystem;

cv::Scalar jitter(Rng& rng, cv::Scalar base, double spread) {
  return {std::clamp(base[0] + rng.uniform(-spread, spread), 0.0, 255.0),
          std::clamp(base[1] + rng.uniform(-spread, spread), 0.0, 255.0),
          std::clamp(base[2] + rng.uniform(-spread, spread), 0.0, 255.0)};
}

cv::Scalar material(Rng& rng) {
  static const cv::Scalar palette[] = {{196, 190, 178}, {170, 150, 128}, {140, 120, 104}, {210, 200, 180},
                                       {120, 118, 116}, {180, 110, 90},  {160, 160, 150}, {200, 180, 150}};
  const cv::Scalar base = palette[rng.below(std::size(palette))];
  const double shade = rng.uniform(-25.0, 25.0);
  return jitter(rng, base + cv::Scalar(shade, shade, shade), 8.0);
}

cv::Scalar darker(const cv::Scalar& c, double f) { return {c[0] * f, c[1] * f, c[2] * f}; }

Image from_mat(const cv::Mat& mat) {
  Image img(mat.cols, mat.rows, 3);
  for (int y = 0; y < mat.rows; ++y) {
    std::copy_n(mat.ptr<std::uint8_t>(y), static_cast<std::size_t>(mat.cols) * 3,
                img.pixels.data() + static_cast<std::size_t>(y) * mat.cols * 3);
  }
  return img;
}

cv::Mat to_mat(const Image& image) {
  const Image rgb = to_rgb(image);
  cv::Mat mat(rgb.height, rgb.width, CV_8UC3);
  std::copy(rgb.pixels.begin(), rgb.pixels.end(), mat.data);
  return mat;
}

void add_noise(cv::Mat& mat, Rng& rng, double sigma) {
  cv::Mat noise(mat.size(), CV_16SC3);
  for (int y = 0; y < mat.rows; ++y) {
    auto* row = noise.ptr<std::int16_t>(y);
    for (int x = 0; x < mat.cols * 3; ++x) row[x] = static_cast<std::int16_t>(std::lround(rng.normal() * sigma));
  }
  cv::Mat wide;
  mat.convertTo(wide, CV_16SC3);
  wide += noise;
  wide.convertTo(mat, CV_8UC3);
}

void finish(cv::Mat& mat, Rng& rng) {
  const double gain = rng.uniform(0.75, 1.25);
  const double offset = rng.uniform(-20.0, 20.0);
  mat.convertTo(mat, CV_8UC3, gain, offset);
  add_noise(mat, rng, rng.uniform(2.0, 7.0));
  if (rng.uniform() < 0.3) cv::GaussianBlur(mat, mat, {3, 3}, 0.8);
}

int draw_backdrop(cv::Mat& mat, Rng& rng) {
  const int w = mat.cols, h = mat.rows;
  const int horizon = static_cast<int>(h * rng.uniform(0.45, 0.7));
  const cv::Scalar top = jitter(rng, {120, 160, 210}, 40.0);
  const cv::Scalar low = jitter(rng, {200, 210, 220}, 30.0);
  for (int y = 0; y < horizon; ++y) {
    const double t = static_cast<double>(y) / std::max(1, horizon - 1);
    cv::line(mat, {0, y}, {w - 1, y}, top * (1.0 - t) + low * t);
  }
  const cv::Scalar ground = jitter(rng, {110, 105, 95}, 25.0);
  cv::rectangle(mat, cv::Rect(0, horizon, w, h - horizon), ground, cv::FILLED);
  return horizon;
}

void draw_building(cv::Mat& mat, Rng& rng, cv::Rect body, const cv::Scalar& facade) {
  cv::rectangle(mat, body, facade, cv::FILLED);
  cv::rectangle(mat, body, darker(facade, 0.6), 1);
  if (rng.uniform() < 0.4) {
    std::vector<cv::Point> roof = {{body.x - 2, body.y},
                                   {body.x + body.width / 2, body.y - static_cast<int>(body.width * rng.uniform(0.15, 0.35))},
                                   {body.x + body.width + 2, body.y}};
    cv::fillConvexPoly(mat, roof, darker(material(rng), 0.7));
  }
  const int cols = std::max(1, body.width / std::max(6, static_cast<int>(rng.uniform(8, 16))));
  const int rows = std::max(1, body.height / std::max(6, static_cast<int>(rng.uniform(9, 18))));
  const cv::Scalar glass = jitter(rng, {60, 70, 90}, 25.0);
  const double cw = static_cast<double>(body.width) / cols, rh = static_cast<double>(body.height) / rows;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int x0 = body.x + static_cast<int>(c * cw + cw * 0.25);
      const int y0 = body.y + static_cast<int>(r * rh + rh * 0.25);
      cv::rectangle(mat, cv::Rect(x0, y0, std::max(1, static_cast<int>(cw * 0.5)), std::max(1, static_cast<int>(rh * 0.5))),
                    glass, cv::FILLED);
    }
  }
}

std::vector<cv::Point> fragment(Rng& rng, cv::Point2d centre, double size) {
  const int corners = rng.range(3, 6);
  std::vector<double> angles;
  for (int i = 0; i < corners; ++i) angles.push_back(rng.uniform(0.0, 2.0 * M_PI));
  std::sort(angles.begin(), angles.end());
  std::vector<cv::Point> pts;
  for (double a : angles) {
    const double r = size * rng.uniform(0.5, 1.0);
    pts.emplace_back(static_cast<int>(centre.x + r * std::cos(a)), static_cast<int>(centre.y + r * std::sin(a)));
  }
  return pts;
}

void draw_crack(cv::Mat& mat, Rng& rng, cv::Point start, int steps, const cv::Scalar& colour) {
  cv::Point p = start;
  double heading = rng.uniform(0.0, 2.0 * M_PI);
  for (int i = 0; i < steps; ++i) {
    heading += rng.uniform(-0.7, 0.7);
    const cv::Point q(p.x + static_cast<int>(4 * std::cos(heading)), p.y + static_cast<int>(4 * std::sin(heading)));
    cv::line(mat, p, q, colour, 1);
    p = q;
  }
}

void draw_car(cv::Mat& mat, Rng& rng, int ground_y) {
  const int w = rng.range(12, 24), h = w / 2;
  const int x = rng.range(0, mat.cols - 1);
  const cv::Scalar body = jitter(rng, {90, 90, 100}, 60.0);
  cv::rectangle(mat, cv::Rect(x, ground_y - h, w, h), body, cv::FILLED);
  cv::circle(mat, {x + w / 4, ground_y}, std::max(1, h / 3), {25, 25, 25}, cv::FILLED);
  cv::circle(mat, {x + 3 * w / 4, ground_y}, std::max(1, h / 3), {25, 25, 25}, cv::FILLED);
}

// Heap of fragments inside a half-ellipse resting on `base_y`.
void draw_debris(cv::Mat& mat, Rng& rng, double cx, double base_y, double half_w, double height, int pieces) {
  const cv::Scalar dust = darker(material(rng), 0.85);
  cv::ellipse(mat, cv::Point(static_cast<int>(cx), static_cast<int>(base_y)),
              cv::Size(static_cast<int>(half_w), static_cast<int>(height)), 0.0, 180.0, 360.0, dust, cv::FILLED);
  for (int i = 0; i < pieces; ++i) {
    const double u = rng.uniform(-1.0, 1.0);
    const double v = rng.uniform(0.0, std::sqrt(1.0 - u * u));
    const cv::Point2d c(cx + u * half_w, base_y - v * height + rng.uniform(0.0, 4.0));
    cv::fillConvexPoly(mat, fragment(rng, c, rng.uniform(1.5, 7.0)), darker(material(rng), rng.uniform(0.55, 1.0)));
  }
  for (int i = rng.range(1, 6); i > 0; --i) {
    const double u = rng.uniform(-0.8, 0.8);
    const cv::Point a(static_cast<int>(cx + u * half_w), static_cast<int>(base_y - rng.uniform(0.0, 0.7) * height));
    const double ang = rng.uniform(0.2, M_PI - 0.2);
    const double len = rng.uniform(6.0, 22.0);
    cv::line(mat, a, {a.x + static_cast<int>(len * std::cos(ang)), a.y - static_cast<int>(len * std::sin(ang))},
             jitter(rng, {80, 60, 50}, 15.0), 1);
  }
}

void draw_intact(cv::Mat& mat, Rng& rng, int horizon) {
  const int w = mat.cols, h = mat.rows;
  const int count = rng.range(1, 4);
  for (int i = 0; i < count; ++i) {
    const int bw = static_cast<int>(w * rng.uniform(0.18, 0.45));
    const int bh = static_cast<int>(h * rng.uniform(0.25, 0.6));
    const int x = rng.range(-bw / 4, w - bw * 3 / 4);
    const int base = horizon + rng.range(0, std::max(1, (h - horizon) / 3));
    draw_building(mat, rng, cv::Rect(x, base - bh, bw, bh), material(rng));
  }
  // Street clutter, and sometimes a small debris pile well under a fifth of the frame.
  for (int i = rng.range(0, 3); i > 0; --i) draw_car(mat, rng, rng.range(horizon + 4, h - 1));
  for (int i = rng.range(0, 8); i > 0; --i) {
    const cv::Point2d c(rng.uniform(0, w), rng.uniform(horizon, h));
    cv::fillConvexPoly(mat, fragment(rng, c, rng.uniform(2.0, 5.0)), darker(material(rng), 0.8));
  }
  if (rng.uniform() < 0.35) {
    draw_debris(mat, rng, rng.uniform(0.1, 0.9) * w, rng.uniform(horizon + 5.0, h - 1.0), rng.uniform(0.05, 0.12) * w,
                rng.uniform(0.03, 0.08) * h, rng.range(8, 25));
  }
  if (rng.uniform() < 0.5) {
    const cv::Point c(rng.range(0, w - 1), rng.range(horizon, h - 1));
    cv::circle(mat, c, rng.range(5, 14), jitter(rng, {70, 110, 60}, 15.0), cv::FILLED);
  }
}

void draw_collapse(cv::Mat& mat, Rng& rng, int horizon) {
  const int w = mat.cols, h = mat.rows;
  // A surviving neighbour in the background.
  if (rng.uniform() < 0.5) {
    const int bw = static_cast<int>(w * rng.uniform(0.15, 0.35));
    const int bh = static_cast<int>(h * rng.uniform(0.25, 0.5));
    draw_building(mat, rng, cv::Rect(rng.range(-bw / 4, w - bw * 3 / 4), horizon - bh, bw, bh), material(rng));
  }
  // Remains of a wall with a broken top edge, sometimes leaning.
  for (int i = rng.range(0, 2); i > 0; --i) {
    const int bw = static_cast<int>(w * rng.uniform(0.15, 0.4));
    const int bh = static_cast<int>(h * rng.uniform(0.15, 0.45));
    const int x = rng.range(0, std::max(1, w - bw));
    const int base = horizon + rng.range(0, std::max(1, (h - horizon) / 4));
    const cv::Scalar facade = material(rng);
    std::vector<cv::Point> outline = {{x, base}, {x + bw, base}};
    const int teeth = rng.range(3, 8);
    for (int t = teeth; t >= 0; --t) {
      outline.emplace_back(x + bw * t / teeth, base - static_cast<int>(bh * rng.uniform(0.3, 1.0)));
    }
    const double lean = rng.uniform(-0.25, 0.25);
    for (auto& p : outline) p.x += static_cast<int>((base - p.y) * lean);
    cv::fillPoly(mat, std::vector<std::vector<cv::Point>>{outline}, facade);
    const cv::Scalar glass = jitter(rng, {60, 70, 90}, 25.0);
    for (int k = rng.range(0, 6); k > 0; --k) {
      const cv::Point2d c(x + rng.uniform(0.1, 0.9) * bw, base - rng.uniform(0.1, 0.3) * bh);
      cv::fillConvexPoly(mat, fragment(rng, c, rng.uniform(2.0, 5.0)), glass);
    }
  }
  const double base_y = rng.uniform(horizon + 0.1 * (h - horizon), h + 0.1 * h);
  draw_debris(mat, rng, rng.uniform(0.25, 0.75) * w, base_y, rng.uniform(0.3, 0.6) * w, rng.uniform(0.2, 0.45) * h,
              rng.range(60, 160));
  for (int i = rng.range(0, 3); i > 0; --i) draw_car(mat, rng, rng.range(horizon + 4, h - 1));
  for (int i = rng.range(0, 3); i > 0; --i) {
    draw_crack(mat, rng, {rng.range(0, w - 1), rng.range(horizon, h - 1)}, rng.range(4, 14),
               jitter(rng, {40, 40, 40}, 10.0));
  }
  if (rng.uniform() < 0.5) {
    cv::Mat dust = mat.clone();
    cv::GaussianBlur(dust, dust, {0, 0}, 3.0);
    cv::addWeighted(mat, 0.6, dust, 0.4, 12.0, mat);
  }
}

}  // namespace

Image make_scene(bool damaged, int width, int height, std::uint64_t seed) {
  if (width < 8 || height < 8) throw Error(ErrorCode::invalid_argument, "scene must be at least 8x8");
  Rng rng(seed * 2654435761ULL + (damaged ? 1 : 0));
  cv::Mat mat(height, width, CV_8UC3);
  const int horizon = draw_backdrop(mat, rng);
  if (damaged) draw_collapse(mat, rng, horizon);
  else draw_intact(mat, rng, horizon);
  finish(mat, rng);
  return from_mat(mat);
}

Image make_texture(int texture_class, int side, std::uint64_t seed) {
  if (texture_class < 0 || texture_class >= kTextureClasses) {
    throw Error(ErrorCode::invalid_argument, "texture class out of range");
  }
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(texture_class));
  const cv::Scalar a = jitter(rng, {128, 128, 128}, 100.0);
  cv::Scalar b = jitter(rng, {128, 128, 128}, 100.0);
  if (cv::norm(a - b) < 60.0) b = cv::Scalar(255, 255, 255) - a;
  cv::Mat mat(side, side, CV_8UC3, a);

  auto stripes = [&](double angle_deg) {
    const double ang = (angle_deg + rng.uniform(-10.0, 10.0)) * M_PI / 180.0;
    const double period = rng.uniform(3.0, 10.0);
    const double phase = rng.uniform(0.0, period);
    const double nx = -std::sin(ang), ny = std::cos(ang);
    for (int y = 0; y < side; ++y) {
      auto* row = mat.ptr<cv::Vec3b>(y);
      for (int x = 0; x < side; ++x) {
        const double t = std::fmod(x * nx + y * ny + phase + 1000.0 * period, period) / period;
        const cv::Scalar c = t < 0.5 ? a : b;
        row[x] = cv::Vec3b(static_cast<std::uint8_t>(c[0]), static_cast<std::uint8_t>(c[1]), static_cast<std::uint8_t>(c[2]));
      }
    }
  };

  switch (texture_class) {
    case 0: stripes(0.0); break;
    case 1: stripes(90.0); break;
    case 2: stripes(45.0); break;
    case 3: stripes(135.0); break;
    case 4: {
      const int cell = rng.range(2, 7);
      const int ox = rng.range(0, cell), oy = rng.range(0, cell);
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          if ((((x + ox) / cell) + ((y + oy) / cell)) % 2) cv::rectangle(mat, cv::Rect(x, y, 1, 1), b, cv::FILLED);
        }
      }
      break;
    }
    case 5: {
      const int pitch = rng.range(5, 10);
      const int radius = std::max(1, pitch / rng.range(3, 4));
      for (int y = rng.range(0, pitch); y < side; y += pitch) {
        for (int x = rng.range(0, pitch); x < side; x += pitch) cv::circle(mat, {x, y}, radius, b, cv::FILLED);
      }
      break;
    }
    case 6: {
      const int bw = rng.range(4, 10), bh = rng.range(3, 8);
      for (int y = 0; y < side; y += bh) {
        const int shift = (y / bh) % 2 ? bw / 2 : 0;
        for (int x = -shift; x < side; x += bw) {
          cv::rectangle(mat, cv::Rect(x, y, bw - 1, bh - 1), jitter(rng, b, 30.0), cv::FILLED);
        }
      }
      break;
    }
    case 7: {
      for (int i = rng.range(20, 50); i > 0; --i) {
        cv::fillConvexPoly(mat, fragment(rng, {rng.uniform(0, side), rng.uniform(0, side)}, rng.uniform(2.0, 6.0)),
                           jitter(rng, i % 2 ? b : a, 50.0));
      }
      break;
    }
    case 8: {
      for (int i = rng.range(3, 8); i > 0; --i) draw_crack(mat, rng, {rng.range(0, side - 1), rng.range(0, side - 1)}, rng.range(6, 16), b);
      break;
    }
    case 9: {
      cv::Mat small(4, 4, CV_8UC3);
      for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
          const cv::Scalar c = a * rng.uniform() + b * rng.uniform();
          small.at<cv::Vec3b>(y, x) = cv::Vec3b(cv::saturate_cast<std::uint8_t>(c[0] * 0.7),
                                                cv::saturate_cast<std::uint8_t>(c[1] * 0.7),
                                                cv::saturate_cast<std::uint8_t>(c[2] * 0.7));
        }
      }
      cv::resize(small, mat, mat.size(), 0, 0, cv::INTER_CUBIC);
      break;
    }
  }
  add_noise(mat, rng, rng.uniform(2.0, 12.0));
  return from_mat(mat);
}

Image pan_zoom(const Image& image, double zoom, double pan_x, double pan_y) {
  if (zoom < 1.0) throw Error(ErrorCode::invalid_argument, "zoom must be at least 1");
  const cv::Mat src = to_mat(image);
  const int cw = std::max(1, static_cast<int>(std::lround(image.width / zoom)));
  const int ch = std::max(1, static_cast<int>(std::lround(image.height / zoom)));
  const int slack_x = image.width - cw, slack_y = image.height - ch;
  const int x = static_cast<int>(std::lround((std::clamp(pan_x, -1.0, 1.0) + 1.0) / 2.0 * slack_x));
  const int y = static_cast<int>(std::lround((std::clamp(pan_y, -1.0, 1.0) + 1.0) / 2.0 * slack_y));
  cv::Mat out;
  cv::resize(src(cv::Rect(x, y, cw, ch)), out, src.size(), 0, 0, cv::INTER_LINEAR);
  Image result = from_mat(out);
  if (image.channels == 1) result = to_gray(result);
  return result;
}

std::vector<LabeledImage> write_scene_set(const std::filesystem::path& dir, int per_class, int side,
                                          std::uint64_t seed) {
  std::vector<LabeledImage> out;
  char name[64];
  for (int i = 0; i < per_class; ++i) {
    for (bool damaged : {true, false}) {
      std::snprintf(name, sizeof name, "%s_%04d", damaged ? "dmg" : "ok", i);
      const fs::path path = dir / (std::string(name) + ".png");
      write_file(path, encode_png(make_scene(damaged, side, side, seed + static_cast<std::uint64_t>(i) * 7919)));
      out.push_back({name, path, damaged ? corpus::LabelValue::damage : corpus::LabelValue::non_damage});
    }
  }
  return out;
}

namespace {

// Keeps drawing scenes until one is at least `min_sep` signature bits from every kept one.
struct DistinctScenes {
  int min_sep;
  std::vector<dedup::PerceptualSignature> kept;

  bool accept(const dedup::PerceptualSignature& sig) const {
    for (const auto& k : kept) {
      if (dedup::hamming_distance(sig, k) < min_sep) return false;
    }
    return true;
  }
};

Timestamp fixture_epoch() { return parse_rfc3339("2023-02-06T01:17:00Z"); }

}  // namespace

DedupFixture write_dedup_fixture(const std::filesystem::path& dir, std::uint64_t seed) {
  fs::create_directories(dir);
  DedupFixture fx;
  Rng rng(seed);
  corpus::DatasetManifest manifest;
  std::vector<Image> uniques;
  std::vector<Bytes> unique_bytes;
  std::vector<bool> unique_damaged;
  int serial = 0;
  auto add = [&](const std::string& id, const Bytes& bytes, const std::string& ext, bool damaged) {
    const std::string file = id + ext;
    write_file(dir / file, bytes);
    fx.records.push_back(corpus::record_from_file(dir / file, id, corpus::Source::local,
                                                  fixture_epoch() + std::chrono::seconds(serial++), file));
    manifest.entries.push_back({id, file, damaged ? corpus::LabelValue::damage : corpus::LabelValue::non_damage});
  };
  char id[32];

  while (uniques.size() < 40) {
    const bool damaged = uniques.size() % 2 == 0;
    const int w = rng.range(200, 320), h = rng.range(180, 280);
    Image img = make_scene(damaged, w, h, seed * 1000003 + uniques.size());
    std::snprintf(id, sizeof id, "img_%03zu", uniques.size());
    Bytes bytes = encode_png(img);
    add(id, bytes, ".png", damaged);
    fx.unique_ids.push_back(id);
    uniques.push_back(std::move(img));
    unique_bytes.push_back(std::move(bytes));
    unique_damaged.push_back(damaged);
  }
  for (int i = 0; i < 10; ++i) {
    std::snprintf(id, sizeof id, "copy_%02d", i);
    add(id, unique_bytes[i], ".png", unique_damaged[i]);
    fx.exact_copies.push_back(id);
  }
  for (int i = 0; i < 5; ++i) {
    std::snprintf(id, sizeof id, "small_%02d", i);
    const bool damaged = i % 2 == 0;
    add(id, encode_png(make_scene(damaged, rng.range(60, 140), rng.range(60, 149), seed * 7 + i)), ".png", damaged);
    fx.undersized.push_back(id);
  }
  for (int i = 0; i < 5; ++i) {
    const std::size_t source = 10 + static_cast<std::size_t>(i);
    Image variant = pan_zoom(uniques[source], rng.uniform(1.05, 1.15), rng.uniform(-1, 1), rng.uniform(-1, 1));
    std::snprintf(id, sizeof id, "near_%02d", i);
    add(id, encode_jpeg(variant, 88), ".jpg", unique_damaged[source]);
    fx.near_copies.push_back(id);
  }
  manifest.recount();
  fx.manifest = dir / "manifest.csv";
  corpus::write_manifest(fx.manifest, manifest);
  return fx;
}

FeedFixture write_feed_fixture(const std::filesystem::path& dir, std::size_t unique, std::size_t duplicates,
                               std::uint64_t seed, int side) {
  fs::create_directories(dir / "images");
  Rng rng(seed);
  DistinctScenes distinct{17, {}};
  struct Stored {
    std::string ref;
    Image image;
    Bytes bytes;
  };
  std::vector<Stored> images;
  char name[64];
  std::uint64_t draw = 0;
  while (images.size() < unique) {
    const bool damaged = rng.uniform() < 0.3;
    Image img = make_scene(damaged, side, side, seed * 1000003 + draw++);
    Bytes bytes = encode_jpeg(img, 90);
    const auto sig = dedup::near_signature(decode_image(bytes));
    if (!distinct.accept(sig)) continue;
    distinct.kept.push_back(sig);
    std::snprintf(name, sizeof name, "images/u_%05zu.jpg", images.size());
    write_file(dir / name, bytes);
    images.push_back({name, std::move(img), std::move(bytes)});
  }

  // Each duplicate reuses an earlier image: byte-identical repost or a pan/zoom
  // re-encode. It is posted after some unique image at or beyond its source.
  std::vector<std::vector<std::string>> after(unique);
  for (std::size_t d = 0; d < duplicates; ++d) {
    const std::size_t source = rng.below(unique);
    std::string ref;
    if (d % 4 == 3) {
      for (int attempt = 0; attempt < 50 && ref.empty(); ++attempt) {
        const Image variant =
            pan_zoom(images[source].image, rng.uniform(1.04, 1.12), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const Bytes bytes = encode_jpeg(variant, 85);
        const auto sig = dedup::near_signature(decode_image(bytes));
        bool ok = dedup::hamming_distance(sig, distinct.kept[source]) < distinct.min_sep;
        for (std::size_t k = 0; ok && k < distinct.kept.size(); ++k) {
          if (k != source && dedup::hamming_distance(sig, distinct.kept[k]) < distinct.min_sep) ok = false;
        }
        if (!ok) continue;
        std::snprintf(name, sizeof name, "images/n_%05zu.jpg", d);
        write_file(dir / name, bytes);
        ref = name;
      }
    }
    if (ref.empty()) {
      std::snprintf(name, sizeof name, "images/r_%05zu.jpg", d);
      write_file(dir / name, images[source].bytes);
      ref = name;
    }
    after[source + rng.below(unique - source)].push_back(ref);
  }
  std::vector<std::string> ordered;
  for (std::size_t i = 0; i < unique; ++i) {
    ordered.push_back(images[i].ref);
    ordered.insert(ordered.end(), after[i].begin(), after[i].end());
  }

  static const char* kTexts[] = {"Earthquake hit the city centre", "EARTHQUAKE damage near the square #deprem",
                                 "buildings after the earthquake", "Aftershock felt, earthquake relief needed",
                                 "earthquake: collapsed block on main street"};
  static const char* kOffTopic[] = {"football tonight", "weather is lovely", "new cafe opened downtown"};
  FeedFixture fx;
  fx.feed = dir / "feed.jsonl";
  std::string lines;
  Timestamp t = fixture_epoch();
  std::size_t post = 0;
  auto emit = [&](const std::string& text, const std::vector<std::string>& refs) {
    std::snprintf(name, sizeof name, "p%06zu", post++);
    t += std::chrono::seconds(rng.range(20, 120));
    nlohmann::json j = {{"post_id", name},
                        {"created_at", format_rfc3339(t)},
                        {"text", text},
                        {"image_refs", refs},
                        {"source_tag", "replay"}};
    lines += j.dump() + "\n";
  };
  for (std::size_t i = 0; i < ordered.size();) {
    if (rng.uniform() < 0.05) emit(kTexts[rng.below(std::size(kTexts))], {});
    if (rng.uniform() < 0.05) emit(kOffTopic[rng.below(std::size(kOffTopic))], {ordered[rng.below(i + 1)]});
    const std::size_t take = std::min<std::size_t>(ordered.size() - i, rng.uniform() < 0.15 ? 2 : 1);
    emit(kTexts[rng.below(std::size(kTexts))], std::vector<std::string>(ordered.begin() + static_cast<std::ptrdiff_t>(i),
                                                                      ordered.begin() + static_cast<std::ptrdiff_t>(i + take)));
    i += take;
  }
  write_text(fx.feed, lines);
  fx.posts = post;
  fx.raw_images = ordered.size();
  fx.planted_duplicates = duplicates;
  fx.unique_images = unique;
  return fx;
}

std::vector<ScoredLabel> make_scored_fixture(std::size_t tp, std::size_t fn, std::size_t fp, std::size_t tn,
                                             std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ScoredLabel> out;
  char id[32];
  auto emit = [&](std::size_t n, int label, bool positive) {
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(id, sizeof id, "s%07zu", out.size());
      // Positives in [0.5, 1), negatives in (0, 0.5); skewed toward the label's side.
      const double u = rng.uniform();
      const double s = label == (positive ? 1 : 0) ? std::sqrt(u) : u * u;
      const double p = positive ? 0.5 + 0.4999 * s : 0.4999 * (1.0 - s) + 1e-4;
      out.push_back({id, label, p});
    }
  };
  emit(tp, 1, true);
  emit(fn, 1, false);
  emit(fp, 0, true);
  emit(tn, 0, false);
  rng.shuffle(out);
  return out;
}

}  // namespace dmgwatch::synth
