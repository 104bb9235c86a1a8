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

#include "dmgwatch/gradcam/gradcam.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <opencv2/imgproc.hpp>

#include "dmgwatch/core/archive.hpp"
#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/io.hpp"

namespace dmgwatch::gradcam {

std::string_view to_string(TargetClass c) { return c == TargetClass::damage ? "damage" : "non_damage"; }

TargetClass parse_target_class(std::string_view text) {
  if (text == "damage") return TargetClass::damage;
  if (text == "non_damage") return TargetClass::non_damage;
  throw Error(ErrorCode::parse, "unknown class '" + std::string(text) + "'");
}

FeatureStack feature_gradients(const vision::ConvClassifier& model, const vision::InputTensor& input, TargetClass c) {
  const auto& layers = model.layers();
  if (layers.empty() || layers[model.last_conv_layer()].kind != vision::LayerKind::conv) {
    throw Error(ErrorCode::not_found, "model has no convolutional layer to explain");
  }
  return model.head_gradient(model.last_conv_activation(input), static_cast<int>(c));
}

std::vector<double> importance_weights(const FeatureStack& grads) {
  const std::size_t area = static_cast<std::size_t>(grads.rows) * grads.cols;
  std::vector<double> alpha(grads.channels, 0.0);
  for (int k = 0; k < grads.channels; ++k) {
    const double* g = grads.values.data() + k * area;
    double sum = 0.0;
    for (std::size_t p = 0; p < area; ++p) sum += g[p];
    alpha[k] = sum / static_cast<double>(area);
  }
  return alpha;
}

double Map2D::max() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }
double Map2D::min() const { return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end()); }

Map2D localization_map(const std::vector<double>& alpha, const FeatureStack& stack) {
  if (alpha.size() != static_cast<std::size_t>(stack.channels)) {
    throw Error(ErrorCode::shape_mismatch, "importance weights and feature stack differ in channel count");
  }
  const std::size_t area = static_cast<std::size_t>(stack.rows) * stack.cols;
  Map2D map{stack.rows, stack.cols, std::vector<double>(area, 0.0)};
  for (int k = 0; k < stack.channels; ++k) {
    const double* a = stack.values.data() + k * area;
    for (std::size_t p = 0; p < area; ++p) map.values[p] += alpha[k] * a[p];
  }
  for (auto& v : map.values) v = std::max(v, 0.0);
  return map;
}

Map2D upsample_bilinear(const Map2D& map, int rows, int cols) {
  if (map.rows < 1 || map.cols < 1 || rows < 1 || cols < 1) {
    throw Error(ErrorCode::invalid_argument, "upsampling needs non-empty source and target");
  }
  Map2D out{rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols)};
  const double sy = rows > 1 ? static_cast<double>(map.rows - 1) / (rows - 1) : 0.0;
  const double sx = cols > 1 ? static_cast<double>(map.cols - 1) / (cols - 1) : 0.0;
  for (int i = 0; i < rows; ++i) {
    const double y = i * sy;
    const int y0 = std::min(static_cast<int>(y), map.rows - 1);
    const int y1 = std::min(y0 + 1, map.rows - 1);
    const double fy = y - y0;
    for (int j = 0; j < cols; ++j) {
      const double x = j * sx;
      const int x0 = std::min(static_cast<int>(x), map.cols - 1);
      const int x1 = std::min(x0 + 1, map.cols - 1);
      const double fx = x - x0;
      const double top = map.at(y0, x0) + fx * (map.at(y0, x1) - map.at(y0, x0));
      const double bottom = map.at(y1, x0) + fx * (map.at(y1, x1) - map.at(y1, x0));
      double v = top + fy * (bottom - top);
      // Keeps constant maps exactly constant under rounding.
      const double lo = std::min({map.at(y0, x0), map.at(y0, x1), map.at(y1, x0), map.at(y1, x1)});
      const double hi = std::max({map.at(y0, x0), map.at(y0, x1), map.at(y1, x0), map.at(y1, x1)});
      out.values[static_cast<std::size_t>(i) * cols + j] = std::clamp(v, lo, hi);
    }
  }
  return out;
}

namespace {

std::string overlay_title(TargetClass c, double probability, const std::optional<std::string>& truth) {
  const TargetClass other = c == TargetClass::damage ? TargetClass::non_damage : TargetClass::damage;
  const TargetClass estimated = probability >= 0.5 ? c : other;
  char p[32];
  std::snprintf(p, sizeof p, "%.3f", probability);
  std::string title = "heatmap " + std::string(to_string(c)) + " | estimated " + std::string(to_string(estimated)) +
                      " | p(" + std::string(to_string(c)) + ")=" + p;
  if (truth) title = "truth " + *truth + " | " + title;
  return title;
}

}  // namespace

Overlay render_overlay(const Image& image, const Map2D& map, TargetClass c, double probability,
                       const std::optional<std::string>& truth, double beta) {
  if (map.rows != image.height || map.cols != image.width) {
    throw Error(ErrorCode::shape_mismatch, "heatmap and image dimensions differ");
  }
  if (!(beta >= 0.0 && beta <= 1.0)) throw Error(ErrorCode::invalid_argument, "blend factor must lie in [0, 1]");
  const double peak = map.max();
  cv::Mat level(image.height, image.width, CV_8UC1);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const double v = peak > 0.0 ? std::max(0.0, map.at(y, x)) / peak : 0.0;
      level.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  cv::Mat colour;
  cv::applyColorMap(level, colour, cv::COLORMAP_INFERNO);  // BGR

  const Image rgb = to_rgb(image);
  Overlay out{Image(image.width, image.height, 3), overlay_title(c, probability, truth)};
  for (int y = 0; y < image.height; ++y) {
    const auto* row = colour.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        const double v = (1.0 - beta) * rgb.at(x, y, ch) + beta * row[x][2 - ch];
        out.image.at(x, y, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

Explanation explain(const vision::ConvClassifier& model, const Image& image, bool both_classes,
                    const std::optional<std::string>& truth) {
  const int side = model.spec().input_side;
  const vision::InputTensor input = vision::resize_normalize(image, side);
  const FeatureStack features = model.last_conv_activation(input);
  const auto logits = model.head_logits(features);

  Explanation out;
  const double m = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - m), e1 = std::exp(logits[1] - m);
  out.probabilities = {1.0 - e1 / (e0 + e1), e1 / (e0 + e1)};
  out.predicted = out.probabilities.p_damage >= 0.5 ? "damage" : "non_damage";

  std::vector<TargetClass> targets = {TargetClass::damage};
  if (both_classes) targets.push_back(TargetClass::non_damage);
  for (TargetClass c : targets) {
    ClassExplanation ce;
    ce.target = c;
    ce.logit = logits[static_cast<int>(c)];
    ce.probability = c == TargetClass::damage ? out.probabilities.p_damage : out.probabilities.p_non_damage;
    ce.alpha = importance_weights(model.head_gradient(features, static_cast<int>(c)));
    ce.map = localization_map(ce.alpha, features);
    ce.upsampled = upsample_bilinear(ce.map, side, side);
    ce.overlay = render_overlay(image, upsample_bilinear(ce.map, image.height, image.width), c, ce.probability, truth);
    out.classes.push_back(std::move(ce));
  }
  return out;
}

std::vector<std::filesystem::path> save_explanation(const std::filesystem::path& dir, const std::string& stem,
                                                    const Explanation& explanation, const std::string& model_checksum) {
  std::vector<std::filesystem::path> written;
  for (const auto& ce : explanation.classes) {
    const std::string base = stem + "_" + std::string(to_string(ce.target));
    const auto npy = dir / (base + ".npy");
    std::vector<float> values(ce.map.values.begin(), ce.map.values.end());
    write_npy(npy, ce.map.rows, ce.map.cols, values);
    const auto png = dir / (base + "_overlay.png");
    write_file(png, encode_png(ce.overlay.image));
    const auto sidecar = dir / (base + ".json");
    const nlohmann::json j = {{"class", to_string(ce.target)},
                              {"probability", ce.probability},
                              {"logit", ce.logit},
                              {"model_checksum", model_checksum},
                              {"title", ce.overlay.title},
                              {"shape", {ce.map.rows, ce.map.cols}},
                              {"overlay", png.filename().string()}};
    write_text(sidecar, j.dump(2) + "\n");
    written.insert(written.end(), {npy, sidecar, png});
  }
  return written;
}

}  // namespace dmgwatch::gradcam
