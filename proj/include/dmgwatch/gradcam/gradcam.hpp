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

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmgwatch/core/image.hpp"
#include "dmgwatch/vision/model.hpp"

namespace dmgwatch::gradcam {

using vision::FeatureStack;

enum class TargetClass { non_damage = 0, damage = 1 };

std::string_view to_string(TargetClass c);
TargetClass parse_target_class(std::string_view text);

/// d y_c / d A for the last conv activation A, where y_c is the pre-softmax
/// logit of class c.
FeatureStack feature_gradients(const vision::ConvClassifier& model, const vision::InputTensor& input, TargetClass c);

/// alpha_k = (1 / uv) * sum_ij grads[k, i, j].
std::vector<double> importance_weights(const FeatureStack& grads);

/// Row-major rows x cols map.
struct Map2D {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * cols + j]; }
  double max() const;
  double min() const;
};

/// L = ReLU(sum_k alpha_k A^k).
Map2D localization_map(const std::vector<double>& alpha, const FeatureStack& stack);

/// Bilinear resampling with corner alignment: output (0,0) and (H-1,W-1) sit
/// exactly on the input corners.
Map2D upsample_bilinear(const Map2D& map, int rows, int cols);

inline constexpr double kOverlayBlend = 0.4;

struct Overlay {
  Image image;
  std::string title;
};

/// Blends `image` with the inferno colormap of `map` / max(map) (an all-zero
/// map stays zero): (1 - beta) * image + beta * colour. `map` must already
/// have the image's dimensions.
Overlay render_overlay(const Image& image, const Map2D& map, TargetClass c, double probability,
                       const std::optional<std::string>& truth = std::nullopt, double beta = kOverlayBlend);

struct ClassExplanation {
  TargetClass target;
  double logit = 0.0;
  double probability = 0.0;  // of this class
  std::vector<double> alpha;
  Map2D map;  // u x v
  Map2D upsampled;  // input-side x input-side
  Overlay overlay;  // original image dimensions
};

struct Explanation {
  vision::ClassProbabilities probabilities;
  std::string predicted;
  std::vector<ClassExplanation> classes;
};

/// Grad-CAM for damage and, when `both_classes`, non_damage as well.
Explanation explain(const vision::ConvClassifier& model, const Image& image, bool both_classes = true,
                    const std::optional<std::string>& truth = std::nullopt);

/// Writes <stem>_<class>.npy (u x v map), <stem>_<class>.json sidecar
/// {class, probability, model_checksum, title, shape} and
/// <stem>_<class>_overlay.png for every explained class. Returns the paths.
std::vector<std::filesystem::path> save_explanation(const std::filesystem::path& dir, const std::string& stem,
                                                    const Explanation& explanation, const std::string& model_checksum);

}  // namespace dmgwatch::gradcam
