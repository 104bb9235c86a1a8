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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmgwatch/corpus/types.hpp"

namespace dmgwatch::eval {

/// Positive class is damage.
struct ConfusionMatrix {
  std::uint64_t tp = 0, fn = 0, fp = 0, tn = 0;

  std::uint64_t total() const noexcept { return tp + fn + fp + tn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Empty when the defining denominator is zero.
using Metric = std::optional<double>;

struct ClassMetrics {
  Metric precision;
  Metric recall;
  Metric f_measure;

  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct MetricsPair {
  ClassMetrics damage;
  ClassMetrics non_damage;

  friend bool operator==(const MetricsPair&, const MetricsPair&) = default;
};

/// Predicts damage iff p_damage >= threshold. Truths must be damage or non_damage.
ConfusionMatrix confusion(std::span<const double> p_damage, std::span<const corpus::LabelValue> truths,
                          double threshold);

MetricsPair precision_recall_f(const ConfusionMatrix& m);

struct SweepPoint {
  double threshold = 0.0;
  ConfusionMatrix counts;
  MetricsPair metrics;
};

struct ThresholdSweep {
  std::vector<SweepPoint> points;
};

/// `n` evenly spaced thresholds from 0 to 1 inclusive (11 gives 0, 0.1, ..., 1).
std::vector<double> even_thresholds(int n = 11);

ThresholdSweep sweep(std::span<const double> p_damage, std::span<const corpus::LabelValue> truths,
                     std::span<const double> thresholds);

struct SelectionPolicy {
  enum class Kind { max_damage_f, fixed } kind = Kind::max_damage_f;
  double value = 0.5;

  static SelectionPolicy fixed(double t) { return {Kind::fixed, t}; }
};

/// Highest damage F-measure (earliest threshold on ties; undefined F ranks
/// below any defined value), or the fixed value.
double select_threshold(const ThresholdSweep& sweep, const SelectionPolicy& policy = {});

/// {"threshold": t, "per_class": {"damage": {...}, "non_damage": {...}}, "counts": {...}};
/// undefined metrics serialize as null.
nlohmann::json metrics_json(const SweepPoint& point);

/// "threshold,dmg_p,dmg_r,dmg_f,non_p,non_r,non_f"; undefined cells are empty.
std::string sweep_csv(const ThresholdSweep& sweep);

struct ScoredSet {
  std::vector<std::string> image_ids;
  std::vector<double> p_damage;
  std::vector<corpus::LabelValue> truths;
};

/// Joins prediction lines ({image_id, p_damage} or {image_id, probs: {damage}})
/// with manifest labels by image_id. Excluded rows are skipped; a prediction
/// without a label, or a label without a prediction, is an error.
ScoredSet join_predictions(const std::vector<nlohmann::json>& predictions, const corpus::DatasetManifest& truth);

}  // namespace dmgwatch::eval
