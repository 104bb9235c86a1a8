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

#include "dmgwatch/eval/eval.hpp"

#include <cstdio>
#include <unordered_map>
#include <unordered_set>

#include "dmgwatch/core/error.hpp"

namespace dmgwatch::eval {

using corpus::LabelValue;

ConfusionMatrix confusion(std::span<const double> p_damage, std::span<const LabelValue> truths, double threshold) {
  if (p_damage.size() != truths.size()) {
    throw Error(ErrorCode::shape_mismatch, "predictions and truths differ in length");
  }
  if (p_damage.empty()) throw Error(ErrorCode::invalid_argument, "cannot tally an empty prediction set");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorCode::invalid_argument, "threshold must lie in [0, 1]");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (!(p_damage[i] >= 0.0 && p_damage[i] <= 1.0)) {
      throw Error(ErrorCode::numeric, "p_damage outside [0, 1]", std::to_string(i));
    }
    const bool predicted = p_damage[i] >= threshold;
    switch (truths[i]) {
      case LabelValue::damage: (predicted ? m.tp : m.fn)++; break;
      case LabelValue::non_damage: (predicted ? m.fp : m.tn)++; break;
      case LabelValue::excluded:
        throw Error(ErrorCode::invalid_argument, "excluded examples cannot be scored", std::to_string(i));
    }
  }
  return m;
}

namespace {

Metric ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

ClassMetrics metrics_for(std::uint64_t hit, std::uint64_t false_alarm, std::uint64_t miss) {
  ClassMetrics c{ratio(hit, hit + false_alarm), ratio(hit, hit + miss), std::nullopt};
  if (c.precision && c.recall && *c.precision + *c.recall > 0.0) {
    c.f_measure = 2.0 * *c.precision * *c.recall / (*c.precision + *c.recall);
  }
  return c;
}

}  // namespace

MetricsPair precision_recall_f(const ConfusionMatrix& m) {
  return {metrics_for(m.tp, m.fp, m.fn), metrics_for(m.tn, m.fn, m.fp)};
}

std::vector<double> even_thresholds(int n) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "need at least one threshold");
  if (n == 1) return {0.5};
  std::vector<double> t;
  for (int i = 0; i < n; ++i) t.push_back(static_cast<double>(i) / (n - 1));
  return t;
}

ThresholdSweep sweep(std::span<const double> p_damage, std::span<const LabelValue> truths,
                     std::span<const double> thresholds) {
  if (thresholds.empty()) throw Error(ErrorCode::invalid_argument, "sweep needs at least one threshold");
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > thresholds[i - 1])) {
      throw Error(ErrorCode::invalid_argument, "thresholds must be strictly increasing");
    }
  }
  ThresholdSweep s;
  for (double t : thresholds) {
    const auto m = confusion(p_damage, truths, t);
    s.points.push_back({t, m, precision_recall_f(m)});
  }
  return s;
}

double select_threshold(const ThresholdSweep& sweep, const SelectionPolicy& policy) {
  if (sweep.points.empty()) throw Error(ErrorCode::invalid_argument, "cannot select from an empty sweep");
  if (policy.kind == SelectionPolicy::Kind::fixed) {
    if (!(policy.value >= 0.0 && policy.value <= 1.0)) {
      throw Error(ErrorCode::invalid_argument, "fixed threshold must lie in [0, 1]");
    }
    return policy.value;
  }
  const SweepPoint* best = &sweep.points.front();
  for (const auto& p : sweep.points) {
    const Metric& f = p.metrics.damage.f_measure;
    const Metric& bf = best->metrics.damage.f_measure;
    if (f && (!bf || *f > *bf)) best = &p;
  }
  return best->threshold;
}

namespace {

nlohmann::json metric_json(const Metric& m) { return m ? nlohmann::json(*m) : nlohmann::json(nullptr); }

nlohmann::json class_json(const ClassMetrics& c) {
  return {{"precision", metric_json(c.precision)}, {"recall", metric_json(c.recall)}, {"f", metric_json(c.f_measure)}};
}

std::string cell(const Metric& m) {
  if (!m) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *m);
  return buf;
}

}  // namespace

nlohmann::json metrics_json(const SweepPoint& point) {
  return {{"threshold", point.threshold},
          {"per_class", {{"damage", class_json(point.metrics.damage)}, {"non_damage", class_json(point.metrics.non_damage)}}},
          {"counts", {{"tp", point.counts.tp}, {"fn", point.counts.fn}, {"fp", point.counts.fp}, {"tn", point.counts.tn}}}};
}

std::string sweep_csv(const ThresholdSweep& sweep) {
  std::string out = "threshold,dmg_p,dmg_r,dmg_f,non_p,non_r,non_f\n";
  char t[32];
  for (const auto& p : sweep.points) {
    std::snprintf(t, sizeof t, "%.4f", p.threshold);
    const auto& d = p.metrics.damage;
    const auto& n = p.metrics.non_damage;
    out += std::string(t) + "," + cell(d.precision) + "," + cell(d.recall) + "," + cell(d.f_measure) + "," +
           cell(n.precision) + "," + cell(n.recall) + "," + cell(n.f_measure) + "\n";
  }
  return out;
}

ScoredSet join_predictions(const std::vector<nlohmann::json>& predictions, const corpus::DatasetManifest& truth) {
  std::unordered_map<std::string, LabelValue> labels;
  for (const auto& e : truth.entries) labels[e.image_id] = e.label;
  ScoredSet out;
  std::unordered_set<std::string> seen;
  for (const auto& p : predictions) {
    std::string id;
    double pd = 0.0;
    try {
      id = p.at("image_id").get<std::string>();
      pd = p.contains("p_damage") ? p["p_damage"].get<double>() : p.at("probs").at("p_damage").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, std::string("bad prediction line: ") + e.what());
    }
    if (!(pd >= 0.0 && pd <= 1.0)) throw Error(ErrorCode::numeric, "p_damage outside [0, 1]", id);
    const auto it = labels.find(id);
    if (it == labels.end()) throw Error(ErrorCode::not_found, "prediction for unlabeled image " + id, id);
    if (!seen.insert(id).second) throw Error(ErrorCode::duplicate_id, "duplicate prediction for " + id, id);
    if (it->second == LabelValue::excluded) continue;
    out.image_ids.push_back(id);
    out.p_damage.push_back(pd);
    out.truths.push_back(it->second);
  }
  for (const auto& e : truth.entries) {
    if (e.label != LabelValue::excluded && !seen.count(e.image_id)) {
      throw Error(ErrorCode::not_found, "no prediction for labeled image " + e.image_id, e.image_id);
    }
  }
  return out;
}

}  // namespace dmgwatch::eval
