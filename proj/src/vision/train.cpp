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

#include "dmgwatch/vision/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/io.hpp"
#include "dmgwatch/core/random.hpp"

namespace dmgwatch::vision {

using kernels::Batch;

int class_index(corpus::LabelValue value) {
  switch (value) {
    case corpus::LabelValue::non_damage: return 0;
    case corpus::LabelValue::damage: return 1;
    case corpus::LabelValue::excluded: break;
  }
  throw Error(ErrorCode::invalid_argument, "excluded examples have no class index");
}

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::invalid_argument, "learning rate must be positive");
  if (max_epochs < 1) throw Error(ErrorCode::invalid_argument, "max_epochs must be at least 1");
  if (batch_size < 1) throw Error(ErrorCode::invalid_argument, "batch_size must be at least 1");
  if (!(class_weights.non_damage > 0.0 && class_weights.damage > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "class weights must be positive");
  }
}

nlohmann::json TrainingConfig::to_json() const {
  nlohmann::json j = {{"learning_rate", learning_rate},
                      {"max_epochs", max_epochs},
                      {"batch_size", batch_size},
                      {"class_weights", {{"non_damage", class_weights.non_damage}, {"damage", class_weights.damage}}},
                      {"seed", seed},
                      {"rho", rho},
                      {"epsilon", epsilon}};
  if (checkpoint_path) j["checkpoint_path"] = checkpoint_path->string();
  return j;
}

TrainingConfig TrainingConfig::from_json(const nlohmann::json& j) {
  TrainingConfig c;
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.rho = j.value("rho", c.rho);
    c.epsilon = j.value("epsilon", c.epsilon);
    if (j.contains("class_weights")) {
      c.class_weights.non_damage = j["class_weights"].at("non_damage").get<double>();
      c.class_weights.damage = j["class_weights"].at("damage").get<double>();
    }
    if (j.contains("checkpoint_path")) c.checkpoint_path = j["checkpoint_path"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("bad training config: ") + e.what());
  }
  c.validate();
  return c;
}

RmsProp::RmsProp(double learning_rate, double rho, double epsilon) : lr_(learning_rate), rho_(rho), eps_(epsilon) {}

void RmsProp::step(std::vector<Parameter>& params, const std::vector<std::vector<float>>& grads) {
  if (mean_square_.size() != params.size()) {
    mean_square_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) mean_square_[i].assign(params[i].value.size(), 0.0f);
  }
  const float rho = static_cast<float>(rho_), lr = static_cast<float>(lr_), eps = static_cast<float>(eps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable || grads[i].empty()) continue;
    auto& v = mean_square_[i];
    auto& p = params[i].value;
    const auto& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = rho * v[k] + (1.0f - rho) * g[k] * g[k];
      p[k] -= lr * g[k] / (std::sqrt(v[k]) + eps);
    }
  }
}

namespace {

constexpr std::size_t kCacheBatch = 32;

// Activations entering layer `first` for every example, one Batch per example
// group of kCacheBatch, flattened into a single per-example table.
struct PrefixCache {
  int c = 0, h = 0, w = 0;
  std::vector<float> values;
  std::size_t per_item() const { return static_cast<std::size_t>(c) * h * w; }
};

PrefixCache build_cache(const ConvClassifier& model, const TensorSet& set, std::size_t first) {
  PrefixCache cache;
  for (std::size_t start = 0; start < set.size(); start += kCacheBatch) {
    const auto chunk = std::span<const InputTensor>(set.inputs).subspan(start, std::min(kCacheBatch, set.size() - start));
    const Batch<float> out = model.forward(model.to_batch(chunk), 0, first);
    cache.c = out.c;
    cache.h = out.h;
    cache.w = out.w;
    cache.values.insert(cache.values.end(), out.data.begin(), out.data.end());
  }
  return cache;
}

Batch<float> gather(const PrefixCache& cache, std::span<const std::size_t> rows) {
  Batch<float> b(static_cast<int>(rows.size()), cache.c, cache.h, cache.w);
  const std::size_t per = cache.per_item();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(cache.values.begin() + static_cast<std::ptrdiff_t>(rows[i] * per), per, b.item(static_cast<int>(i)));
  }
  return b;
}

double cached_accuracy(const ConvClassifier& model, const PrefixCache& cache, const std::vector<int>& labels,
                       std::size_t first) {
  std::size_t correct = 0;
  for (std::size_t start = 0; start < labels.size(); start += kCacheBatch) {
    std::vector<std::size_t> rows(std::min(kCacheBatch, labels.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const auto logits = model.forward_logits(gather(cache, rows), first);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const int predicted = logits[2 * i + 1] > logits[2 * i] ? 1 : 0;
      correct += predicted == labels[rows[i]];
    }
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

void check_set(const TensorSet& set, const char* which) {
  if (set.size() == 0) throw Error(ErrorCode::invalid_argument, std::string(which) + " set is empty", which);
  if (set.labels.size() != set.size()) throw Error(ErrorCode::shape_mismatch, "inputs and labels differ in length");
  for (int y : set.labels) {
    if (y != 0 && y != 1) throw Error(ErrorCode::invalid_argument, "labels must be damage or non_damage", which);
  }
}

}  // namespace

TrainingResult train(ConvClassifier& model, const TensorSet& train_set, const TensorSet& val_set,
                     const TrainingConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  check_set(train_set, "train");
  check_set(val_set, "validation");

  const std::size_t first = model.first_trainable_layer();
  const PrefixCache train_cache = build_cache(model, train_set, first);
  const PrefixCache val_cache = build_cache(model, val_set, first);
  const std::vector<double> weights = {config.class_weights.non_damage, config.class_weights.damage};

  RmsProp optimizer(config.learning_rate, config.rho, config.epsilon);
  Rng rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainingResult result;
  result.best_val_acc = -1.0;
  std::vector<std::vector<float>> grads;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const auto rows = std::span<const std::size_t>(order).subspan(
          start, std::min<std::size_t>(config.batch_size, order.size() - start));
      std::vector<int> labels;
      for (auto r : rows) labels.push_back(train_set.labels[r]);

      ForwardRecord record;
      const auto logits = model.forward_logits(gather(train_cache, rows), first, &record);
      const auto probs = kernels::softmax<float>(logits, static_cast<int>(rows.size()), 2);
      std::vector<float> grad_logits;
      const double batch_loss = kernels::weighted_cross_entropy(probs, labels, 2, weights, &grad_logits);
      if (!std::isfinite(batch_loss)) {
        throw Error(ErrorCode::numeric, "training loss became " + std::to_string(batch_loss) + " at epoch " +
                                            std::to_string(epoch) + ", batch starting at " + std::to_string(start));
      }
      loss_sum += batch_loss;
      for (std::size_t i = 0; i < rows.size(); ++i) correct += (probs[2 * i + 1] > probs[2 * i] ? 1 : 0) == labels[i];

      for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0f);
      model.backward(record, grad_logits, grads);
      optimizer.step(model.parameters(), grads);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
    rec.val_acc = cached_accuracy(model, val_cache, val_set.labels, first);
    result.history.push_back(rec);
    if (rec.val_acc > result.best_val_acc) {
      result.best_val_acc = rec.val_acc;
      result.best_epoch = epoch;
      result.best_parameters.clear();
      for (const auto& p : model.parameters()) result.best_parameters.push_back(p.value);
      if (config.checkpoint_path) {
        save_checkpoint(*config.checkpoint_path, model, {epoch, rec.val_acc, config.to_json()});
      }
    }
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

double accuracy(const ConvClassifier& model, const TensorSet& set) {
  check_set(set, "evaluation");
  const auto probs = model.predict(set.inputs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) correct += (probs[i].p_damage > probs[i].p_non_damage ? 1 : 0) == set.labels[i];
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

void restore_parameters(ConvClassifier& model, const std::vector<std::vector<float>>& values) {
  auto& params = model.parameters();
  if (values.size() != params.size()) throw Error(ErrorCode::shape_mismatch, "parameter snapshot has wrong length");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (values[i].size() != params[i].value.size()) {
      throw Error(ErrorCode::shape_mismatch, "snapshot of " + params[i].name + " has wrong size", params[i].name);
    }
    params[i].value = values[i];
  }
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::string text = "epoch,train_loss,train_acc,val_acc\n";
  char line[128];
  for (const auto& r : history) {
    std::snprintf(line, sizeof line, "%d,%.6f,%.6f,%.6f\n", r.epoch, r.train_loss, r.train_acc, r.val_acc);
    text += line;
  }
  write_text(path, text);
}

}  // namespace dmgwatch::vision
