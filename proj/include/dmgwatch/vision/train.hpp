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
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmgwatch/corpus/types.hpp"
#include "dmgwatch/vision/model.hpp"

namespace dmgwatch::vision {

/// Class index used by the network: 0 = non_damage, 1 = damage.
int class_index(corpus::LabelValue value);

struct TensorSet {
  std::vector<InputTensor> inputs;
  std::vector<int> labels;

  std::size_t size() const noexcept { return inputs.size(); }
  void add(InputTensor tensor, int label) {
    inputs.push_back(std::move(tensor));
    labels.push_back(label);
  }
};

struct TrainingConfig {
  double learning_rate = 1e-5;
  int max_epochs = 20;
  int batch_size = 32;
  corpus::ClassWeights class_weights{1.0, 1.0};
  std::uint64_t seed = 0;
  double rho = 0.9;
  double epsilon = 1e-7;
  /// Written whenever validation accuracy improves, when set.
  std::optional<std::filesystem::path> checkpoint_path;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainingConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean weighted cross-entropy per example
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct TrainingResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_acc = 0.0;
  /// Parameter values at the best epoch, in ConvClassifier::parameters() order.
  std::vector<std::vector<float>> best_parameters;
};

/// RMSprop (Keras form): v = rho v + (1 - rho) g^2; p -= lr g / (sqrt(v) + eps).
/// Only trainable parameters are touched.
class RmsProp {
 public:
  RmsProp(double learning_rate, double rho = 0.9, double epsilon = 1e-7);
  void step(std::vector<Parameter>& params, const std::vector<std::vector<float>>& grads);

 private:
  double lr_, rho_, eps_;
  std::vector<std::vector<float>> mean_square_;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch training with per-epoch shuffling under config.seed. The loss of
/// an example of class c is scaled by the class weight of c. Activations
/// entering the first trainable layer are computed once and reused, since
/// nothing before that layer changes. Throws Error(numeric) on a NaN loss.
/// The model ends holding its final-epoch parameters; the best epoch's are in
/// the result.
TrainingResult train(ConvClassifier& model, const TensorSet& train_set, const TensorSet& val_set,
                     const TrainingConfig& config, const EpochCallback& on_epoch = {});

/// Fraction of examples whose argmax class matches the label.
double accuracy(const ConvClassifier& model, const TensorSet& set);

void restore_parameters(ConvClassifier& model, const std::vector<std::vector<float>>& values);

/// CSV "epoch,train_loss,train_acc,val_acc".
void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

}  // namespace dmgwatch::vision
