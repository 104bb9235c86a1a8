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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmgwatch/core/archive.hpp"
#include "dmgwatch/core/digest.hpp"
#include "dmgwatch/vision/kernels.hpp"
#include "dmgwatch/vision/tensor.hpp"

namespace dmgwatch::vision {

struct ConvBlockSpec {
  int conv_count = 1;
  int filters = 64;

  friend bool operator==(const ConvBlockSpec&, const ConvBlockSpec&) = default;
};

/// Which parameters receive updates. Blocks are 1-based in names but the
/// policy counts them: `frozen_blocks = 4` locks blocks 1-4.
struct FreezePolicy {
  int frozen_blocks = 0;
  bool freeze_head = false;

  friend bool operator==(const FreezePolicy&, const FreezePolicy&) = default;
};

/// Conv blocks (3x3 same-padded convs + ReLU, then 2x2/2 floor max-pool),
/// flatten, optional dense+ReLU hidden layer, 2-way dense logits, softmax.
struct ArchitectureSpec {
  std::string name;
  int input_side = kInputSide;
  std::vector<ConvBlockSpec> blocks;
  int hidden_units = 256;
  FreezePolicy freeze;

  /// Five VGG19 blocks [(2,64),(2,128),(4,256),(4,512),(4,512)], dense-256,
  /// blocks 1-4 frozen.
  static ArchitectureSpec vgg19_transfer(int input_side = kInputSide);
  /// Four single-conv blocks with filters 32-64-128-128 and dense-64, all trainable.
  static ArchitectureSpec baseline_cnn(int input_side = kInputSide);

  nlohmann::json to_json() const;
  static ArchitectureSpec from_json(const nlohmann::json& j);

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

struct Parameter {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> value;
  bool trainable = true;
};

enum class LayerKind { conv, pool, dense_hidden, dense_logits };

struct LayerInfo {
  LayerKind kind;
  std::string name;
  int block = 0;  // 1-based for conv/pool, 0 for head layers
  int in_c = 0, in_h = 0, in_w = 0;
  int out_c = 0, out_h = 0, out_w = 0;
  int weight = -1, bias = -1;  // parameter indices
};

/// Pre-softmax activations at the last convolutional layer of one image,
/// channel-major: values[k * (u * v) + i * v + j].
struct FeatureStack {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  double at(int k, int i, int j) const { return values[(static_cast<std::size_t>(k) * rows + i) * cols + j]; }
};

/// Intermediate activations kept by a recorded forward pass.
struct ForwardRecord {
  int first_layer = 0;
  std::vector<kernels::Batch<float>> activations;  // activations[i] is the input of layer first_layer + i
  std::vector<float> logits;
};

class ConvClassifier {
 public:
  static constexpr int kClasses = 2;

  explicit ConvClassifier(ArchitectureSpec spec);

  const ArchitectureSpec& spec() const noexcept { return spec_; }
  const std::vector<LayerInfo>& layers() const noexcept { return layers_; }
  std::vector<Parameter>& parameters() noexcept { return params_; }
  const std::vector<Parameter>& parameters() const noexcept { return params_; }
  Parameter* find_parameter(const std::string& name);

  std::size_t parameter_count() const;
  std::size_t trainable_parameter_count() const;

  /// Glorot-uniform weights and zero biases for every layer.
  void initialize(std::uint64_t seed);
  /// Glorot-uniform weights and zero biases for the dense head only.
  void initialize_head(std::uint64_t seed);
  /// Re-derives each parameter's trainable flag from the spec's freeze policy.
  void apply_freeze_policy(const FreezePolicy& policy);

  /// Index of the first layer with a trainable parameter, or layers().size().
  std::size_t first_trainable_layer() const;
  /// Index of the last convolution layer (the Grad-CAM target).
  std::size_t last_conv_layer() const;

  ClassProbabilities predict(const InputTensor& input) const;
  std::vector<ClassProbabilities> predict(std::span<const InputTensor> inputs) const;
  std::array<double, 2> logits(const InputTensor& input) const;

  kernels::Batch<float> to_batch(std::span<const InputTensor> inputs) const;
  /// Runs layers [first, last) on `input`. When `record` is set the inputs of
  /// every layer are kept for backward().
  kernels::Batch<float> forward(const kernels::Batch<float>& input, std::size_t first, std::size_t last,
                                ForwardRecord* record = nullptr) const;
  /// Logits for a batch starting at layer `first`.
  std::vector<float> forward_logits(const kernels::Batch<float>& input, std::size_t first,
                                    ForwardRecord* record = nullptr) const;
  /// Accumulates parameter gradients (indexed like parameters()) from
  /// dL/dlogits, walking back to the first trainable layer at or after
  /// record.first_layer.
  void backward(const ForwardRecord& record, std::span<const float> grad_logits,
                std::vector<std::vector<float>>& grads) const;

  /// Activations of the last conv layer (post-ReLU, pre-pool) for one image.
  FeatureStack last_conv_activation(const InputTensor& input) const;
  /// Logits computed from a last-conv activation stack, in double precision.
  std::array<double, 2> head_logits(const FeatureStack& features) const;
  /// d logit[class_index] / d features, in double precision.
  FeatureStack head_gradient(const FeatureStack& features, int class_index) const;

  /// MD5 over parameter names, shapes and values in order.
  Digest128 checksum() const;

 private:
  std::array<double, 2> head_forward(const FeatureStack& features, std::vector<std::vector<double>>* trace) const;

  ArchitectureSpec spec_;
  std::vector<LayerInfo> layers_;
  std::vector<Parameter> params_;
};

/// Layer-by-layer output shapes, for auditing the spatial trace.
struct LayerShape {
  std::string name;
  int channels, height, width;
};
std::vector<LayerShape> shape_trace(const ConvClassifier& model);

/// Parameter name convention shared by backbone weight files and checkpoints:
/// "block{b}_conv{j}/kernel" [out, in, 3, 3] and "/bias" [out]; head layers
/// "dense_hidden/..." and "logits/...".
std::string conv_param_name(int block, int conv, bool kernel);

/// Loads block weights from a backbone archive into `model`, validating every
/// tensor's presence and shape against the architecture.
void load_backbone(ConvClassifier& model, const TensorArchive& backbone);
TensorArchive backbone_archive(const ConvClassifier& model);

/// VGG19-shaped transfer model: pretrained blocks from `weights`, Glorot head
/// (seeded), blocks 1-4 frozen.
ConvClassifier build_transfer_model(const std::filesystem::path& weights, int input_side = kInputSide,
                                    std::uint64_t head_seed = 0);
/// Identically shaped model with every layer randomly initialized.
ConvClassifier build_random_transfer_model(std::uint64_t seed, int input_side = kInputSide);
ConvClassifier build_baseline_cnn(std::uint64_t seed, int input_side = kInputSide);

struct CheckpointInfo {
  int epoch = 0;
  double validation_accuracy = 0.0;
  nlohmann::json config = nlohmann::json::object();
};

void save_checkpoint(const std::filesystem::path& path, const ConvClassifier& model, const CheckpointInfo& info);
ConvClassifier load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

}  // namespace dmgwatch::vision
