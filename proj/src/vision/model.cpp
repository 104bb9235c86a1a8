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

#include "dmgwatch/vision/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/random.hpp"

namespace dmgwatch::vision {

using kernels::Batch;

namespace {

std::string shape_text(const std::vector<std::int64_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

void glorot_uniform(Rng& rng, std::vector<float>& values, double fan_in, double fan_out) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : values) v = static_cast<float>(rng.uniform(-limit, limit));
}

template <typename T>
std::span<const T> view(const std::vector<T>& v) {
  return {v.data(), v.size()};
}

std::vector<double> widen(const std::vector<float>& v) { return {v.begin(), v.end()}; }

}  // namespace

ArchitectureSpec ArchitectureSpec::vgg19_transfer(int input_side) {
  ArchitectureSpec s;
  s.name = "vgg19_transfer";
  s.input_side = input_side;
  s.blocks = {{2, 64}, {2, 128}, {4, 256}, {4, 512}, {4, 512}};
  s.hidden_units = 256;
  s.freeze = {4, false};
  return s;
}

ArchitectureSpec ArchitectureSpec::baseline_cnn(int input_side) {
  ArchitectureSpec s;
  s.name = "baseline_cnn";
  s.input_side = input_side;
  s.blocks = {{1, 32}, {1, 64}, {1, 128}, {1, 128}};
  s.hidden_units = 64;
  s.freeze = {0, false};
  return s;
}

nlohmann::json ArchitectureSpec::to_json() const {
  nlohmann::json blocks_json = nlohmann::json::array();
  for (const auto& b : blocks) blocks_json.push_back({b.conv_count, b.filters});
  return {{"name", name},
          {"input_side", input_side},
          {"blocks", blocks_json},
          {"hidden_units", hidden_units},
          {"frozen_blocks", freeze.frozen_blocks},
          {"freeze_head", freeze.freeze_head}};
}

ArchitectureSpec ArchitectureSpec::from_json(const nlohmann::json& j) {
  try {
    ArchitectureSpec s;
    s.name = j.at("name").get<std::string>();
    s.input_side = j.at("input_side").get<int>();
    for (const auto& b : j.at("blocks")) s.blocks.push_back({b.at(0).get<int>(), b.at(1).get<int>()});
    s.hidden_units = j.at("hidden_units").get<int>();
    s.freeze.frozen_blocks = j.value("frozen_blocks", 0);
    s.freeze.freeze_head = j.value("freeze_head", false);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("bad architecture description: ") + e.what());
  }
}

std::string conv_param_name(int block, int conv, bool kernel) {
  return "block" + std::to_string(block) + "_conv" + std::to_string(conv) + (kernel ? "/kernel" : "/bias");
}

ConvClassifier::ConvClassifier(ArchitectureSpec spec) : spec_(std::move(spec)) {
  if (spec_.blocks.empty()) throw Error(ErrorCode::invalid_argument, "architecture needs at least one block");
  if (spec_.input_side < 1) throw Error(ErrorCode::invalid_argument, "input side must be positive");

  auto add_param = [&](std::string name, std::vector<std::int64_t> shape) {
    std::int64_t count = 1;
    for (auto d : shape) count *= d;
    params_.push_back({std::move(name), std::move(shape), std::vector<float>(static_cast<std::size_t>(count)), true});
    return static_cast<int>(params_.size() - 1);
  };

  int c = 3, h = spec_.input_side, w = spec_.input_side;
  for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
    const int block = static_cast<int>(b) + 1;
    const auto& bs = spec_.blocks[b];
    if (bs.conv_count < 1 || bs.filters < 1) throw Error(ErrorCode::invalid_argument, "block needs convs and filters");
    for (int j = 1; j <= bs.conv_count; ++j) {
      LayerInfo l{LayerKind::conv, "block" + std::to_string(block) + "_conv" + std::to_string(j), block,
                  c, h, w, bs.filters, h, w};
      l.weight = add_param(conv_param_name(block, j, true), {bs.filters, c, 3, 3});
      l.bias = add_param(conv_param_name(block, j, false), {bs.filters});
      layers_.push_back(l);
      c = bs.filters;
    }
    if (h < 2 || w < 2) {
      throw Error(ErrorCode::shape_mismatch, "input side " + std::to_string(spec_.input_side) + " too small for " +
                                                 std::to_string(spec_.blocks.size()) + " pooling stages");
    }
    layers_.push_back({LayerKind::pool, "block" + std::to_string(block) + "_pool", block, c, h, w, c, h / 2, w / 2});
    h /= 2;
    w /= 2;
  }
  int width = c * h * w;
  if (spec_.hidden_units > 0) {
    LayerInfo l{LayerKind::dense_hidden, "dense_hidden", 0, width, 1, 1, spec_.hidden_units, 1, 1};
    l.weight = add_param("dense_hidden/kernel", {spec_.hidden_units, width});
    l.bias = add_param("dense_hidden/bias", {spec_.hidden_units});
    layers_.push_back(l);
    width = spec_.hidden_units;
  }
  LayerInfo out{LayerKind::dense_logits, "logits", 0, width, 1, 1, kClasses, 1, 1};
  out.weight = add_param("logits/kernel", {kClasses, width});
  out.bias = add_param("logits/bias", {kClasses});
  layers_.push_back(out);

  apply_freeze_policy(spec_.freeze);
}

Parameter* ConvClassifier::find_parameter(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ConvClassifier::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::size_t ConvClassifier::trainable_parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable) n += p.value.size();
  }
  return n;
}

void ConvClassifier::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& l : layers_) {
    if (l.weight < 0) continue;
    auto& wv = params_[l.weight].value;
    if (l.kind == LayerKind::conv) glorot_uniform(rng, wv, l.in_c * 9.0, l.out_c * 9.0);
    else glorot_uniform(rng, wv, l.in_c, l.out_c);
    std::fill(params_[l.bias].value.begin(), params_[l.bias].value.end(), 0.0f);
  }
}

void ConvClassifier::initialize_head(std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& l : layers_) {
    if (l.kind != LayerKind::dense_hidden && l.kind != LayerKind::dense_logits) continue;
    glorot_uniform(rng, params_[l.weight].value, l.in_c, l.out_c);
    std::fill(params_[l.bias].value.begin(), params_[l.bias].value.end(), 0.0f);
  }
}

void ConvClassifier::apply_freeze_policy(const FreezePolicy& policy) {
  spec_.freeze = policy;
  for (const auto& l : layers_) {
    if (l.weight < 0) continue;
    const bool frozen = l.kind == LayerKind::conv ? l.block <= policy.frozen_blocks : policy.freeze_head;
    params_[l.weight].trainable = !frozen;
    params_[l.bias].trainable = !frozen;
  }
}

std::size_t ConvClassifier::first_trainable_layer() const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].weight >= 0 && params_[layers_[i].weight].trainable) return i;
  }
  return layers_.size();
}

std::size_t ConvClassifier::last_conv_layer() const {
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (layers_[i].kind == LayerKind::conv) return i;
  }
  return 0;
}

Batch<float> ConvClassifier::to_batch(std::span<const InputTensor> inputs) const {
  const int side = spec_.input_side;
  Batch<float> batch(static_cast<int>(inputs.size()), 3, side, side);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].side() != side) {
      throw Error(ErrorCode::shape_mismatch, "model expects " + std::to_string(side) + "x" + std::to_string(side) +
                                                 "x3 input, got side " + std::to_string(inputs[i].side()));
    }
    std::copy(inputs[i].values().begin(), inputs[i].values().end(), batch.item(static_cast<int>(i)));
  }
  return batch;
}

Batch<float> ConvClassifier::forward(const Batch<float>& input, std::size_t first, std::size_t last,
                                     ForwardRecord* record) const {
  if (record) {
    record->first_layer = static_cast<int>(first);
    record->activations.clear();
  }
  Batch<float> x = input;
  for (std::size_t i = first; i < last; ++i) {
    const auto& l = layers_[i];
    if (x.c * x.h * x.w != l.in_c * l.in_h * l.in_w) {
      throw Error(ErrorCode::shape_mismatch, "activation shape does not fit layer " + l.name, l.name);
    }
    Batch<float> y;
    switch (l.kind) {
      case LayerKind::conv:
        y = kernels::conv3x3_forward<float>(x, view(params_[l.weight].value), view(params_[l.bias].value), l.out_c,
                                            true);
        break;
      case LayerKind::pool:
        y = kernels::max_pool_forward<float>(x);
        break;
      case LayerKind::dense_hidden:
      case LayerKind::dense_logits: {
        y = Batch<float>(x.n, l.out_c, 1, 1);
        y.data = kernels::dense_forward<float>(view(x.data), x.n, l.in_c, view(params_[l.weight].value),
                                               view(params_[l.bias].value), l.out_c,
                                               l.kind == LayerKind::dense_hidden);
        break;
      }
    }
    if (record) record->activations.push_back(std::move(x));
    x = std::move(y);
  }
  if (record) record->activations.push_back(x);
  return x;
}

std::vector<float> ConvClassifier::forward_logits(const Batch<float>& input, std::size_t first,
                                                  ForwardRecord* record) const {
  auto out = forward(input, first, layers_.size(), record);
  if (record) record->logits = out.data;
  return std::move(out.data);
}

void ConvClassifier::backward(const ForwardRecord& record, std::span<const float> grad_logits,
                              std::vector<std::vector<float>>& grads) const {
  const std::size_t first = static_cast<std::size_t>(record.first_layer);
  const std::size_t stop = std::max(first, first_trainable_layer());
  if (grads.size() != params_.size()) {
    grads.resize(params_.size());
  }
  for (std::size_t p = 0; p < params_.size(); ++p) {
    if (grads[p].size() != params_[p].value.size()) grads[p].assign(params_[p].value.size(), 0.0f);
  }

  const auto& top = record.activations.back();
  Batch<float> grad(top.n, top.c, top.h, top.w);
  std::copy(grad_logits.begin(), grad_logits.end(), grad.data.begin());

  for (std::size_t i = layers_.size(); i-- > stop;) {
    const auto& l = layers_[i];
    const auto& in = record.activations[i - first];
    const auto& out = record.activations[i - first + 1];
    const bool need_input_grad = i > stop;
    switch (l.kind) {
      case LayerKind::conv: {
        Batch<float> gin;
        kernels::conv3x3_backward<float>(in, out, grad, view(params_[l.weight].value), grads[l.weight],
                                         grads[l.bias], true, need_input_grad ? &gin : nullptr);
        grad = std::move(gin);
        break;
      }
      case LayerKind::pool:
        grad = kernels::max_pool_backward<float>(in, grad);
        break;
      case LayerKind::dense_hidden:
      case LayerKind::dense_logits: {
        std::vector<float> gin;
        kernels::dense_backward<float>(view(in.data), view(out.data), view(grad.data), in.n, l.in_c, l.out_c,
                                       view(params_[l.weight].value), grads[l.weight], grads[l.bias],
                                       l.kind == LayerKind::dense_hidden, need_input_grad ? &gin : nullptr);
        Batch<float> g(in.n, in.c, in.h, in.w);
        if (need_input_grad) g.data = std::move(gin);
        grad = std::move(g);
        break;
      }
    }
  }
}

namespace {

ClassProbabilities probabilities_from(double l0, double l1) {
  const double m = std::max(l0, l1);
  const double e0 = std::exp(l0 - m);
  const double e1 = std::exp(l1 - m);
  const double p_damage = e1 / (e0 + e1);
  return {1.0 - p_damage, p_damage};
}

constexpr std::size_t kInferenceBatch = 32;

}  // namespace

std::vector<ClassProbabilities> ConvClassifier::predict(std::span<const InputTensor> inputs) const {
  std::vector<ClassProbabilities> out;
  out.reserve(inputs.size());
  for (std::size_t start = 0; start < inputs.size(); start += kInferenceBatch) {
    const auto chunk = inputs.subspan(start, std::min(kInferenceBatch, inputs.size() - start));
    const auto logits = forward_logits(to_batch(chunk), 0);
    for (std::size_t i = 0; i < chunk.size(); ++i) out.push_back(probabilities_from(logits[2 * i], logits[2 * i + 1]));
  }
  return out;
}

ClassProbabilities ConvClassifier::predict(const InputTensor& input) const {
  return predict(std::span<const InputTensor>(&input, 1)).front();
}

std::array<double, 2> ConvClassifier::logits(const InputTensor& input) const {
  const auto l = forward_logits(to_batch(std::span<const InputTensor>(&input, 1)), 0);
  return {l[0], l[1]};
}

FeatureStack ConvClassifier::last_conv_activation(const InputTensor& input) const {
  const auto a = forward(to_batch(std::span<const InputTensor>(&input, 1)), 0, last_conv_layer() + 1);
  return {a.c, a.h, a.w, widen(a.data)};
}

std::array<double, 2> ConvClassifier::head_forward(const FeatureStack& features,
                                                   std::vector<std::vector<double>>* trace) const {
  const auto& target = layers_[last_conv_layer()];
  if (features.channels != target.out_c || features.rows != target.out_h || features.cols != target.out_w) {
    throw Error(ErrorCode::shape_mismatch, "feature stack does not match the last convolution layer");
  }
  Batch<double> x(1, features.channels, features.rows, features.cols);
  x.data = features.values;
  if (trace) trace->push_back(x.data);
  for (std::size_t i = last_conv_layer() + 1; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.kind == LayerKind::pool) {
      x = kernels::max_pool_forward<double>(x);
    } else {
      const auto wgt = widen(params_[l.weight].value);
      const auto bias = widen(params_[l.bias].value);
      Batch<double> y(1, l.out_c, 1, 1);
      y.data = kernels::dense_forward<double>(view(x.data), 1, l.in_c, view(wgt), view(bias), l.out_c,
                                              l.kind == LayerKind::dense_hidden);
      x = std::move(y);
    }
    if (trace) trace->push_back(x.data);
  }
  return {x.data[0], x.data[1]};
}

std::array<double, 2> ConvClassifier::head_logits(const FeatureStack& features) const {
  return head_forward(features, nullptr);
}

FeatureStack ConvClassifier::head_gradient(const FeatureStack& features, int class_index) const {
  if (class_index < 0 || class_index >= kClasses) throw Error(ErrorCode::invalid_argument, "class index out of range");
  std::vector<std::vector<double>> trace;
  head_forward(features, &trace);

  const std::size_t base = last_conv_layer() + 1;
  std::vector<double> grad(kClasses, 0.0);
  grad[class_index] = 1.0;
  for (std::size_t i = layers_.size(); i-- > base;) {
    const auto& l = layers_[i];
    const auto& in = trace[i - base];
    const auto& out = trace[i - base + 1];
    if (l.kind == LayerKind::pool) {
      Batch<double> xin(1, l.in_c, l.in_h, l.in_w);
      xin.data = in;
      Batch<double> g(1, l.out_c, l.out_h, l.out_w);
      g.data = grad;
      grad = kernels::max_pool_backward<double>(xin, g).data;
    } else {
      const auto wgt = widen(params_[l.weight].value);
      std::vector<double> gw(wgt.size()), gb(l.out_c), gin;
      kernels::dense_backward<double>(view(in), view(out), view(grad), 1, l.in_c, l.out_c, view(wgt), gw, gb,
                                      l.kind == LayerKind::dense_hidden, &gin);
      grad = std::move(gin);
    }
  }
  return {features.channels, features.rows, features.cols, std::move(grad)};
}

Digest128 ConvClassifier::checksum() const {
  std::vector<std::uint8_t> bytes;
  for (const auto& p : params_) {
    bytes.insert(bytes.end(), p.name.begin(), p.name.end());
    bytes.push_back(0);
    for (auto d : p.shape) {
      const auto* raw = reinterpret_cast<const std::uint8_t*>(&d);
      bytes.insert(bytes.end(), raw, raw + sizeof d);
    }
    const auto* raw = reinterpret_cast<const std::uint8_t*>(p.value.data());
    bytes.insert(bytes.end(), raw, raw + p.value.size() * sizeof(float));
  }
  return md5(bytes);
}

std::vector<LayerShape> shape_trace(const ConvClassifier& model) {
  std::vector<LayerShape> out;
  for (const auto& l : model.layers()) out.push_back({l.name, l.out_c, l.out_h, l.out_w});
  return out;
}

void load_backbone(ConvClassifier& model, const TensorArchive& backbone) {
  for (const auto& l : model.layers()) {
    if (l.kind != LayerKind::conv) continue;
    for (int idx : {l.weight, l.bias}) {
      Parameter& p = model.parameters()[idx];
      const NamedTensor* t = backbone.find(p.name);
      if (!t) throw Error(ErrorCode::shape_mismatch, "backbone weights lack tensor " + p.name, p.name);
      if (t->shape != p.shape) {
        throw Error(ErrorCode::shape_mismatch,
                    "backbone tensor " + p.name + " has shape " + shape_text(t->shape) + ", expected " +
                        shape_text(p.shape),
                    p.name);
      }
      p.value = t->values;
    }
  }
}

TensorArchive backbone_archive(const ConvClassifier& model) {
  TensorArchive a;
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : model.spec().blocks) blocks.push_back({b.conv_count, b.filters});
  a.metadata = {{"kind", "backbone"}, {"blocks", blocks}};
  for (const auto& l : model.layers()) {
    if (l.kind != LayerKind::conv) continue;
    for (int idx : {l.weight, l.bias}) {
      const auto& p = model.parameters()[idx];
      a.tensors.push_back({p.name, p.shape, p.value});
    }
  }
  return a;
}

ConvClassifier build_transfer_model(const std::filesystem::path& weights, int input_side, std::uint64_t head_seed) {
  ConvClassifier model(ArchitectureSpec::vgg19_transfer(input_side));
  load_backbone(model, read_archive(weights));
  model.initialize_head(head_seed);
  return model;
}

ConvClassifier build_random_transfer_model(std::uint64_t seed, int input_side) {
  ConvClassifier model(ArchitectureSpec::vgg19_transfer(input_side));
  model.initialize(seed);
  return model;
}

ConvClassifier build_baseline_cnn(std::uint64_t seed, int input_side) {
  ConvClassifier model(ArchitectureSpec::baseline_cnn(input_side));
  model.initialize(seed);
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const ConvClassifier& model, const CheckpointInfo& info) {
  TensorArchive a;
  a.metadata = {{"kind", "checkpoint"},
                {"architecture", model.spec().to_json()},
                {"epoch", info.epoch},
                {"validation_accuracy", info.validation_accuracy},
                {"config", info.config},
                {"checksum", model.checksum().hex()}};
  for (const auto& p : model.parameters()) a.tensors.push_back({p.name, p.shape, p.value});
  write_archive(path, a);
}

ConvClassifier load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
  const TensorArchive a = read_archive(path);
  if (a.metadata.value("kind", "") != "checkpoint") {
    throw Error(ErrorCode::parse, "not a model checkpoint: " + path.string(), path.string());
  }
  ConvClassifier model(ArchitectureSpec::from_json(a.metadata.at("architecture")));
  for (auto& p : model.parameters()) {
    const NamedTensor* t = a.find(p.name);
    if (!t || t->shape != p.shape) {
      throw Error(ErrorCode::shape_mismatch, "checkpoint tensor " + p.name + " missing or misshapen", p.name);
    }
    p.value = t->values;
  }
  if (info) {
    info->epoch = a.metadata.value("epoch", 0);
    info->validation_accuracy = a.metadata.value("validation_accuracy", 0.0);
    info->config = a.metadata.value("config", nlohmann::json::object());
  }
  return model;
}

}  // namespace dmgwatch::vision
