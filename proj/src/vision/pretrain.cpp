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

#include "dmgwatch/vision/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/random.hpp"
#include "dmgwatch/synth/synth.hpp"
#include "dmgwatch/vision/model.hpp"
#include "dmgwatch/vision/train.hpp"

namespace dmgwatch::vision {

using kernels::Batch;

namespace {

Batch<float> rows_of(const Batch<float>& all, std::span<const std::size_t> rows) {
  Batch<float> b(static_cast<int>(rows.size()), all.c, all.h, all.w);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(all.item(static_cast<int>(rows[i])), all.per_item(), b.item(static_cast<int>(i)));
  }
  return b;
}

// Applies the convs of one block (no pooling) to `x`, keeping every activation.
std::vector<Batch<float>> run_convs(const std::vector<Parameter>& params, const std::vector<int>& out_c,
                                    Batch<float> x) {
  std::vector<Batch<float>> acts;
  acts.push_back(std::move(x));
  for (std::size_t j = 0; j < out_c.size(); ++j) {
    acts.push_back(kernels::conv3x3_forward<float>(acts.back(), params[2 * j].value, params[2 * j + 1].value,
                                                   out_c[j], true));
  }
  return acts;
}

}  // namespace

nlohmann::json pretrain_stamp(const PretrainOptions& options) {
  return {{"task", "procedural_textures"}, {"side", options.side},         {"per_class", options.per_class},
          {"epochs_per_block", options.epochs_per_block}, {"learning_rate", options.learning_rate},
          {"batch_size", options.batch_size}, {"seed", options.seed}, {"conv_init", "he_uniform"}};
}

TensorArchive pretrain_backbone(const PretrainOptions& options, PretrainReport* report,
                                const PretrainProgress& progress) {
  if (options.epochs_per_block.size() != 5) {
    throw Error(ErrorCode::invalid_argument, "pretraining needs an epoch count for each of the five blocks");
  }
  ConvClassifier model(ArchitectureSpec::vgg19_transfer(options.side));
  model.initialize(options.seed);
  // He-uniform conv kernels.
  {
    Rng init(options.seed ^ 0x5DEECE66DULL);
    for (const auto& l : model.layers()) {
      if (l.kind != LayerKind::conv) continue;
      const double bound = std::sqrt(6.0 / (9.0 * l.in_c));
      for (auto& v : model.parameters()[l.weight].value) v = static_cast<float>(init.uniform(-bound, bound));
    }
  }

  constexpr int kClasses = synth::kTextureClasses;
  std::vector<InputTensor> inputs;
  std::vector<int> labels;
  for (int i = 0; i < options.per_class; ++i) {
    for (int c = 0; c < kClasses; ++c) {
      inputs.push_back(resize_normalize(synth::make_texture(c, options.side, options.seed * 100003 + i), options.side));
      labels.push_back(c);
    }
  }
  Batch<float> cache = model.to_batch(inputs);
  const std::size_t n = inputs.size();

  Rng rng(options.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto& layers = model.layers();

  for (int block = 1; block <= 5; ++block) {
    std::vector<Parameter> params;
    std::vector<int> out_c;
    std::vector<std::size_t> layer_ids;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].kind == LayerKind::conv && layers[i].block == block) {
        params.push_back(model.parameters()[layers[i].weight]);
        params.push_back(model.parameters()[layers[i].bias]);
        out_c.push_back(layers[i].out_c);
        layer_ids.push_back(i);
      }
    }
    const int channels = out_c.back();
    Parameter head_w{"probe/kernel", {kClasses, channels}, std::vector<float>(static_cast<std::size_t>(kClasses) * channels), true};
    Parameter head_b{"probe/bias", {kClasses}, std::vector<float>(kClasses, 0.0f), true};
    const double limit = std::sqrt(6.0 / (channels + kClasses));
    for (auto& v : head_w.value) v = static_cast<float>(rng.uniform(-limit, limit));
    params.push_back(std::move(head_w));
    params.push_back(std::move(head_b));
    for (auto& p : params) p.trainable = true;

    RmsProp optimizer(options.learning_rate);
    double last_acc = 0.0;
    for (int epoch = 1; epoch <= options.epochs_per_block[block - 1]; ++epoch) {
      rng.shuffle(order);
      double loss_sum = 0.0;
      std::size_t correct = 0;
      for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(options.batch_size)) {
        const auto rows = std::span<const std::size_t>(order).subspan(
            start, std::min<std::size_t>(options.batch_size, n - start));
        const int bn = static_cast<int>(rows.size());
        const auto acts = run_convs(params, out_c, rows_of(cache, rows));
        const Batch<float>& top = acts.back();
        const int hw = top.h * top.w;

        std::vector<float> pooled(static_cast<std::size_t>(bn) * channels);
        for (int i = 0; i < bn; ++i) {
          for (int c = 0; c < channels; ++c) {
            const float* m = top.item(i) + static_cast<std::size_t>(c) * hw;
            pooled[static_cast<std::size_t>(i) * channels + c] = std::accumulate(m, m + hw, 0.0f) / hw;
          }
        }
        const auto& hw_param = params[params.size() - 2];
        const auto& hb_param = params[params.size() - 1];
        const auto logits = kernels::dense_forward<float>(pooled, bn, channels, hw_param.value, hb_param.value,
                                                          kClasses, false);
        const auto probs = kernels::softmax<float>(logits, bn, kClasses);
        std::vector<int> batch_labels;
        for (auto r : rows) batch_labels.push_back(labels[r]);
        const std::vector<double> ones(kClasses, 1.0);
        std::vector<float> grad_logits;
        loss_sum += kernels::weighted_cross_entropy(probs, batch_labels, kClasses, ones, &grad_logits);
        for (int i = 0; i < bn; ++i) {
          const float* row = probs.data() + static_cast<std::size_t>(i) * kClasses;
          correct += static_cast<int>(std::max_element(row, row + kClasses) - row) == batch_labels[i];
        }

        std::vector<std::vector<float>> grads(params.size());
        for (std::size_t p = 0; p < params.size(); ++p) grads[p].assign(params[p].value.size(), 0.0f);
        std::vector<float> grad_pooled;
        kernels::dense_backward<float>(pooled, logits, grad_logits, bn, channels, kClasses, hw_param.value,
                                       grads[params.size() - 2], grads[params.size() - 1], false, &grad_pooled);
        Batch<float> grad(bn, top.c, top.h, top.w);
        for (int i = 0; i < bn; ++i) {
          for (int c = 0; c < channels; ++c) {
            float* g = grad.item(i) + static_cast<std::size_t>(c) * hw;
            std::fill(g, g + hw, grad_pooled[static_cast<std::size_t>(i) * channels + c] / hw);
          }
        }
        for (std::size_t j = out_c.size(); j-- > 0;) {
          Batch<float> gin;
          kernels::conv3x3_backward<float>(acts[j], acts[j + 1], grad, params[2 * j].value, grads[2 * j],
                                           grads[2 * j + 1], true, j > 0 ? &gin : nullptr);
          grad = std::move(gin);
        }
        optimizer.step(params, grads);
      }
      last_acc = static_cast<double>(correct) / static_cast<double>(n);
      if (!std::isfinite(loss_sum)) throw Error(ErrorCode::numeric, "pretraining loss diverged");
      if (progress) progress(block, epoch, loss_sum / static_cast<double>(n), last_acc);
    }
    if (report) report->block_accuracy.push_back(last_acc);

    for (std::size_t j = 0; j < layer_ids.size(); ++j) {
      model.parameters()[layers[layer_ids[j]].weight].value = params[2 * j].value;
      model.parameters()[layers[layer_ids[j]].bias].value = params[2 * j + 1].value;
    }
    if (block < 5) {
      Batch<float> next;
      for (std::size_t start = 0; start < n; start += 64) {
        std::vector<std::size_t> rows(std::min<std::size_t>(64, n - start));
        std::iota(rows.begin(), rows.end(), start);
        const auto acts = run_convs(params, out_c, rows_of(cache, rows));
        const auto pooled = kernels::max_pool_forward<float>(acts.back());
        if (start == 0) next = Batch<float>(static_cast<int>(n), pooled.c, pooled.h, pooled.w);
        std::copy(pooled.data.begin(), pooled.data.end(), next.item(static_cast<int>(start)));
      }
      cache = std::move(next);
    }
  }

  TensorArchive archive = backbone_archive(model);
  archive.metadata["source_task"] = "procedural_textures";
  archive.metadata["pretrain"] = pretrain_stamp(options);
  archive.metadata["source_side"] = options.side;
  archive.metadata["source_images"] = n;
  return archive;
}

}  // namespace dmgwatch::vision
