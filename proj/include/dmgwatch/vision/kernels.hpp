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

#include <cstddef>
#include <span>
#include <vector>

namespace dmgwatch::vision::kernels {

/// NCHW activation batch.
template <typename T>
struct Batch {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Batch() = default;
  Batch(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_) {}

  std::size_t per_item() const { return static_cast<std::size_t>(c) * h * w; }
  T* item(int i) { return data.data() + per_item() * i; }
  const T* item(int i) const { return data.data() + per_item() * i; }
};

/// 3x3 convolution, stride 1, zero "same" padding, fused bias + optional ReLU.
/// weight: [out_c][in_c][3][3], bias: [out_c].
template <typename T>
Batch<T> conv3x3_forward(const Batch<T>& input, std::span<const T> weight, std::span<const T> bias, int out_c,
                         bool relu);

/// Backward of conv3x3_forward(relu=true). `output` is the forward result (used
/// as the ReLU mask); `grad_output` is dL/d(output). Accumulates into
/// grad_weight/grad_bias; fills grad_input when non-null.
template <typename T>
void conv3x3_backward(const Batch<T>& input, const Batch<T>& output, const Batch<T>& grad_output,
                      std::span<const T> weight, std::span<T> grad_weight, std::span<T> grad_bias, bool relu,
                      Batch<T>* grad_input);

/// 2x2 max pooling with stride 2 and floor semantics (odd trailing rows/cols dropped).
template <typename T>
Batch<T> max_pool_forward(const Batch<T>& input);

template <typename T>
Batch<T> max_pool_backward(const Batch<T>& input, const Batch<T>& grad_output);

/// Fully connected: out[n][o] = sum_i x[n][i] * W[o][i] + b[o].
template <typename T>
std::vector<T> dense_forward(std::span<const T> x, int n, int in, std::span<const T> weight, std::span<const T> bias,
                             int out, bool relu);

/// Backward of dense_forward. `output` is the forward result (ReLU mask when relu).
template <typename T>
void dense_backward(std::span<const T> x, std::span<const T> output, std::span<const T> grad_output, int n, int in,
                    int out, std::span<const T> weight, std::span<T> grad_weight, std::span<T> grad_bias, bool relu,
                    std::vector<T>* grad_input);

/// Row-wise numerically stable softmax.
template <typename T>
std::vector<T> softmax(std::span<const T> logits, int n, int classes);

/// Sum over examples of class_weight[label] * -log p[label]. When grad_logits is
/// non-null it receives d(loss / n)/d(logits), i.e. the batch-mean gradient.
double weighted_cross_entropy(std::span<const float> probs, std::span<const int> labels, int classes,
                              std::span<const double> class_weights, std::vector<float>* grad_logits);

}  // namespace dmgwatch::vision::kernels
