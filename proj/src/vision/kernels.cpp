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

#include "dmgwatch/vision/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <cblas.h>

#include "dmgwatch/core/error.hpp"

namespace dmgwatch::vision::kernels {

namespace {

// Upper bound on im2col scratch (elements) before the batch is processed in chunks.
constexpr std::size_t kColumnBudget = std::size_t{6} << 20;

inline CBLAS_TRANSPOSE trans(bool t) { return t ? CblasTrans : CblasNoTrans; }

inline void gemm(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda, const float* b, int ldb,
                 float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, trans(ta), trans(tb), m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

inline void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda, const double* b,
                 int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, trans(ta), trans(tb), m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

int chunk_size(int n, int k, int hw) {
  const std::size_t per_image = static_cast<std::size_t>(k) * hw;
  return std::clamp(static_cast<int>(kColumnBudget / std::max<std::size_t>(per_image, 1)), 1, n);
}

// cols[(ci*9 + ky*3 + kx)][img*hw + y*w + x] for images [first, first+count).
template <typename T>
void im2col(const Batch<T>& in, int first, int count, std::vector<T>& cols) {
  const int hw = in.h * in.w;
  const std::size_t stride = static_cast<std::size_t>(count) * hw;
  cols.assign(static_cast<std::size_t>(in.c) * 9 * stride, T(0));
  for (int img = 0; img < count; ++img) {
    const T* src = in.item(first + img);
    for (int ci = 0; ci < in.c; ++ci) {
      const T* plane = src + static_cast<std::size_t>(ci) * hw;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          T* row = cols.data() + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * stride +
                   static_cast<std::size_t>(img) * hw;
          const int dx = kx - 1;
          const int x_lo = std::max(0, -dx), x_hi = std::min(in.w, in.w - dx);
          for (int y = 0; y < in.h; ++y) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= in.h) continue;
            const T* src_row = plane + static_cast<std::size_t>(sy) * in.w;
            T* dst_row = row + static_cast<std::size_t>(y) * in.w;
            for (int x = x_lo; x < x_hi; ++x) dst_row[x] = src_row[x + dx];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const std::vector<T>& cols, int first, int count, Batch<T>& out) {
  const int hw = out.h * out.w;
  const std::size_t stride = static_cast<std::size_t>(count) * hw;
  for (int img = 0; img < count; ++img) {
    T* dst = out.item(first + img);
    for (int ci = 0; ci < out.c; ++ci) {
      T* plane = dst + static_cast<std::size_t>(ci) * hw;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const T* row = cols.data() + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * stride +
                         static_cast<std::size_t>(img) * hw;
          const int dx = kx - 1;
          const int x_lo = std::max(0, -dx), x_hi = std::min(out.w, out.w - dx);
          for (int y = 0; y < out.h; ++y) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= out.h) continue;
            T* dst_row = plane + static_cast<std::size_t>(sy) * out.w;
            const T* src_row = row + static_cast<std::size_t>(y) * out.w;
            for (int x = x_lo; x < x_hi; ++x) dst_row[x + dx] += src_row[x];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Batch<T> conv3x3_forward(const Batch<T>& input, std::span<const T> weight, std::span<const T> bias, int out_c,
                         bool relu) {
  const int k = input.c * 9;
  if (weight.size() != static_cast<std::size_t>(out_c) * k || bias.size() != static_cast<std::size_t>(out_c)) {
    throw Error(ErrorCode::shape_mismatch, "conv weight/bias shape does not match input channels");
  }
  Batch<T> output(input.n, out_c, input.h, input.w);
  const int hw = input.h * input.w;
  const int chunk = chunk_size(input.n, k, hw);
  std::vector<T> cols, tmp;
  for (int first = 0; first < input.n; first += chunk) {
    const int count = std::min(chunk, input.n - first);
    const int cols_n = count * hw;
    im2col(input, first, count, cols);
    tmp.resize(static_cast<std::size_t>(out_c) * cols_n);
    gemm(false, false, out_c, cols_n, k, T(1), weight.data(), k, cols.data(), cols_n, T(0), tmp.data(), cols_n);
    for (int img = 0; img < count; ++img) {
      T* dst = output.item(first + img);
      for (int co = 0; co < out_c; ++co) {
        const T* src = tmp.data() + static_cast<std::size_t>(co) * cols_n + static_cast<std::size_t>(img) * hw;
        T* plane = dst + static_cast<std::size_t>(co) * hw;
        const T b = bias[co];
        if (relu) {
          for (int p = 0; p < hw; ++p) plane[p] = std::max(T(0), src[p] + b);
        } else {
          for (int p = 0; p < hw; ++p) plane[p] = src[p] + b;
        }
      }
    }
  }
  return output;
}

template <typename T>
void conv3x3_backward(const Batch<T>& input, const Batch<T>& output, const Batch<T>& grad_output,
                      std::span<const T> weight, std::span<T> grad_weight, std::span<T> grad_bias, bool relu,
                      Batch<T>* grad_input) {
  const int out_c = output.c;
  const int k = input.c * 9;
  const int hw = input.h * input.w;
  if (grad_input) *grad_input = Batch<T>(input.n, input.c, input.h, input.w);
  const int chunk = chunk_size(input.n, k, hw);
  std::vector<T> cols, dz, dcols;
  for (int first = 0; first < input.n; first += chunk) {
    const int count = std::min(chunk, input.n - first);
    const int cols_n = count * hw;
    dz.resize(static_cast<std::size_t>(out_c) * cols_n);
    for (int img = 0; img < count; ++img) {
      const T* g = grad_output.item(first + img);
      const T* o = output.item(first + img);
      for (int co = 0; co < out_c; ++co) {
        T* dst = dz.data() + static_cast<std::size_t>(co) * cols_n + static_cast<std::size_t>(img) * hw;
        const std::size_t base = static_cast<std::size_t>(co) * hw;
        for (int p = 0; p < hw; ++p) dst[p] = (!relu || o[base + p] > T(0)) ? g[base + p] : T(0);
      }
    }
    for (int co = 0; co < out_c; ++co) {
      const T* row = dz.data() + static_cast<std::size_t>(co) * cols_n;
      T s = 0;
      for (int p = 0; p < cols_n; ++p) s += row[p];
      grad_bias[co] += s;
    }
    im2col(input, first, count, cols);
    gemm(false, true, out_c, k, cols_n, T(1), dz.data(), cols_n, cols.data(), cols_n, T(1), grad_weight.data(), k);
    if (grad_input) {
      dcols.resize(static_cast<std::size_t>(k) * cols_n);
      gemm(true, false, k, cols_n, out_c, T(1), weight.data(), k, dz.data(), cols_n, T(0), dcols.data(), cols_n);
      col2im_add(dcols, first, count, *grad_input);
    }
  }
}

template <typename T>
Batch<T> max_pool_forward(const Batch<T>& input) {
  Batch<T> out(input.n, input.c, input.h / 2, input.w / 2);
  for (int i = 0; i < input.n; ++i) {
    for (int c = 0; c < input.c; ++c) {
      const T* src = input.item(i) + static_cast<std::size_t>(c) * input.h * input.w;
      T* dst = out.item(i) + static_cast<std::size_t>(c) * out.h * out.w;
      for (int y = 0; y < out.h; ++y) {
        const T* r0 = src + static_cast<std::size_t>(2 * y) * input.w;
        const T* r1 = r0 + input.w;
        for (int x = 0; x < out.w; ++x) {
          dst[y * out.w + x] = std::max(std::max(r0[2 * x], r0[2 * x + 1]), std::max(r1[2 * x], r1[2 * x + 1]));
        }
      }
    }
  }
  return out;
}

template <typename T>
Batch<T> max_pool_backward(const Batch<T>& input, const Batch<T>& grad_output) {
  Batch<T> grad(input.n, input.c, input.h, input.w);
  const int oh = input.h / 2, ow = input.w / 2;
  for (int i = 0; i < input.n; ++i) {
    for (int c = 0; c < input.c; ++c) {
      const std::size_t in_off = static_cast<std::size_t>(c) * input.h * input.w;
      const T* src = input.item(i) + in_off;
      T* dst = grad.item(i) + in_off;
      const T* g = grad_output.item(i) + static_cast<std::size_t>(c) * oh * ow;
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          // First maximum in raster order receives the gradient.
          std::size_t best = static_cast<std::size_t>(2 * y) * input.w + 2 * x;
          for (std::size_t cand : {best + 1, best + input.w, best + input.w + 1}) {
            if (src[cand] > src[best]) best = cand;
          }
          dst[best] += g[y * ow + x];
        }
      }
    }
  }
  return grad;
}

template <typename T>
std::vector<T> dense_forward(std::span<const T> x, int n, int in, std::span<const T> weight, std::span<const T> bias,
                             int out, bool relu) {
  if (x.size() != static_cast<std::size_t>(n) * in || weight.size() != static_cast<std::size_t>(out) * in ||
      bias.size() != static_cast<std::size_t>(out)) {
    throw Error(ErrorCode::shape_mismatch, "dense layer shape mismatch");
  }
  std::vector<T> y(static_cast<std::size_t>(n) * out);
  gemm(false, true, n, out, in, T(1), x.data(), in, weight.data(), in, T(0), y.data(), out);
  for (int r = 0; r < n; ++r) {
    for (int o = 0; o < out; ++o) {
      T& v = y[static_cast<std::size_t>(r) * out + o];
      v += bias[o];
      if (relu && v < T(0)) v = T(0);
    }
  }
  return y;
}

template <typename T>
void dense_backward(std::span<const T> x, std::span<const T> output, std::span<const T> grad_output, int n, int in,
                    int out, std::span<const T> weight, std::span<T> grad_weight, std::span<T> grad_bias, bool relu,
                    std::vector<T>* grad_input) {
  std::vector<T> dz(grad_output.begin(), grad_output.end());
  if (relu) {
    for (std::size_t i = 0; i < dz.size(); ++i) {
      if (!(output[i] > T(0))) dz[i] = T(0);
    }
  }
  for (int r = 0; r < n; ++r) {
    for (int o = 0; o < out; ++o) grad_bias[o] += dz[static_cast<std::size_t>(r) * out + o];
  }
  gemm(true, false, out, in, n, T(1), dz.data(), out, x.data(), in, T(1), grad_weight.data(), in);
  if (grad_input) {
    grad_input->assign(static_cast<std::size_t>(n) * in, T(0));
    gemm(false, false, n, in, out, T(1), dz.data(), out, weight.data(), in, T(0), grad_input->data(), in);
  }
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits, int n, int classes) {
  std::vector<T> p(logits.begin(), logits.end());
  for (int r = 0; r < n; ++r) {
    T* row = p.data() + static_cast<std::size_t>(r) * classes;
    const T m = *std::max_element(row, row + classes);
    T sum = 0;
    for (int c = 0; c < classes; ++c) sum += (row[c] = std::exp(row[c] - m));
    for (int c = 0; c < classes; ++c) row[c] /= sum;
  }
  return p;
}

double weighted_cross_entropy(std::span<const float> probs, std::span<const int> labels, int classes,
                              std::span<const double> class_weights, std::vector<float>* grad_logits) {
  const int n = static_cast<int>(labels.size());
  if (probs.size() != static_cast<std::size_t>(n) * classes) {
    throw Error(ErrorCode::shape_mismatch, "probabilities and labels disagree in length");
  }
  // Clipped before the log, as Keras does.
  constexpr double kClip = 1e-7;
  double total = 0.0;
  if (grad_logits) grad_logits->assign(probs.size(), 0.0f);
  for (int r = 0; r < n; ++r) {
    const int y = labels[r];
    if (y < 0 || y >= classes) throw Error(ErrorCode::invalid_argument, "label outside class range");
    const double w = class_weights[static_cast<std::size_t>(y)];
    const double p = std::clamp(static_cast<double>(probs[static_cast<std::size_t>(r) * classes + y]), kClip, 1.0 - kClip);
    total += -w * std::log(p);
    if (grad_logits) {
      for (int c = 0; c < classes; ++c) {
        const double pc = probs[static_cast<std::size_t>(r) * classes + c];
        (*grad_logits)[static_cast<std::size_t>(r) * classes + c] =
            static_cast<float>(w * (pc - (c == y ? 1.0 : 0.0)) / n);
      }
    }
  }
  return total;
}

#define DMG_INSTANTIATE(T)                                                                                        \
  template Batch<T> conv3x3_forward<T>(const Batch<T>&, std::span<const T>, std::span<const T>, int, bool);       \
  template void conv3x3_backward<T>(const Batch<T>&, const Batch<T>&, const Batch<T>&, std::span<const T>,        \
                                    std::span<T>, std::span<T>, bool, Batch<T>*);                                 \
  template Batch<T> max_pool_forward<T>(const Batch<T>&);                                                         \
  template Batch<T> max_pool_backward<T>(const Batch<T>&, const Batch<T>&);                                       \
  template std::vector<T> dense_forward<T>(std::span<const T>, int, int, std::span<const T>, std::span<const T>,  \
                                           int, bool);                                                            \
  template void dense_backward<T>(std::span<const T>, std::span<const T>, std::span<const T>, int, int, int,      \
                                  std::span<const T>, std::span<T>, std::span<T>, bool, std::vector<T>*);         \
  template std::vector<T> softmax<T>(std::span<const T>, int, int);

DMG_INSTANTIATE(float)
DMG_INSTANTIATE(double)

#undef DMG_INSTANTIATE

}  // namespace dmgwatch::vision::kernels
