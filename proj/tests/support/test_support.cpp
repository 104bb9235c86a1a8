#include "test_support.hpp"

#include <algorithm>
#include <atomic>
#include <random>
#include <unistd.h>

namespace dmgwatch::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter.fetch_add(1)));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

vision::ArchitectureSpec tiny_spec(int side) {
  vision::ArchitectureSpec spec;
  spec.name = "tiny";
  spec.input_side = side;
  spec.blocks = {{1, 3}, {2, 4}};
  spec.hidden_units = 6;
  spec.freeze = {0, false};
  return spec;
}

vision::ConvClassifier tiny_model(std::uint64_t seed, int side) {
  vision::ConvClassifier m(tiny_spec(side));
  m.initialize(seed);
  return m;
}

vision::InputTensor random_input(int side, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(static_cast<std::size_t>(3) * side * side);
  for (auto& x : v) x = u(gen);
  return vision::InputTensor(side, std::move(v));
}

vision::FeatureStack random_features(int channels, int rows, int cols, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  vision::FeatureStack f;
  f.channels = channels;
  f.rows = rows;
  f.cols = cols;
  f.values.resize(static_cast<std::size_t>(channels) * rows * cols);
  for (auto& x : f.values) x = u(gen);
  return f;
}

vision::FeatureStack off_kink(vision::FeatureStack features, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.05, 0.15);
  for (auto& x : features.values) x += u(gen);
  return features;
}

namespace oracle {

ParamCount count_parameters(const vision::ArchitectureSpec& spec) {
  ParamCount pc;
  int side = spec.input_side;
  int channels = 3;
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const bool frozen = static_cast<int>(b) < spec.freeze.frozen_blocks;
    for (int j = 0; j < spec.blocks[b].conv_count; ++j) {
      const std::size_t n = 9u * channels * spec.blocks[b].filters + spec.blocks[b].filters;
      pc.total += n;
      if (!frozen) pc.trainable += n;
      channels = spec.blocks[b].filters;
    }
    pc.last_conv_side = side;
    pc.last_conv_channels = channels;
    side /= 2;
  }
  pc.flatten_width = static_cast<std::size_t>(channels) * side * side;
  std::size_t in = pc.flatten_width;
  std::size_t head = 0;
  if (spec.hidden_units > 0) {
    head += in * spec.hidden_units + spec.hidden_units;
    in = spec.hidden_units;
  }
  head += in * 2 + 2;
  pc.total += head;
  if (!spec.freeze.freeze_head) pc.trainable += head;
  return pc;
}

vision::FeatureStack finite_difference_gradient(const vision::ConvClassifier& model,
                                                const vision::FeatureStack& features, int class_index, double step) {
  vision::FeatureStack g = features;
  vision::FeatureStack probe = features;
  for (std::size_t i = 0; i < features.values.size(); ++i) {
    probe.values[i] = features.values[i] + step;
    const double up = model.head_logits(probe)[class_index];
    probe.values[i] = features.values[i] - step;
    const double down = model.head_logits(probe)[class_index];
    probe.values[i] = features.values[i];
    g.values[i] = (up - down) / (2.0 * step);
  }
  return g;
}

std::vector<double> brute_importance(const vision::FeatureStack& grads) {
  std::vector<double> alpha(grads.channels, 0.0);
  const double z = static_cast<double>(grads.rows) * grads.cols;
  for (int k = 0; k < grads.channels; ++k) {
    double sum = 0.0;
    for (int i = 0; i < grads.rows; ++i) {
      for (int j = 0; j < grads.cols; ++j) sum += grads.at(k, i, j);
    }
    alpha[k] = sum / z;
  }
  return alpha;
}

std::vector<double> brute_localization(const std::vector<double>& alpha, const vision::FeatureStack& stack) {
  std::vector<double> out(static_cast<std::size_t>(stack.rows) * stack.cols, 0.0);
  for (int i = 0; i < stack.rows; ++i) {
    for (int j = 0; j < stack.cols; ++j) {
      double s = 0.0;
      for (int k = 0; k < stack.channels; ++k) s += alpha[k] * stack.at(k, i, j);
      out[static_cast<std::size_t>(i) * stack.cols + j] = s > 0.0 ? s : 0.0;
    }
  }
  return out;
}

RationalMetrics rational_metrics(std::uint64_t tp, std::uint64_t fn, std::uint64_t fp, std::uint64_t tn) {
  auto frac = [](std::uint64_t num, std::uint64_t den) {
    return Fraction{static_cast<std::int64_t>(num), static_cast<std::int64_t>(den)};
  };
  RationalMetrics m;
  m.damage_p = frac(tp, tp + fp);
  m.damage_r = frac(tp, tp + fn);
  m.damage_f = frac(2 * tp, 2 * tp + fp + fn);
  m.non_p = frac(tn, tn + fn);
  m.non_r = frac(tn, tn + fp);
  m.non_f = frac(2 * tn, 2 * tn + fn + fp);
  // F needs both P and R, and P + R > 0.
  if (tp == 0 || !m.damage_p.defined() || !m.damage_r.defined()) m.damage_f.den = 0;
  if (tn == 0 || !m.non_p.defined() || !m.non_r.defined()) m.non_f.den = 0;
  return m;
}

eval::ConfusionMatrix count_confusion(const std::vector<double>& p_damage,
                                      const std::vector<corpus::LabelValue>& truths, double threshold) {
  eval::ConfusionMatrix m;
  for (std::size_t i = 0; i < p_damage.size(); ++i) {
    const bool predicted_damage = !(p_damage[i] < threshold);
    const bool is_damage = truths[i] == corpus::LabelValue::damage;
    if (is_damage && predicted_damage) ++m.tp;
    if (is_damage && !predicted_damage) ++m.fn;
    if (!is_damage && predicted_damage) ++m.fp;
    if (!is_damage && !predicted_damage) ++m.tn;
  }
  return m;
}

std::pair<double, double> balanced_weights(std::size_t n_non_damage, std::size_t n_damage) {
  const double total = static_cast<double>(n_non_damage + n_damage);
  return {total / (2.0 * static_cast<double>(n_non_damage)), total / (2.0 * static_cast<double>(n_damage))};
}

}  // namespace oracle

}  // namespace dmgwatch::testing
