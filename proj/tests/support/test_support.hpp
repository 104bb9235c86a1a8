#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dmgwatch/corpus/types.hpp"
#include "dmgwatch/eval/eval.hpp"
#include "dmgwatch/vision/model.hpp"

namespace dmgwatch::testing {

/// Fresh directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "dmgwatch");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Two small blocks and a small head; cheap enough for finite differences.
vision::ArchitectureSpec tiny_spec(int side = 16);
vision::ConvClassifier tiny_model(std::uint64_t seed, int side = 16);

vision::InputTensor random_input(int side, std::uint64_t seed);
vision::FeatureStack random_features(int channels, int rows, int cols, std::uint64_t seed, double lo = 0.0,
                                     double hi = 1.0);
/// Adds a distinct positive offset to every activation: no pooling ties, no
/// units at a ReLU kink.
vision::FeatureStack off_kink(vision::FeatureStack features, std::uint64_t seed);

namespace oracle {

/// Parameter count walked from the architecture description with the
/// textbook formulas: 3x3 conv = 9 * in * out + out, 2x2/2 floor pooling,
/// dense = in * out + out.
struct ParamCount {
  std::size_t total = 0;
  std::size_t trainable = 0;
  int last_conv_side = 0;
  int last_conv_channels = 0;
  std::size_t flatten_width = 0;
};
ParamCount count_parameters(const vision::ArchitectureSpec& spec);

/// Central differences of head_logits[c] with respect to every feature.
vision::FeatureStack finite_difference_gradient(const vision::ConvClassifier& model,
                                                const vision::FeatureStack& features, int class_index,
                                                double step = 1e-5);

/// alpha_k = (1/Z) sum_i sum_j g[k][i][j] as explicit loops.
std::vector<double> brute_importance(const vision::FeatureStack& grads);
/// L[i][j] = max(0, sum_k alpha_k A[k][i][j]) as explicit loops.
std::vector<double> brute_localization(const std::vector<double>& alpha, const vision::FeatureStack& stack);

/// Exact precision/recall/F from a confusion matrix via integer fractions.
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;
  bool defined() const { return den != 0; }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};
struct RationalMetrics {
  Fraction damage_p, damage_r, damage_f, non_p, non_r, non_f;
};
RationalMetrics rational_metrics(std::uint64_t tp, std::uint64_t fn, std::uint64_t fp, std::uint64_t tn);

/// Confusion counted one example at a time with the >= rule.
eval::ConfusionMatrix count_confusion(const std::vector<double>& p_damage,
                                      const std::vector<corpus::LabelValue>& truths, double threshold);

/// (n_non + n_dmg) / (2 n_c), computed with integer numerators.
std::pair<double, double> balanced_weights(std::size_t n_non_damage, std::size_t n_damage);

}  // namespace oracle

}  // namespace dmgwatch::testing
