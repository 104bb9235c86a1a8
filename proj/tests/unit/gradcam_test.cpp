#include <gtest/gtest.h>

#include <random>

#include "dmgwatch/core/archive.hpp"
#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/io.hpp"
#include "dmgwatch/gradcam/gradcam.hpp"
#include "dmgwatch/synth/synth.hpp"
#include "test_support.hpp"

using namespace dmgwatch;
using namespace dmgwatch::gradcam;
using dmgwatch::testing::TempDir;
namespace support = dmgwatch::testing;
namespace oracle = dmgwatch::testing::oracle;

TEST(FeatureGradients, MatchFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto model = support::tiny_model(seed);
    const auto x = support::random_input(16, seed * 7);
    const auto features = support::off_kink(model.last_conv_activation(x), seed);
    for (auto c : {TargetClass::non_damage, TargetClass::damage}) {
      const auto g = model.head_gradient(features, static_cast<int>(c));
      const auto fd = oracle::finite_difference_gradient(model, features, static_cast<int>(c));
      ASSERT_EQ(g.values.size(), fd.values.size());
      double scale = 1e-12;
      for (double v : fd.values) scale = std::max(scale, std::abs(v));
      for (std::size_t i = 0; i < g.values.size(); ++i) EXPECT_LE(std::abs(g.values[i] - fd.values[i]) / scale, 1e-3);
    }
  }
}

TEST(FeatureGradients, TakenAtTheLastConvActivation) {
  const auto model = support::tiny_model(6);
  const auto x = support::random_input(16, 8);
  EXPECT_EQ(feature_gradients(model, x, TargetClass::damage).values,
            model.head_gradient(model.last_conv_activation(x), 1).values);
}

TEST(FeatureGradients, ClassGradientsAreNotIdentical) {
  const auto model = support::tiny_model(2);
  const auto x = support::random_input(16, 3);
  EXPECT_NE(feature_gradients(model, x, TargetClass::damage).values,
            feature_gradients(model, x, TargetClass::non_damage).values);
}

TEST(Importance, MatchesLoopOracle) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto g = support::random_features(7, 3, 5, s, -2.0, 2.0);
    const auto a = importance_weights(g);
    const auto b = oracle::brute_importance(g);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
  }
}

TEST(Localization, MatchesLoopOracleAndIsNonNegative) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto stack = support::random_features(6, 4, 3, s, -1.0, 1.0);
    std::vector<double> alpha(6);
    for (auto& a : alpha) a = u(gen);
    const auto map = localization_map(alpha, stack);
    const auto want = oracle::brute_localization(alpha, stack);
    ASSERT_EQ(map.rows, 4);
    ASSERT_EQ(map.cols, 3);
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(map.values[i], want[i], 1e-12);
    EXPECT_GE(map.min(), 0.0);
  }
  EXPECT_THROW(localization_map({1.0}, support::random_features(2, 2, 2, 1)), Error);
}

TEST(Localization, AllNegativeEvidenceGivesZeroMap) {
  const auto stack = support::random_features(3, 4, 4, 9, 0.0, 1.0);
  const auto map = localization_map({-1.0, -0.5, -2.0}, stack);
  EXPECT_EQ(map.max(), 0.0);
}

TEST(Upsample, ConstantMapsStayExact) {
  for (double c : {0.0, 0.1, 3.7}) {
    const Map2D m{3, 5, std::vector<double>(15, c)};
    for (auto [r, k] : {std::pair{150, 150}, std::pair{7, 11}, std::pair{1, 1}, std::pair{3, 5}}) {
      for (double v : upsample_bilinear(m, r, k).values) EXPECT_EQ(v, c);
    }
  }
}

TEST(Upsample, CornerAlignedAndReproducesLinearRamps) {
  Map2D m{4, 4, {}};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) m.values.push_back(2.0 * i + 3.0 * j);
  }
  const auto up = upsample_bilinear(m, 10, 13);
  EXPECT_DOUBLE_EQ(up.at(0, 0), m.at(0, 0));
  EXPECT_DOUBLE_EQ(up.at(9, 12), m.at(3, 3));
  EXPECT_DOUBLE_EQ(up.at(0, 12), m.at(0, 3));
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 13; ++j) EXPECT_NEAR(up.at(i, j), 2.0 * i * 3.0 / 9.0 + 3.0 * j * 3.0 / 12.0, 1e-12);
  }
  EXPECT_THROW(upsample_bilinear(Map2D{}, 3, 3), Error);
}

TEST(Upsample, StaysWithinSourceRange) {
  const auto src = support::random_features(1, 5, 4, 12, 0.0, 10.0);
  const Map2D m{5, 4, src.values};
  const auto up = upsample_bilinear(m, 33, 29);
  EXPECT_GE(up.min(), m.min());
  EXPECT_LE(up.max(), m.max());
}

TEST(Overlay, BlendAndTitle) {
  const Image img(6, 4, 3, 200);
  const Map2D zero{4, 6, std::vector<double>(24, 0.0)};
  const auto same = render_overlay(img, zero, TargetClass::damage, 0.8, std::nullopt, 0.0);
  EXPECT_EQ(same.image, img);
  const auto o = render_overlay(img, zero, TargetClass::damage, 0.8, std::string("damage"));
  // Inferno at level 0 is near black, so the blend darkens by about beta.
  EXPECT_NEAR(o.image.at(0, 0, 0), 0.6 * 200, 3);
  EXPECT_NE(o.title.find("truth damage"), std::string::npos);
  EXPECT_NE(o.title.find("estimated damage"), std::string::npos);
  const auto n = render_overlay(img, zero, TargetClass::non_damage, 0.2);
  EXPECT_NE(n.title.find("estimated damage"), std::string::npos);
  EXPECT_THROW(render_overlay(img, Map2D{2, 2, std::vector<double>(4)}, TargetClass::damage, 0.5), Error);
  EXPECT_THROW(render_overlay(img, zero, TargetClass::damage, 0.5, std::nullopt, 1.5), Error);
}

TEST(Explain, ConsistentWithModelAndSavesArtifacts) {
  const auto model = support::tiny_model(11);
  const Image img = synth::make_scene(true, 40, 30, 2);
  const auto e = explain(model, img, true, std::string("damage"));
  const auto direct = model.predict(vision::resize_normalize(img, 16));
  EXPECT_NEAR(e.probabilities.p_damage, direct.p_damage, 1e-5);
  ASSERT_EQ(e.classes.size(), 2u);
  const auto features = model.last_conv_activation(vision::resize_normalize(img, 16));
  for (const auto& ce : e.classes) {
    EXPECT_EQ(ce.map.rows, features.rows);
    EXPECT_EQ(ce.map.cols, features.cols);
    EXPECT_EQ(ce.upsampled.rows, 16);
    EXPECT_EQ(ce.overlay.image.width, 40);
    EXPECT_EQ(ce.overlay.image.height, 30);
    EXPECT_GE(ce.map.min(), 0.0);
  }
  EXPECT_EQ(explain(model, img, false).classes.size(), 1u);

  TempDir dir("explain");
  const auto files = save_explanation(dir.path(), "img1", e, model.checksum().hex());
  EXPECT_EQ(files.size(), 6u);
  int rows = 0, cols = 0;
  const auto values = read_npy(dir / "img1_damage.npy", rows, cols);
  EXPECT_EQ(rows, e.classes[0].map.rows);
  EXPECT_EQ(cols, e.classes[0].map.cols);
  for (std::size_t i = 0; i < values.size(); ++i) EXPECT_FLOAT_EQ(values[i], e.classes[0].map.values[i]);
  const auto sidecar = nlohmann::json::parse(read_text(dir / "img1_non_damage.json"));
  EXPECT_EQ(sidecar["class"], "non_damage");
  EXPECT_EQ(sidecar["model_checksum"], model.checksum().hex());
  EXPECT_EQ(decode_image(read_file(dir / "img1_damage_overlay.png")), e.classes[0].overlay.image);
}

TEST(TargetClass, ParseRoundTrip) {
  EXPECT_EQ(parse_target_class("damage"), TargetClass::damage);
  EXPECT_EQ(parse_target_class(to_string(TargetClass::non_damage)), TargetClass::non_damage);
  EXPECT_THROW(parse_target_class("excluded"), Error);
}
