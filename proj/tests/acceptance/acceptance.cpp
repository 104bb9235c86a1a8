// One PASS/FAIL line per primary acceptance criterion. Tolerances are pinned
// below; the process exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dmgwatch/core/archive.hpp"
#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/io.hpp"
#include "dmgwatch/corpus/dataset.hpp"
#include "dmgwatch/dedup/dedup.hpp"
#include "dmgwatch/eval/eval.hpp"
#include "dmgwatch/gradcam/gradcam.hpp"
#include "dmgwatch/monitor/adapters.hpp"
#include "dmgwatch/monitor/pipeline.hpp"
#include "dmgwatch/monitor/store.hpp"
#include "dmgwatch/synth/synth.hpp"
#include "dmgwatch/vision/model.hpp"
#include "dmgwatch/vision/pretrain.hpp"
#include "dmgwatch/vision/train.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace dmgwatch;
namespace oracle = dmgwatch::testing::oracle;

namespace {

// Tolerances and budgets.
constexpr double kThreeDecimals = 5e-4;  // |x - reported| for values printed to 3 d.p.
constexpr double kMetricTimeBudgetS = 1.0;
constexpr double kWeightTol = 1e-4;
constexpr double kRationalTol = 1e-12;
constexpr double kFdRelTol = 1e-3;
constexpr double kBruteTol = 1e-9;
constexpr double kDedupTimeBudgetS = 10.0;
constexpr double kTrainingTimeBudgetS = 30.0 * 60.0;

// Desk-scale training setup (small-image CPU fallback).
constexpr int kTrainSide = 64;
constexpr int kScenesPerClass = 200;
constexpr int kTrainPerClass = 150;
constexpr int kTrainEpochs = 8;
constexpr double kTrainLr = 1e-4;
constexpr int kSeeds = 3;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

bool near(const eval::Metric& m, double expected, double tol) { return m && std::fabs(*m - expected) <= tol; }

// ------------------------------------------------------------------ 1
Outcome metric_math() {
  const auto t0 = std::chrono::steady_clock::now();
  struct Case {
    const char* name;
    eval::ConfusionMatrix m;
    double dp, dr;
    std::optional<double> np, nr;
  };
  const std::vector<Case> cases = {
      {"test_set_1", {301, 73, 88, 20342}, 0.774, 0.805, 0.996, 0.996},
      {"test_set_2", {160, 46, 9, 777}, 0.947, 0.777, std::nullopt, std::nullopt},
      {"baseline_test_1", {320, 52, 472, 23586}, 0.404, 0.860, std::nullopt, std::nullopt},
      {"baseline_test_2", {247, 125, 236, 23822}, 0.511, 0.664, std::nullopt, std::nullopt},
  };
  bool ok = true;
  std::ostringstream detail;
  for (const auto& c : cases) {
    const auto got = eval::precision_recall_f(c.m);
    const auto exact = oracle::rational_metrics(c.m.tp, c.m.fn, c.m.fp, c.m.tn);
    bool case_ok = near(got.damage.precision, c.dp, kThreeDecimals) && near(got.damage.recall, c.dr, kThreeDecimals);
    if (c.np) case_ok = case_ok && near(got.non_damage.precision, *c.np, kThreeDecimals);
    if (c.nr) case_ok = case_ok && near(got.non_damage.recall, *c.nr, kThreeDecimals);
    case_ok = case_ok && near(got.damage.precision, exact.damage_p.value(), kRationalTol) &&
              near(got.damage.recall, exact.damage_r.value(), kRationalTol) &&
              near(got.non_damage.precision, exact.non_p.value(), kRationalTol) &&
              near(got.non_damage.recall, exact.non_r.value(), kRationalTol);
    ok = ok && case_ok;
    detail << c.name << " P=" << fmt(*got.damage.precision, 3) << " R=" << fmt(*got.damage.recall, 3);
    if (c.np) detail << " nonP=" << fmt(*got.non_damage.precision, 3) << " nonR=" << fmt(*got.non_damage.recall, 3);
    detail << "; ";
  }
  const double elapsed = seconds_since(t0);
  ok = ok && elapsed < kMetricTimeBudgetS;
  detail << "time " << fmt(elapsed, 4) << "s";
  return {ok, detail.str()};
}

// ------------------------------------------------------------------ 2
Outcome class_weights() {
  const auto w = corpus::compute_class_weights(3684, 2872);
  const auto [o_non, o_dmg] = oracle::balanced_weights(3684, 2872);
  const bool ok = std::fabs(w.non_damage - 0.8897) <= kWeightTol && std::fabs(w.damage - 1.1414) <= kWeightTol &&
                  std::fabs(w.non_damage - o_non) <= 1e-12 && std::fabs(w.damage - o_dmg) <= 1e-12;
  return {ok, "non_damage=" + fmt(w.non_damage, 6) + " damage=" + fmt(w.damage, 6)};
}

// ------------------------------------------------------------------ 3
Outcome architecture_audit() {
  const auto spec = vision::ArchitectureSpec::vgg19_transfer(150);
  const vision::ConvClassifier model(spec);
  const auto expected = oracle::count_parameters(spec);
  const std::size_t trainable = model.trainable_parameter_count();
  const auto& last = model.layers()[model.last_conv_layer()];
  std::size_t flatten = 0;
  for (const auto& l : model.layers()) {
    if (l.kind == vision::LayerKind::dense_hidden) flatten = static_cast<std::size_t>(l.in_c) * l.in_h * l.in_w;
  }
  const bool ok = trainable == 11537154 && trainable == expected.trainable && last.out_h == 9 && last.out_w == 9 &&
                  last.out_c == 512 && flatten == 8192 && expected.flatten_width == 8192 &&
                  model.parameter_count() == expected.total;
  return {ok, "trainable=" + std::to_string(trainable) + " (oracle " + std::to_string(expected.trainable) +
                  ") last_conv=" + std::to_string(last.out_h) + "x" + std::to_string(last.out_w) + "x" +
                  std::to_string(last.out_c) + " flatten=" + std::to_string(flatten)};
}

// ------------------------------------------------------------------ 4
Outcome freeze_invariant() {
  // Real training steps on random data, at a small input side.
  vision::ConvClassifier model(vision::ArchitectureSpec::vgg19_transfer(32));
  model.initialize(11);
  const auto before = model.parameters();
  vision::TensorSet data;
  for (int i = 0; i < 4; ++i) data.add(testing::random_input(32, 100 + i), i % 2);
  vision::TrainingConfig cfg;
  cfg.batch_size = 2;
  cfg.max_epochs = 50;  // 2 batches per epoch -> 100 optimizer steps
  cfg.learning_rate = 1e-3;
  cfg.seed = 3;
  vision::train(model, data, data, cfg);

  // And 100 direct optimizer steps with non-zero gradients on every parameter.
  vision::ConvClassifier direct(vision::ArchitectureSpec::vgg19_transfer(32));
  direct.initialize(12);
  const auto direct_before = direct.parameters();
  vision::RmsProp opt(1e-2);
  std::mt19937 gen(5);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<std::vector<float>> grads;
  for (const auto& p : direct.parameters()) grads.emplace_back(p.value.size());
  for (int step = 0; step < 100; ++step) {
    for (auto& v : grads) {
      for (auto& x : v) x = g(gen);
    }
    opt.step(direct.parameters(), grads);
  }

  auto check = [](const std::vector<vision::Parameter>& a, const std::vector<vision::Parameter>& b, std::size_t& frozen,
                  std::size_t& moved) {
    bool ok = true;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const bool in_frozen_block = a[i].name.rfind("block", 0) == 0 && a[i].name[5] >= '1' && a[i].name[5] <= '4';
      const bool same = std::memcmp(a[i].value.data(), b[i].value.data(), a[i].value.size() * sizeof(float)) == 0;
      if (in_frozen_block) {
        ++frozen;
        ok = ok && same;
      } else if (!same) {
        ++moved;
      }
    }
    return ok;
  };
  std::size_t frozen = 0, moved = 0, frozen2 = 0, moved2 = 0;
  const bool ok1 = check(before, model.parameters(), frozen, moved);
  const bool ok2 = check(direct_before, direct.parameters(), frozen2, moved2);
  const bool ok = ok1 && ok2 && frozen == 24 && frozen2 == 24 && moved > 0 && moved2 > 0;
  return {ok, std::to_string(frozen) + " block 1-4 tensors bit-identical after 100 training steps and 100 "
                                       "adversarial optimizer steps; " +
                  std::to_string(moved) + "/" + std::to_string(moved2) + " trainable tensors moved"};
}

// ------------------------------------------------------------------ 5
Outcome gradcam_suite() {
  double worst_fd = 0.0, worst_weights = 0.0, worst_map = 0.0;
  double min_map = 0.0;
  bool upsample_exact = true;
  bool wired = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto model = testing::tiny_model(seed);
    const auto input = testing::random_input(16, 50 + seed);
    const auto features = model.last_conv_activation(input);
    for (int c = 0; c < 2; ++c) {
      const auto analytic = gradcam::feature_gradients(model, input, static_cast<gradcam::TargetClass>(c));
      // Finite differences at a nearby point off every max-pool tie and ReLU kink.
      const auto probe = testing::off_kink(features, seed);
      const auto at_probe = model.head_gradient(probe, c);
      wired = wired && analytic.values == model.head_gradient(features, c).values;
      const auto numeric = oracle::finite_difference_gradient(model, probe, c);
      double scale = 0.0;
      for (double v : numeric.values) scale = std::max(scale, std::fabs(v));
      for (std::size_t i = 0; i < analytic.values.size(); ++i) {
        const double err = std::fabs(at_probe.values[i] - numeric.values[i]) / std::max(scale, 1e-12);
        worst_fd = std::max(worst_fd, err);
      }
      const auto alpha = gradcam::importance_weights(analytic);
      const auto alpha_ref = oracle::brute_importance(analytic);
      for (std::size_t k = 0; k < alpha.size(); ++k) worst_weights = std::max(worst_weights, std::fabs(alpha[k] - alpha_ref[k]));
      const auto map = gradcam::localization_map(alpha, features);
      const auto map_ref = oracle::brute_localization(alpha, features);
      for (std::size_t i = 0; i < map.values.size(); ++i) {
        worst_map = std::max(worst_map, std::fabs(map.values[i] - map_ref[i]));
        min_map = std::min(min_map, map.values[i]);
      }
    }
  }
  // Random weights of both signs: maps must still be non-negative.
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto stack = testing::random_features(8, 5, 7, 1000 + trial, -1.0, 1.0);
    std::vector<double> alpha(8);
    for (auto& a : alpha) a = u(gen);
    min_map = std::min(min_map, gradcam::localization_map(alpha, stack).min());
  }
  for (double c : {0.0, 0.37, 5.0}) {
    gradcam::Map2D m{4, 6, std::vector<double>(24, c)};
    for (auto [r, k] : {std::pair{150, 150}, std::pair{9, 13}, std::pair{1, 1}}) {
      const auto up = gradcam::upsample_bilinear(m, r, k);
      upsample_exact = upsample_exact && std::all_of(up.values.begin(), up.values.end(), [&](double v) { return v == c; });
    }
  }
  const bool ok = worst_fd <= kFdRelTol && worst_weights <= kBruteTol && worst_map <= kBruteTol && min_map >= 0.0 &&
                  upsample_exact && wired;
  std::ostringstream d;
  d << "fd_rel_err=" << worst_fd << " weights_err=" << worst_weights << " map_err=" << worst_map << " min_map=" << min_map
    << " constant_upsample_exact=" << (upsample_exact ? "yes" : "no") << " wired=" << (wired ? "yes" : "no");
  return {ok, d.str()};
}

// ------------------------------------------------------------------ 6
Outcome dedup_fixture(const fs::path& work) {
  const fs::path dir = work / "dedup_fixture";
  fs::remove_all(dir);
  const auto fx = synth::write_dedup_fixture(dir, 2024);
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = dedup::dedupe_corpus(fx.records);
  const auto again = dedup::dedupe_corpus(result.kept);
  const double elapsed = seconds_since(t0);

  std::map<std::string, dedup::Removal> removed;
  for (const auto& r : result.removed) removed[r.image_id] = r;
  std::size_t exact_ok = 0, small_ok = 0, near_ok = 0;
  for (const auto& id : fx.exact_copies) exact_ok += removed.count(id) && removed[id].rule == dedup::RemovalRule::exact;
  for (const auto& id : fx.undersized) small_ok += removed.count(id) && removed[id].rule == dedup::RemovalRule::min_size;
  for (std::size_t i = 0; i < fx.near_copies.size(); ++i) {
    const auto it = removed.find(fx.near_copies[i]);
    near_ok += it != removed.end() && it->second.rule == dedup::RemovalRule::near &&
               it->second.cluster_rep == fx.unique_ids[10 + i];
  }
  std::size_t unique_removed = 0;
  for (const auto& id : fx.unique_ids) unique_removed += removed.count(id);
  const bool ok = fx.records.size() == 60 && exact_ok == fx.exact_copies.size() && fx.exact_copies.size() == 10 &&
                  small_ok == fx.undersized.size() && fx.undersized.size() == 5 && near_ok >= 4 &&
                  unique_removed == 0 && again.removed.empty() && again.kept.size() == result.kept.size() &&
                  elapsed < kDedupTimeBudgetS;
  return {ok, "exact " + std::to_string(exact_ok) + "/10, undersized " + std::to_string(small_ok) + "/5, near " +
                  std::to_string(near_ok) + "/5, uniques removed " + std::to_string(unique_removed) +
                  ", second pass removed " + std::to_string(again.removed.size()) + ", time " + fmt(elapsed, 2) + "s"};
}

// ------------------------------------------------------------------ 7
Outcome desk_training(const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path backbone_path = work / "backbone.dmgt";
  TensorArchive backbone;
  if (fs::exists(backbone_path)) backbone = read_archive(backbone_path);
  if (!backbone.metadata.contains("pretrain") || backbone.metadata["pretrain"] != vision::pretrain_stamp({})) {
    backbone = vision::pretrain_backbone({});
    write_archive(backbone_path, backbone);
  }
  const auto scenes = synth::write_scene_set(work / "scenes", kScenesPerClass, 160, 77);
  vision::TensorSet train_set, val_set;
  std::map<corpus::LabelValue, int> seen;
  for (const auto& s : scenes) {
    auto t = vision::resize_normalize(read_image(s.path), kTrainSide);
    (seen[s.label]++ < kTrainPerClass ? train_set : val_set).add(std::move(t), vision::class_index(s.label));
  }

  int direction_wins = 0;
  bool loss_ok = true, best_ok = true;
  std::ostringstream d;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    vision::TrainingConfig cfg;
    cfg.learning_rate = kTrainLr;
    cfg.max_epochs = kTrainEpochs;
    cfg.seed = static_cast<std::uint64_t>(seed);
    vision::ConvClassifier pre(vision::ArchitectureSpec::vgg19_transfer(kTrainSide));
    vision::load_backbone(pre, backbone);
    pre.initialize_head(seed);
    const auto rp = vision::train(pre, train_set, val_set, cfg);
    auto rnd = vision::build_random_transfer_model(seed, kTrainSide);
    const auto rr = vision::train(rnd, train_set, val_set, cfg);

    loss_ok = loss_ok && rp.history.size() >= 5 && rp.history[4].train_loss < rp.history[0].train_loss;
    for (const auto* r : {&rp, &rr}) {
      auto best = std::max_element(r->history.begin(), r->history.end(),
                                   [](const auto& a, const auto& b) { return a.val_acc < b.val_acc; });
      best_ok = best_ok && r->best_epoch == best->epoch && r->best_val_acc == best->val_acc;
    }
    const double a = rp.history.back().val_acc, b = rr.history.back().val_acc;
    if (a > b) ++direction_wins;
    d << "seed " << seed << ": pretrained " << fmt(a, 3) << " vs random " << fmt(b, 3) << " (loss "
      << fmt(rp.history[0].train_loss, 3) << "->" << fmt(rp.history[4].train_loss, 3) << ", best epoch "
      << rp.best_epoch << "); ";
  }
  const double elapsed = seconds_since(t0);
  const bool ok = loss_ok && best_ok && direction_wins * 2 > kSeeds && elapsed <= kTrainingTimeBudgetS;
  d << "wins " << direction_wins << "/" << kSeeds << ", loss decreasing " << (loss_ok ? "yes" : "no")
    << ", best-epoch selection " << (best_ok ? "ok" : "wrong") << ", time " << fmt(elapsed, 0) << "s";
  return {ok, d.str()};
}

// ------------------------------------------------------------------ 8
using ItemKey = std::tuple<std::string, std::string, std::string, std::string, double>;

std::set<ItemKey> item_set(const monitor::ItemStore& store) {
  std::set<ItemKey> out;
  for (const auto& it : store.all()) {
    out.emplace(it.image_id, it.post_id, it.content_digest, std::string(corpus::to_string(it.predicted)),
                it.probs.p_damage);
  }
  return out;
}

Outcome stream_replay(const fs::path& work) {
  const fs::path dir = work / "feed";
  fs::remove_all(dir);
  const auto fx = synth::write_feed_fixture(dir, 992, 208, 30);
  const auto model = vision::build_baseline_cnn(4, 64);

  monitor::MonitorConfig config;
  config.workers = 2;
  config.queue_capacity = 16;
  auto replay = [&](const std::string& name, std::set<std::size_t> drops, std::vector<std::chrono::milliseconds>* delays,
                    monitor::MonitorSummary* summary) {
    fs::remove_all(work / name);
    auto store = std::make_unique<monitor::ItemStore>(work / name);
    monitor::ReplayAdapter adapter(fx.feed, std::move(drops));
    monitor::MonitorOptions opts;
    opts.sleep = [delays](std::chrono::milliseconds d) {
      if (delays) delays->push_back(d);
    };
    *summary = monitor::run_monitor(adapter, config, model, *store, opts);
    return store;
  };
  monitor::MonitorSummary s1, s2, s3;
  std::vector<std::chrono::milliseconds> delays;
  const auto a = replay("replay_a", {}, nullptr, &s1);
  const auto b = replay("replay_b", {}, nullptr, &s2);
  const std::set<std::size_t> drops = {5, fx.posts / 3, fx.posts / 3 + 1, fx.posts - 2};
  const auto c = replay("replay_c", drops, &delays, &s3);

  const auto set_a = item_set(*a), set_b = item_set(*b), set_c = item_set(*c);
  const auto lo = std::chrono::milliseconds(static_cast<long>(config.reconnect.initial_delay.count() *
                                                              (1.0 - config.reconnect.jitter)));
  const auto hi = std::chrono::milliseconds(static_cast<long>(config.reconnect.initial_delay.count() *
                                                              (1.0 + config.reconnect.jitter) + 1));
  const bool delays_ok = delays.size() == drops.size() &&
                         std::all_of(delays.begin(), delays.end(), [&](auto d) { return d >= lo && d <= hi; });
  const bool ok = fx.raw_images == 1200 && fx.planted_duplicates == 208 && a->size() == 992 && set_a == set_b &&
                  set_a == set_c && s3.reconnects == drops.size() && delays_ok &&
                  s1.suppressed_exact + s1.suppressed_near == 208;
  std::ostringstream d;
  d << "raw " << fx.raw_images << ", planted " << fx.planted_duplicates << " -> items " << a->size() << " (exact "
    << s1.suppressed_exact << ", near " << s1.suppressed_near << " suppressed); replays identical "
    << (set_a == set_b ? "yes" : "no") << "; " << s3.reconnects << " reconnects for " << drops.size()
    << " injected drops, items after drops " << c->size() << (set_a == set_c ? " (same set)" : " (DIFFERENT)")
    << ", backoff within policy " << (delays_ok ? "yes" : "no");
  return {ok, d.str()};
}

// ------------------------------------------------------------------ 9
Outcome sweep_properties() {
  const auto rows = synth::make_scored_fixture(301, 73, 88, 20342, 17);
  std::vector<double> p;
  std::vector<corpus::LabelValue> t;
  for (const auto& r : rows) {
    p.push_back(r.p_damage);
    t.push_back(r.label == 1 ? corpus::LabelValue::damage : corpus::LabelValue::non_damage);
  }
  const auto thresholds = eval::even_thresholds(11);
  const auto s = eval::sweep(p, t, thresholds);
  bool monotone = s.points.size() == 11;
  for (std::size_t i = 1; i < s.points.size(); ++i) {
    const auto& prev = s.points[i - 1].metrics.damage.recall;
    const auto& cur = s.points[i].metrics.damage.recall;
    monotone = monotone && prev && cur && *cur <= *prev;
  }
  const auto at_half = std::find_if(s.points.begin(), s.points.end(), [](const auto& pt) { return pt.threshold == 0.5; });
  const auto single = eval::confusion(p, t, 0.5);
  const auto counted = oracle::count_confusion(p, t, 0.5);
  const bool same = at_half != s.points.end() && at_half->counts == single && single == counted &&
                    at_half->metrics == eval::precision_recall_f(single);
  std::ostringstream d;
  d << "damage recall non-increasing over 11 thresholds " << (monotone ? "yes" : "no") << "; sweep@0.5 = single-shot "
    << (same ? "yes" : "no") << " (tp " << single.tp << " fn " << single.fn << " fp " << single.fp << " tn "
    << single.tn << ")";
  return {monotone && same, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "dmgwatch_acceptance";
  std::string only;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--work-dir" && i + 1 < argc) work = argv[++i];
    if (std::string(argv[i]) == "--only" && i + 1 < argc) only = argv[++i];
  }
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric-math", metric_math},
      {"class-weights", class_weights},
      {"architecture-audit", architecture_audit},
      {"freeze-invariant", freeze_invariant},
      {"gradcam-correctness", gradcam_suite},
      {"dedup-fixture", [&] { return dedup_fixture(work); }},
      {"desk-training", [&] { return desk_training(work); }},
      {"stream-replay", [&] { return stream_replay(work); }},
      {"threshold-sweep", sweep_properties},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && only != name) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " | " << o.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
