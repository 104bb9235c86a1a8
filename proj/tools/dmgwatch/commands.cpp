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

#include "commands.hpp"

#include <algorithm>
#include <csignal>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include "dmgwatch/core/archive.hpp"
#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/io.hpp"
#include "dmgwatch/corpus/dataset.hpp"
#include "dmgwatch/corpus/fetch.hpp"
#include "dmgwatch/corpus/manifest.hpp"
#include "dmgwatch/dedup/dedup.hpp"
#include "dmgwatch/eval/eval.hpp"
#include "dmgwatch/gradcam/gradcam.hpp"
#include "dmgwatch/monitor/adapters.hpp"
#include "dmgwatch/monitor/api.hpp"
#include "dmgwatch/monitor/pipeline.hpp"
#include "dmgwatch/monitor/store.hpp"
#include "dmgwatch/vision/model.hpp"
#include "dmgwatch/vision/pretrain.hpp"
#include "dmgwatch/vision/train.hpp"

namespace dmgwatch::cli {

namespace fs = std::filesystem;
using nlohmann::json;

json Context::section(const std::string& name) const {
  if (config.empty()) return json::object();
  if (record) record->add_input("config", config);
  json doc;
  try {
    doc = json::parse(read_text(config));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("bad config file: ") + e.what(), config);
  }
  return doc.contains(name) ? doc[name] : json::object();
}

fs::path Context::out() const {
  fs::create_directories(out_dir);
  return out_dir;
}

namespace {

json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, "bad JSON in " + path.string() + ": " + e.what(), path.string());
  }
}

/// `override` wins key by key over `base`.
json merged(json base, const json& override) {
  if (!base.is_object()) base = json::object();
  for (const auto& [k, v] : override.items()) base[k] = v;
  return base;
}

fs::path resolve_entry(const fs::path& manifest_dir, const std::string& url) {
  if (url.rfind("http://", 0) == 0 || url.rfind("https://", 0) == 0) {
    throw Error(ErrorCode::invalid_argument, "remote URL in manifest; run 'corpus fetch' first", url);
  }
  fs::path p = url.rfind("file://", 0) == 0 ? fs::path(url.substr(7)) : fs::path(url);
  return p.is_relative() ? manifest_dir / p : p;
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

struct NamedImage {
  std::string id;
  fs::path path;
  std::optional<corpus::LabelValue> label;
};

/// Images named by a directory (id = file stem) or a manifest CSV.
std::vector<NamedImage> list_images(const fs::path& source) {
  std::vector<NamedImage> out;
  if (fs::is_directory(source)) {
    for (const auto& e : fs::directory_iterator(source)) {
      if (e.is_regular_file() && is_image_file(e.path())) out.push_back({e.path().stem().string(), e.path(), {}});
    }
    std::sort(out.begin(), out.end(), [](const NamedImage& a, const NamedImage& b) { return a.id < b.id; });
    return out;
  }
  const auto manifest = corpus::load_manifest(source);
  for (const auto& e : manifest.entries) out.push_back({e.image_id, resolve_entry(source.parent_path(), e.url), e.label});
  return out;
}

vision::TensorSet load_tensor_set(const fs::path& manifest, int side) {
  vision::TensorSet set;
  for (const auto& img : list_images(manifest)) {
    if (!img.label || *img.label == corpus::LabelValue::excluded) continue;
    set.add(vision::resize_normalize(read_image(img.path), side), vision::class_index(*img.label));
  }
  if (set.size() == 0) throw Error(ErrorCode::invalid_argument, "no labeled images in " + manifest.string());
  return set;
}

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      out.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_argument, "bad split fraction '" + part + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------- corpus

void add_corpus(CLI::App& app, Context& ctx) {
  auto* corpus = app.add_subcommand("corpus", "Fetch, validate and split labeled image manifests");
  corpus->require_subcommand(1);

  struct FetchArgs {
    std::string manifest, dest, source = "twitter";
    int concurrency = 4;
  };
  auto fa = std::make_shared<FetchArgs>();
  auto* fetch = corpus->add_subcommand("fetch", "Download every unique manifest URL into a directory");
  fetch->add_option("--manifest", fa->manifest, "Manifest CSV (image_id,url,label)")->required()->check(CLI::ExistingFile);
  fetch->add_option("--dest", fa->dest, "Destination directory")->required();
  fetch->add_option("--remote-source", fa->source, "Source tag for unrecognised remote hosts");
  fetch->add_option("--concurrency", fa->concurrency, "Parallel downloads")->check(CLI::PositiveNumber);
  fetch->callback([&ctx, fa] {
    ctx.record->set_command("corpus fetch");
    ctx.record->add_input("manifest", fa->manifest);
    const auto manifest = corpus::load_manifest(fa->manifest);
    corpus::FetchOptions opts;
    opts.base_dir = fs::path(fa->manifest).parent_path();
    opts.remote_source = corpus::parse_source(fa->source);
    opts.concurrency = fa->concurrency;
    const auto report = corpus::fetch_images(manifest, fa->dest, opts);
    corpus::save_fetch_report(fa->dest, report);
    ctx.record->add_output("records", fs::path(fa->dest) / "records.jsonl");
    ctx.record->add_output("failures", fs::path(fa->dest) / "fetch_failures.jsonl");
    ctx.record->note("fetched", report.records.size());
    ctx.record->note("failed", report.failures.size());
    ctx.record->note("manifest_issues", manifest.issues.size());
    std::cout << "fetched " << report.records.size() << ", failed " << report.failures.size() << "\n";
  });

  struct ValidateArgs {
    std::string records;
    int min_px = 150;
  };
  auto va = std::make_shared<ValidateArgs>();
  auto* validate = corpus->add_subcommand("validate", "Check fetched records against the minimum size");
  validate->add_option("--records", va->records, "records.jsonl written by 'corpus fetch'")->required()->check(CLI::ExistingFile);
  validate->add_option("--min-px", va->min_px, "Minimum width and height")->check(CLI::PositiveNumber);
  validate->callback([&ctx, va] {
    ctx.record->set_command("corpus validate");
    ctx.record->add_input("records", va->records);
    json report = {{"min_px", va->min_px}, {"passed", json::array()}, {"undersized", json::array()}};
    for (const auto& r : corpus::load_records(va->records)) {
      report[corpus::validate_min_size(r, va->min_px) ? "passed" : "undersized"].push_back(r.image_id);
    }
    const fs::path out = ctx.out() / "validate.json";
    write_text(out, report.dump(2) + "\n");
    ctx.record->add_output("report", out);
    std::cout << "passed " << report["passed"].size() << ", undersized " << report["undersized"].size() << "\n";
  });

  struct SplitArgs {
    std::string manifest, fractions = "0.8,0.1,0.1", dest;
  };
  auto sa = std::make_shared<SplitArgs>();
  auto* split = corpus->add_subcommand("split", "Stratified seeded split of a manifest");
  split->add_option("--manifest", sa->manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
  split->add_option("--fractions", sa->fractions, "Comma-separated train,validation[,test1[,test2]] fractions");
  split->add_option("--dest", sa->dest, "Output directory (defaults to --out-dir)");
  split->callback([&ctx, sa] {
    ctx.record->set_command("corpus split");
    ctx.record->add_input("manifest", sa->manifest);
    const auto manifest = corpus::load_manifest(sa->manifest);
    const auto fractions = parse_fractions(sa->fractions);
    if (fractions.size() < 2 || fractions.size() > 4) {
      throw Error(ErrorCode::invalid_argument, "need between two and four split fractions");
    }
    std::vector<corpus::LabeledExample> examples;
    for (const auto& e : manifest.entries) {
      corpus::LabeledExample ex;
      ex.image_id = e.image_id;
      ex.label = e.label == corpus::LabelValue::damage ? corpus::Label::damage() : corpus::Label::non_damage();
      examples.push_back(ex);
    }
    const auto assignment = corpus::split_assign(examples, fractions, ctx.seed);
    const fs::path dest = sa->dest.empty() ? ctx.out() : fs::path(sa->dest);
    fs::create_directories(dest);
    const fs::path base = fs::absolute(fs::path(sa->manifest).parent_path());
    for (std::size_t s = 0; s < assignment.size(); ++s) {
      const std::set<std::string> ids(assignment[s].begin(), assignment[s].end());
      corpus::DatasetManifest part;
      part.split = static_cast<corpus::Split>(s);
      for (auto e : manifest.entries) {
        if (!ids.count(e.image_id)) continue;
        // Keep local references valid from the new location.
        if (e.url.find("://") == std::string::npos && fs::path(e.url).is_relative()) e.url = (base / e.url).string();
        part.entries.push_back(e);
      }
      part.recount();
      const fs::path out = dest / (std::string(corpus::to_string(part.split)) + ".csv");
      corpus::write_manifest(out, part);
      ctx.record->add_output(std::string(corpus::to_string(part.split)), out);
      std::cout << corpus::to_string(part.split) << ": " << part.entries.size() << "\n";
    }
  });

  auto weights_manifest = std::make_shared<std::string>();
  auto* weights = corpus->add_subcommand("weights", "Balanced class weights of a manifest");
  weights->add_option("--manifest", *weights_manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
  weights->callback([&ctx, weights_manifest] {
    ctx.record->set_command("corpus weights");
    ctx.record->add_input("manifest", *weights_manifest);
    const auto m = corpus::load_manifest(*weights_manifest);
    const auto w = corpus::compute_class_weights(m.counts.non_damage, m.counts.damage);
    const json j = {{"non_damage", w.non_damage}, {"damage", w.damage}};
    ctx.record->note("class_weights", j);
    std::cout << j.dump() << "\n";
  });
}

// ----------------------------------------------------------------- dedup

void add_dedup(CLI::App& app, Context& ctx) {
  auto* dedup = app.add_subcommand("dedup", "Remove duplicate and undersized images");
  dedup->require_subcommand(1);
  struct Args {
    std::string in, report;
    double threshold = 0.5;
    int min_px = 150;
  };
  auto a = std::make_shared<Args>();
  auto* run = dedup->add_subcommand("run", "Apply unique-URL, exact, minimum-size and near-duplicate rules");
  run->add_option("--in", a->in, "Image directory, records.jsonl, or manifest CSV")->required()->check(CLI::ExistingPath);
  run->add_option("--threshold", a->threshold, "Near-duplicate similarity threshold")->check(CLI::Range(0.0, 1.0));
  run->add_option("--min-px", a->min_px, "Minimum width and height")->check(CLI::PositiveNumber);
  run->add_option("--report", a->report, "Removal report (JSON lines)");
  run->callback([&ctx, a] {
    ctx.record->set_command("dedup run");
    ctx.record->add_input("in", a->in);
    const fs::path in = a->in;
    std::vector<corpus::ImageRecord> records;
    std::optional<corpus::DatasetManifest> manifest;
    if (fs::is_directory(in) && fs::exists(in / "records.jsonl")) {
      records = corpus::load_records(in / "records.jsonl");
    } else if (fs::is_directory(in)) {
      // Files ordered by name stand in for fetch order.
      const Timestamp base = parse_rfc3339("2000-01-01T00:00:00Z");
      int k = 0;
      for (const auto& img : list_images(in)) {
        records.push_back(corpus::record_from_file(img.path, img.id, corpus::Source::local,
                                                   base + std::chrono::seconds(k++)));
      }
    } else if (in.extension() == ".jsonl") {
      records = corpus::load_records(in);
    } else {
      manifest = corpus::load_manifest(in);
      corpus::FetchOptions opts;
      opts.base_dir = in.parent_path();
      const auto report = corpus::fetch_images(*manifest, ctx.out() / "fetched", opts);
      corpus::save_fetch_report(ctx.out() / "fetched", report);
      records = report.records;
    }
    dedup::DedupOptions opts;
    opts.near_threshold = a->threshold;
    opts.min_px = a->min_px;
    const auto result = dedup::dedupe_corpus(records, opts);

    const fs::path report = a->report.empty() ? ctx.out() / "dedup_report.jsonl" : fs::path(a->report);
    if (report.has_parent_path()) fs::create_directories(report.parent_path());
    std::string text;
    for (const auto& r : result.removed) text += dedup::to_json(r).dump() + "\n";
    write_text(report, text);
    ctx.record->add_output("report", report);

    const fs::path kept = ctx.out() / "kept_records.jsonl";
    std::string kept_text;
    for (const auto& r : result.kept) kept_text += corpus::to_json(r).dump() + "\n";
    write_text(kept, kept_text);
    ctx.record->add_output("kept_records", kept);

    if (manifest) {
      std::set<std::string> keep;
      for (const auto& r : result.kept) keep.insert(r.image_id);
      corpus::DatasetManifest out;
      const fs::path base = fs::absolute(in.parent_path());
      for (auto e : manifest->entries) {
        if (!keep.count(e.image_id)) continue;
        if (e.url.find("://") == std::string::npos && fs::path(e.url).is_relative()) e.url = (base / e.url).string();
        out.entries.push_back(e);
      }
      out.recount();
      const fs::path kept_manifest = ctx.out() / "kept_manifest.csv";
      corpus::write_manifest(kept_manifest, out);
      ctx.record->add_output("kept_manifest", kept_manifest);
    }
    json by_rule = json::object();
    for (const auto& r : result.removed) by_rule[std::string(dedup::to_string(r.rule))] = by_rule.value(std::string(dedup::to_string(r.rule)), 0) + 1;
    ctx.record->note("kept", result.kept.size());
    ctx.record->note("removed", by_rule);
    std::cout << "kept " << result.kept.size() << ", removed " << result.removed.size() << " " << by_rule.dump() << "\n";
  });
}

// ----------------------------------------------------------------- model

vision::ConvClassifier build_model(const std::string& arch, int side, const std::string& backbone, std::uint64_t seed) {
  if (arch == "transfer") {
    if (backbone.empty()) throw Error(ErrorCode::invalid_argument, "the transfer architecture needs --backbone");
    return vision::build_transfer_model(backbone, side, seed);
  }
  if (arch == "random") return vision::build_random_transfer_model(seed, side);
  if (arch == "baseline") return vision::build_baseline_cnn(seed, side);
  throw Error(ErrorCode::invalid_argument, "architecture must be transfer, random or baseline", arch);
}

void add_model(CLI::App& app, Context& ctx) {
  auto* model = app.add_subcommand("model", "Train, apply and pretrain classifiers");
  model->require_subcommand(1);

  struct TrainArgs {
    std::string config, train, val, backbone, arch, checkpoint;
    std::optional<int> side, epochs;
    std::optional<double> lr;
    bool no_class_weights = false;
  };
  auto ta = std::make_shared<TrainArgs>();
  auto* train = model->add_subcommand("train", "Train a classifier and keep the best-validation checkpoint");
  train->add_option("--config", ta->config, "Training config JSON")->check(CLI::ExistingFile);
  train->add_option("--train", ta->train, "Training manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--val", ta->val, "Validation manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--backbone", ta->backbone, "Backbone weights archive (transfer architecture)");
  train->add_option("--arch", ta->arch, "transfer | random | baseline");
  train->add_option("--side", ta->side, "Input side in pixels")->check(CLI::Range(32, 512));
  train->add_option("--epochs", ta->epochs, "Maximum epochs")->check(CLI::PositiveNumber);
  train->add_option("--lr", ta->lr, "Learning rate")->check(CLI::PositiveNumber);
  train->add_option("--checkpoint", ta->checkpoint, "Output checkpoint (defaults to <out-dir>/model.dmgt)");
  train->add_flag("--no-class-weights", ta->no_class_weights, "Train with unit class weights");
  train->callback([&ctx, ta] {
    ctx.record->set_command("model train");
    json cfg = ctx.section("train");
    if (!ta->config.empty()) {
      ctx.record->add_input("config", ta->config);
      cfg = merged(cfg, read_json_file(ta->config));
    }
    const std::string arch = !ta->arch.empty() ? ta->arch : cfg.value("architecture", std::string("transfer"));
    const int side = ta->side.value_or(cfg.value("input_side", vision::kInputSide));
    const std::string backbone = !ta->backbone.empty() ? ta->backbone : cfg.value("backbone", std::string());
    if (ta->epochs) cfg["max_epochs"] = *ta->epochs;
    if (ta->lr) cfg["learning_rate"] = *ta->lr;
    if (ctx.seed_given) cfg["seed"] = ctx.seed;

    ctx.record->add_input("train", ta->train);
    ctx.record->add_input("val", ta->val);
    if (!backbone.empty()) ctx.record->add_input("backbone", backbone);
    const auto train_manifest = corpus::load_manifest(ta->train);
    if (!ta->no_class_weights && !cfg.contains("class_weights")) {
      const auto w = corpus::compute_class_weights(train_manifest.counts.non_damage, train_manifest.counts.damage);
      cfg["class_weights"] = {{"non_damage", w.non_damage}, {"damage", w.damage}};
    }
    vision::TrainingConfig config = vision::TrainingConfig::from_json(cfg);
    const auto train_set = load_tensor_set(ta->train, side);
    const auto val_set = load_tensor_set(ta->val, side);

    vision::ConvClassifier net = build_model(arch, side, backbone, config.seed);
    const auto result = vision::train(net, train_set, val_set, config, [](const vision::EpochRecord& e) {
      std::cout << "epoch " << e.epoch << " loss " << e.train_loss << " train_acc " << e.train_acc << " val_acc "
                << e.val_acc << std::endl;
    });
    vision::restore_parameters(net, result.best_parameters);

    const fs::path checkpoint = ta->checkpoint.empty() ? ctx.out() / "model.dmgt" : fs::path(ta->checkpoint);
    json saved = config.to_json();
    saved["architecture"] = arch;
    saved["input_side"] = side;
    vision::save_checkpoint(checkpoint, net, {result.best_epoch, result.best_val_acc, saved});
    const fs::path history = ctx.out() / "history.csv";
    vision::write_history_csv(history, result.history);
    ctx.record->add_output("checkpoint", checkpoint);
    ctx.record->add_output("history", history);
    ctx.record->note("best_epoch", result.best_epoch);
    ctx.record->note("best_val_acc", result.best_val_acc);
    std::cout << "best epoch " << result.best_epoch << " val_acc " << result.best_val_acc << "\n";
  });

  struct PredictArgs {
    std::string checkpoint, images, out;
    double threshold = 0.5;
  };
  auto pa = std::make_shared<PredictArgs>();
  auto* predict = model->add_subcommand("predict", "Score images with a checkpoint");
  predict->add_option("--checkpoint", pa->checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  predict->add_option("--images", pa->images, "Image directory or manifest CSV")->required()->check(CLI::ExistingPath);
  predict->add_option("--out", pa->out, "Predictions (JSON lines)");
  predict->add_option("--threshold", pa->threshold, "Decision threshold on p_damage")->check(CLI::Range(0.0, 1.0));
  predict->callback([&ctx, pa] {
    ctx.record->set_command("model predict");
    ctx.record->add_input("checkpoint", pa->checkpoint);
    ctx.record->add_input("images", pa->images);
    const auto net = vision::load_checkpoint(pa->checkpoint);
    const int side = net.spec().input_side;
    const fs::path out = pa->out.empty() ? ctx.out() / "predictions.jsonl" : fs::path(pa->out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::string text;
    std::size_t n = 0;
    for (const auto& img : list_images(pa->images)) {
      const auto p = net.predict(vision::resize_normalize(read_image(img.path), side));
      text += json{{"image_id", img.id},
                   {"p_damage", p.p_damage},
                   {"p_non_damage", p.p_non_damage},
                   {"predicted", p.p_damage >= pa->threshold ? "damage" : "non_damage"}}
                  .dump() +
              "\n";
      ++n;
    }
    write_text(out, text);
    ctx.record->add_output("predictions", out);
    ctx.record->note("images", n);
    std::cout << "scored " << n << " images\n";
  });

  struct PretrainArgs {
    std::string out;
    vision::PretrainOptions opts;
    std::optional<int> epochs;
  };
  auto pt = std::make_shared<PretrainArgs>();
  auto* pretrain = model->add_subcommand("pretrain", "Pretrain a backbone on the procedural texture task");
  pretrain->add_option("--out", pt->out, "Backbone archive (defaults to <out-dir>/backbone.dmgt)");
  pretrain->add_option("--side", pt->opts.side, "Texture side in pixels")->check(CLI::Range(32, 256));
  pretrain->add_option("--per-class", pt->opts.per_class, "Textures per class")->check(CLI::PositiveNumber);
  pretrain->add_option("--epochs", pt->epochs, "Epochs for every block")->check(CLI::PositiveNumber);
  pretrain->callback([&ctx, pt] {
    ctx.record->set_command("model pretrain");
    vision::PretrainOptions opts = pt->opts;
    if (pt->epochs) opts.epochs_per_block.assign(5, *pt->epochs);
    if (ctx.seed_given) opts.seed = ctx.seed;
    vision::PretrainReport report;
    const auto archive = vision::pretrain_backbone(opts, &report, [](int block, int epoch, double loss, double acc) {
      std::cout << "block " << block << " epoch " << epoch << " loss " << loss << " acc " << acc << std::endl;
    });
    const fs::path out = pt->out.empty() ? ctx.out() / "backbone.dmgt" : fs::path(pt->out);
    write_archive(out, archive);
    ctx.record->add_output("backbone", out);
    ctx.record->note("block_accuracy", report.block_accuracy);
  });
}

// ------------------------------------------------------------------ eval

void add_eval(CLI::App& app, Context& ctx) {
  auto* eval = app.add_subcommand("eval", "Threshold sweeps and metrics");
  eval->require_subcommand(1);
  struct Args {
    std::string pred, truth, out;
    int points = 11;
    std::optional<double> fixed;
  };
  auto a = std::make_shared<Args>();
  auto* sweep = eval->add_subcommand("sweep", "Per-class precision, recall and F over evenly spaced thresholds");
  sweep->add_option("--pred", a->pred, "Predictions (JSON lines)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--truth", a->truth, "Ground-truth manifest CSV")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", a->out, "Sweep CSV (defaults to <out-dir>/sweep.csv)");
  sweep->add_option("--points", a->points, "Number of thresholds from 0 to 1")->check(CLI::Range(2, 1001));
  sweep->add_option("--threshold", a->fixed, "Report metrics at this threshold instead of the best damage F")
      ->check(CLI::Range(0.0, 1.0));
  sweep->callback([&ctx, a] {
    ctx.record->set_command("eval sweep");
    ctx.record->add_input("pred", a->pred);
    ctx.record->add_input("truth", a->truth);
    const auto scored = eval::join_predictions(read_json_lines(a->pred), corpus::load_manifest(a->truth));
    const auto thresholds = eval::even_thresholds(a->points);
    const auto result = eval::sweep(scored.p_damage, scored.truths, thresholds);
    const fs::path out = a->out.empty() ? ctx.out() / "sweep.csv" : fs::path(a->out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_text(out, eval::sweep_csv(result));
    ctx.record->add_output("sweep", out);

    const double chosen = eval::select_threshold(
        result, a->fixed ? eval::SelectionPolicy::fixed(*a->fixed) : eval::SelectionPolicy{});
    eval::SweepPoint point{chosen, eval::confusion(scored.p_damage, scored.truths, chosen), {}};
    point.metrics = eval::precision_recall_f(point.counts);
    fs::path metrics = out;
    metrics.replace_extension(".metrics.json");
    write_text(metrics, eval::metrics_json(point).dump(2) + "\n");
    ctx.record->add_output("metrics", metrics);
    ctx.record->note("selected_threshold", chosen);
    std::cout << eval::sweep_csv(result);
  });
}

// --------------------------------------------------------------- explain

void add_explain(CLI::App& app, Context& ctx) {
  struct Args {
    std::string checkpoint, image, classes = "both", out, truth;
  };
  auto a = std::make_shared<Args>();
  auto* explain = app.add_subcommand("explain", "Grad-CAM heatmaps for one image");
  explain->add_option("--checkpoint", a->checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  explain->add_option("--image", a->image, "Image file")->required()->check(CLI::ExistingFile);
  explain->add_option("--classes", a->classes, "both | damage | non_damage")
      ->check(CLI::IsMember({"both", "damage", "non_damage"}));
  explain->add_option("--out", a->out, "Output directory (defaults to --out-dir)");
  explain->add_option("--truth", a->truth, "Ground-truth label to print in the overlay title")
      ->check(CLI::IsMember({"damage", "non_damage"}));
  explain->callback([&ctx, a] {
    ctx.record->set_command("explain");
    ctx.record->add_input("checkpoint", a->checkpoint);
    ctx.record->add_input("image", a->image);
    const auto net = vision::load_checkpoint(a->checkpoint);
    const Image image = read_image(a->image);
    auto expl = gradcam::explain(net, image, a->classes != "damage",
                                 a->truth.empty() ? std::nullopt : std::optional<std::string>(a->truth));
    if (a->classes == "non_damage") {
      std::erase_if(expl.classes, [](const gradcam::ClassExplanation& ce) {
        return ce.target != gradcam::TargetClass::non_damage;
      });
    }
    const fs::path out = a->out.empty() ? ctx.out() : fs::path(a->out);
    fs::create_directories(out);
    for (const auto& p : gradcam::save_explanation(out, fs::path(a->image).stem().string(), expl, net.checksum().hex())) {
      ctx.record->add_output(p.extension().string().substr(1), p);
    }
    ctx.record->note("p_damage", expl.probabilities.p_damage);
    std::cout << "p_damage " << expl.probabilities.p_damage << " predicted " << expl.predicted << "\n";
  });
}

// --------------------------------------------------------------- monitor

std::atomic<monitor::ApiServer*> g_server{nullptr};

void stop_server(int) {
  if (auto* s = g_server.load()) s->stop();
}

void run_pipeline(Context& ctx, monitor::FeedAdapter& adapter, const monitor::MonitorConfig& config, bool fresh) {
  if (config.checkpoint.empty()) throw Error(ErrorCode::invalid_argument, "monitor needs a classifier checkpoint");
  ctx.record->add_input("checkpoint", config.checkpoint);
  const auto net = vision::load_checkpoint(config.checkpoint);
  if (fs::exists(config.store_dir / "items.jsonl")) {
    if (!fresh) {
      throw Error(ErrorCode::conflict, "store already holds items; pass --fresh to start over",
                  config.store_dir.string());
    }
    fs::remove_all(config.store_dir);
  }
  monitor::ItemStore store(config.store_dir, config.allow_rereview);
  const auto summary = monitor::run_monitor(adapter, config, net, store);
  ctx.record->add_output("items", config.store_dir / "items.jsonl");
  if (config.output_jsonl) ctx.record->add_output("sink", *config.output_jsonl);
  ctx.record->note("summary", summary.to_json());
  std::cout << summary.to_json().dump() << "\n";
}

std::unique_ptr<monitor::FeedAdapter> adapter_from_json(const json& feed, const fs::path& base) {
  const std::string kind = feed.value("kind", std::string("replay"));
  if (kind == "replay") {
    fs::path fixture = feed.at("fixture").get<std::string>();
    if (fixture.is_relative()) fixture = base / fixture;
    return std::make_unique<monitor::ReplayAdapter>(fixture, feed.value("drop_at", std::set<std::size_t>{}));
  }
  if (kind == "http") {
    monitor::HttpPollingAdapter::Options o;
    o.endpoint = feed.at("endpoint").get<std::string>();
    o.poll_interval = std::chrono::milliseconds(feed.value("poll_ms", 5000));
    o.idle_polls_before_end = feed.value("idle_polls_before_end", 0);
    o.image_base = feed.value("image_base", std::string("."));
    return std::make_unique<monitor::HttpPollingAdapter>(o);
  }
  throw Error(ErrorCode::invalid_argument, "feed kind must be replay or http", kind);
}

void add_monitor(CLI::App& app, Context& ctx) {
  auto* mon = app.add_subcommand("monitor", "Near-real-time feed monitoring and the review API");
  mon->require_subcommand(1);

  struct RunArgs {
    std::string config;
    bool fresh = false;
  };
  auto ra = std::make_shared<RunArgs>();
  auto* run = mon->add_subcommand("run", "Run the monitor described by a config file");
  run->add_option("--config", ra->config, "Monitor config JSON (MonitorConfig fields plus \"feed\")")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_flag("--fresh", ra->fresh, "Discard an existing store first");
  run->callback([&ctx, ra] {
    ctx.record->set_command("monitor run");
    ctx.record->add_input("config", ra->config);
    const json doc = merged(ctx.section("monitor"), read_json_file(ra->config));
    auto config = monitor::MonitorConfig::from_json(doc);
    if (ctx.seed_given) config.seed = ctx.seed;
    if (!doc.contains("feed")) throw Error(ErrorCode::invalid_argument, "monitor config has no \"feed\" section");
    auto adapter = adapter_from_json(doc["feed"], fs::path(ra->config).parent_path());
    run_pipeline(ctx, *adapter, config, ra->fresh);
  });

  struct ReplayArgs {
    std::string fixture, checkpoint, store, out, drop_at;
    std::optional<double> threshold;
    std::optional<int> workers;
    bool explain = false, fresh = false;
  };
  auto rp = std::make_shared<ReplayArgs>();
  auto* replay = mon->add_subcommand("replay", "Replay a JSON-lines feed fixture through the monitor");
  replay->add_option("--fixture", rp->fixture, "Feed fixture (one FeedItem per line)")->required()->check(CLI::ExistingFile);
  replay->add_option("--checkpoint", rp->checkpoint, "Classifier checkpoint");
  replay->add_option("--store", rp->store, "Store directory (defaults to <out-dir>/monitor_store)");
  replay->add_option("--out", rp->out, "ClassifiedItem sink (JSON lines)");
  replay->add_option("--threshold", rp->threshold, "Decision threshold on p_damage")->check(CLI::Range(0.0, 1.0));
  replay->add_option("--workers", rp->workers, "Classifier threads")->check(CLI::PositiveNumber);
  replay->add_option("--drop-at", rp->drop_at, "Comma-separated line indices at which to inject a disconnect");
  replay->add_flag("--explain", rp->explain, "Write Grad-CAM overlays for each item");
  replay->add_flag("--fresh", rp->fresh, "Discard an existing store first");
  replay->callback([&ctx, rp] {
    ctx.record->set_command("monitor replay");
    ctx.record->add_input("fixture", rp->fixture);
    json doc = ctx.section("monitor");
    if (!rp->checkpoint.empty()) doc["checkpoint"] = rp->checkpoint;
    if (!rp->store.empty()) doc["store_dir"] = rp->store;
    if (!doc.contains("store_dir")) doc["store_dir"] = (ctx.out() / "monitor_store").string();
    if (!rp->out.empty()) doc["output_jsonl"] = rp->out;
    if (rp->threshold) doc["threshold"] = *rp->threshold;
    if (rp->workers) doc["workers"] = *rp->workers;
    if (rp->explain) doc["explain"] = true;
    auto config = monitor::MonitorConfig::from_json(doc);
    if (ctx.seed_given) config.seed = ctx.seed;
    std::set<std::size_t> drops;
    for (double d : rp->drop_at.empty() ? std::vector<double>{} : parse_fractions(rp->drop_at)) {
      drops.insert(static_cast<std::size_t>(d));
    }
    monitor::ReplayAdapter adapter(rp->fixture, drops);
    run_pipeline(ctx, adapter, config, rp->fresh);
  });

  struct ServeArgs {
    std::string store, host = "127.0.0.1", static_dir;
    int port = 8080;
    bool no_rereview = false;
  };
  auto sv = std::make_shared<ServeArgs>();
  auto* serve = mon->add_subcommand("serve", "Serve the queue/label API over a store");
  serve->add_option("--store", sv->store, "Store directory")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--host", sv->host, "Bind address");
  serve->add_option("--port", sv->port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--static", sv->static_dir, "Directory of a static review UI to serve at /")
      ->check(CLI::ExistingDirectory);
  serve->add_flag("--no-rereview", sv->no_rereview, "Reject reviews of items that are no longer pending");
  serve->callback([&ctx, sv] {
    ctx.record->set_command("monitor serve");
    ctx.record->add_input("store", sv->store);
    monitor::ItemStore store(sv->store, !sv->no_rereview);
    monitor::ApiServer server(store, now_utc,
                              sv->static_dir.empty() ? std::nullopt : std::optional<fs::path>(sv->static_dir));
    const int port = server.bind(sv->host, sv->port);
    std::cout << "serving http://" << sv->host << ":" << port << "/api/queue" << std::endl;
    g_server = &server;
    std::signal(SIGINT, stop_server);
    std::signal(SIGTERM, stop_server);
    server.listen();
    g_server = nullptr;
  });
}

}  // namespace

void register_commands(CLI::App& app, Context& ctx) {
  add_corpus(app, ctx);
  add_dedup(app, ctx);
  add_model(app, ctx);
  add_eval(app, ctx);
  add_explain(app, ctx);
  add_monitor(app, ctx);
}

}  // namespace dmgwatch::cli
