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

// Writes the synthetic fixtures used by the tests and the CLI smoke run.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/io.hpp"
#include "dmgwatch/corpus/manifest.hpp"
#include "dmgwatch/synth/synth.hpp"

namespace fs = std::filesystem;
using namespace dmgwatch;

int main(int argc, char** argv) {
  CLI::App app("Synthetic fixture generator", "make_fixtures");
  app.require_subcommand(1);
  std::string dir;
  std::uint64_t seed = 1;
  app.add_option("--dir", dir, "Output directory")->required();
  app.add_option("--seed", seed, "Generator seed");

  auto* dedup = app.add_subcommand("dedup", "60-image corpus with planted exact, undersized and near duplicates");

  int per_class = 30, side = 160;
  auto* scenes = app.add_subcommand("scenes", "Two-class scene set with a manifest");
  scenes->add_option("--per-class", per_class, "Images per class")->check(CLI::PositiveNumber);
  scenes->add_option("--side", side, "Image side in pixels")->check(CLI::Range(32, 1024));

  std::size_t unique = 992, duplicates = 208;
  auto* feed = app.add_subcommand("feed", "Event-shaped replay feed with planted duplicates");
  feed->add_option("--unique", unique, "Distinct images");
  feed->add_option("--duplicates", duplicates, "Duplicate references");

  std::size_t tp = 301, fn = 73, fp = 88, tn = 20342;
  auto* scored = app.add_subcommand("scored", "Predictions and truth manifest with a given confusion at 0.5");
  scored->add_option("--tp", tp);
  scored->add_option("--fn", fn);
  scored->add_option("--fp", fp);
  scored->add_option("--tn", tn);

  CLI11_PARSE(app, argc, argv);
  try {
    fs::create_directories(dir);
    if (*dedup) {
      const auto fx = synth::write_dedup_fixture(dir, seed);
      std::cout << fx.manifest.string() << "\n";
    } else if (*scenes) {
      const auto images = synth::write_scene_set(dir, per_class, side, seed);
      corpus::DatasetManifest m;
      for (const auto& img : images) m.entries.push_back({img.image_id, img.path.filename().string(), img.label});
      m.recount();
      corpus::write_manifest(fs::path(dir) / "manifest.csv", m);
      std::cout << (fs::path(dir) / "manifest.csv").string() << "\n";
    } else if (*feed) {
      const auto fx = synth::write_feed_fixture(dir, unique, duplicates, seed);
      std::cout << fx.feed.string() << " posts " << fx.posts << " raw_images " << fx.raw_images << "\n";
    } else if (*scored) {
      const auto rows = synth::make_scored_fixture(tp, fn, fp, tn, seed);
      std::string pred;
      corpus::DatasetManifest truth;
      for (const auto& r : rows) {
        pred += nlohmann::json{{"image_id", r.image_id}, {"p_damage", r.p_damage}}.dump() + "\n";
        truth.entries.push_back({r.image_id, "images/" + r.image_id + ".jpg",
                                 r.label == 1 ? corpus::LabelValue::damage : corpus::LabelValue::non_damage});
      }
      truth.recount();
      write_text(fs::path(dir) / "predictions.jsonl", pred);
      corpus::write_manifest(fs::path(dir) / "truth.csv", truth);
      std::cout << rows.size() << " rows\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
