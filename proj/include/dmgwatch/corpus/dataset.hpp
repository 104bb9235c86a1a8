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

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "dmgwatch/corpus/types.hpp"

namespace dmgwatch::corpus {

/// Balanced inverse-frequency weights: w_c = (n_non_damage + n_damage) / (2 n_c).
/// (3684, 2872) gives (0.8897, 1.1414).
ClassWeights compute_class_weights(std::size_t n_non_damage, std::size_t n_damage);

/// Stratified, seeded assignment of example ids to splits.
///
/// Within each label value the ids are shuffled and dealt out by largest
/// remainder, so per-class split sizes are within one example of
/// fraction * class size. Result index i holds the ids of split i.
std::vector<std::vector<std::string>> split_assign(const std::vector<LabeledExample>& examples,
                                                   const std::vector<double>& fractions,
                                                   std::uint64_t seed);

/// Append-only JSON-lines journal of labeled examples.
class LabelJournal {
 public:
  explicit LabelJournal(std::filesystem::path path) : path_(std::move(path)) {}

  void append(const LabeledExample& example);
  std::vector<LabeledExample> read_all() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
};

}  // namespace dmgwatch::corpus
