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

#include "dmgwatch/corpus/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/io.hpp"
#include "dmgwatch/core/random.hpp"

namespace dmgwatch::corpus {

ClassWeights compute_class_weights(std::size_t n_non_damage, std::size_t n_damage) {
  if (n_non_damage == 0 || n_damage == 0) {
    throw Error(ErrorCode::invalid_argument, "class weights need at least one example of each class");
  }
  const double total = static_cast<double>(n_non_damage) + static_cast<double>(n_damage);
  return ClassWeights{total / (2.0 * static_cast<double>(n_non_damage)),
                      total / (2.0 * static_cast<double>(n_damage))};
}

std::vector<std::vector<std::string>> split_assign(const std::vector<LabeledExample>& examples,
                                                   const std::vector<double>& fractions, std::uint64_t seed) {
  if (examples.empty()) throw Error(ErrorCode::invalid_argument, "cannot split an empty example list");
  if (fractions.empty()) throw Error(ErrorCode::invalid_argument, "at least one split fraction is required");
  double sum = 0.0;
  for (double f : fractions) {
    if (!std::isfinite(f) || f < 0.0) throw Error(ErrorCode::invalid_argument, "split fractions must be >= 0");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::invalid_argument, "split fractions must sum to 1");

  std::map<LabelValue, std::vector<std::string>> strata;
  for (const auto& e : examples) strata[e.label.value()].push_back(e.image_id);

  Rng rng(seed);
  std::vector<std::vector<std::string>> out(fractions.size());
  for (auto& [label, ids] : strata) {
    std::sort(ids.begin(), ids.end());
    rng.shuffle(ids);
    const std::size_t n = ids.size();
    std::vector<std::size_t> take(fractions.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < fractions.size(); ++s) {
      const double exact = fractions[s] * static_cast<double>(n);
      take[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      assigned += take[s];
      remainders.emplace_back(exact - static_cast<double>(take[s]), s);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++take[remainders[k % remainders.size()].second];

    std::size_t cursor = 0;
    for (std::size_t s = 0; s < fractions.size(); ++s) {
      for (std::size_t k = 0; k < take[s]; ++k) out[s].push_back(ids[cursor++]);
    }
  }
  return out;
}

void LabelJournal::append(const LabeledExample& example) {
  std::lock_guard lock(mutex_);
  append_json_line(path_, to_json(example));
}

std::vector<LabeledExample> LabelJournal::read_all() const {
  std::lock_guard lock(mutex_);
  std::vector<LabeledExample> out;
  if (!std::filesystem::exists(path_)) return out;
  for (const auto& row : read_json_lines(path_)) out.push_back(example_from_json(row));
  return out;
}

}  // namespace dmgwatch::corpus
