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
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmgwatch/core/archive.hpp"

namespace dmgwatch::vision {

/// Greedy block-wise supervised pretraining of the five-block backbone on the
/// procedural texture task. Block b is trained with a temporary global-average
/// pooling + linear head while blocks 1..b-1 stay fixed, then its pooled
/// output becomes the next block's input.
struct PretrainOptions {
  int side = 32;
  int per_class = 40;
  std::vector<int> epochs_per_block = {6, 6, 6, 6, 6};
  double learning_rate = 1e-3;
  int batch_size = 32;
  std::uint64_t seed = 7;
};

struct PretrainReport {
  std::vector<double> block_accuracy;  // source-task training accuracy after each block
};

using PretrainProgress = std::function<void(int block, int epoch, double loss, double accuracy)>;

/// Settings recorded in a pretrained archive's metadata under "pretrain".
nlohmann::json pretrain_stamp(const PretrainOptions& options);

TensorArchive pretrain_backbone(const PretrainOptions& options, PretrainReport* report = nullptr,
                                const PretrainProgress& progress = {});

}  // namespace dmgwatch::vision
