// Copyright 2026 The dcac Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DCAC_RUN_CONFIG_HPP_
#define DCAC_RUN_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "dcac/dataset.hpp"
#include "dcac/model.hpp"
#include "dcac/train.hpp"

namespace dcac {

// One experiment as a single JSON document.  Two runs with equal hashes and
// seeds produce identical metrics.
struct RunConfig {
  std::uint64_t seed = 1;
  WorldConfig world;
  ModelConfig model;
  TrainParams train;
};

RunConfig default_run_config();

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);

// FNV-1a of the canonicalized (sorted-key) document, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

// Named ablation presets (receptive fields, supervision placement,
// classifier sharing, component on/off grids).  Unknown name -> ConfigError.
void apply_preset(RunConfig& cfg, const std::string& name);
std::vector<std::string> preset_names();

}  // namespace dcac

#endif  // DCAC_RUN_CONFIG_HPP_
