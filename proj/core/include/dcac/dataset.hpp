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

#ifndef DCAC_DATASET_HPP_
#define DCAC_DATASET_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "dcac/ctc.hpp"
#include "dcac/rng.hpp"
#include "dcac/tensor.hpp"

namespace dcac {

// Synthetic weakly-supervised world: each gloss is a moving oriented
// Gaussian blob with a gloss-specific direction, speed and shape; a sample
// concatenates 2..5 gloss clips and stores only the sentence-level labels.
struct WorldConfig {
  int num_glosses = 12;
  std::int64_t channels = 1;
  std::int64_t height = 12;
  std::int64_t width = 12;
  int canvas_margin = 2;
  int min_duration = 8;
  int max_duration = 16;
  int min_len = 2;
  int max_len = 5;
  double noise_sigma = 0.02;
  double stretch_prob = 0.5;
  double stretch_min = 0.8;
  double stretch_max = 1.2;

  void validate() const;
};

struct Sample {
  std::string id;
  GlossSequence labels;
  Tensor video;  // [C,T,H,W]
};

// Sentence sampler alone (label marginals are testable without rendering).
GlossSequence sample_labels(const WorldConfig& world, Rng& rng);

// Fully deterministic in (world, seed, split, index).
Sample make_sample(const WorldConfig& world, std::uint64_t seed, const std::string& split,
                   std::int64_t index);

// Nearest-neighbor temporal resampling; the result never drops below
// `min_frames` so downstream alignment stays feasible.
Tensor stretch_video(const Tensor& video, double factor, std::int64_t min_frames);

// Writes one tensor file per sample plus index.json into out_dir.
void generate_dataset(const WorldConfig& world, std::uint64_t seed, const std::string& out_dir,
                      std::int64_t n_train, std::int64_t n_dev);

// Loads one split ("train" or "dev") written by generate_dataset.
std::vector<Sample> load_dataset(const std::string& dir, const std::string& split);

// In-memory generation of a split, bypassing the filesystem (same samples
// that generate_dataset would write).
std::vector<Sample> generate_split(const WorldConfig& world, std::uint64_t seed,
                                   const std::string& split, std::int64_t count);

}  // namespace dcac

#endif  // DCAC_DATASET_HPP_
