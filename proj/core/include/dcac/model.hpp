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

#ifndef DCAC_MODEL_HPP_
#define DCAC_MODEL_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dcac/dcac.hpp"
#include "dcac/ops.hpp"
#include "dcac/sr_ctc.hpp"
#include "dcac/tensor.hpp"

namespace dcac {

// Desk-scale stand-in for the full recognition stack: four conv stages that
// each halve the spatial extent, optional dynamic-convolution insertions,
// a two-layer 1D conv block with two temporal halvings, a two-layer
// bidirectional vanilla recurrent encoder, and a classifier.
struct ModelConfig {
  std::int64_t in_channels = 1;
  std::int64_t height = 12;
  std::int64_t width = 12;
  std::vector<std::int64_t> stage_widths = {8, 16, 32, 64};
  std::vector<int> dcac_after = {2, 3, 4};
  std::vector<int> dcac_kt = {3, 7, 11};  // temporal receptive field per insertion stage
  int dcac_groups = 0;                    // 0 = depthwise (G == channels)
  int dcac_experts = 6;
  int dcac_reduction = 16;
  std::int64_t temporal_dim = 128;
  // Desk-scale default 3: with T' around 10, a wider window would smear
  // every frame into every position and wash out the per-frame gradient
  // structure the diagnostics track.
  int temporal_kernel = 3;
  std::int64_t rnn_hidden = 64;
  std::int64_t vocab_size = 13;  // glosses + blank
  std::int64_t lsd_dim = 64;
  std::int64_t ltm_dim = 128;
  int lsd_grid = 7;
  SrCtcConfig sr;

  bool has_dcac_after(int stage) const;
  int dcac_kt_for(int stage) const;
  std::int64_t final_dim() const { return 2 * rnn_hidden; }
  // Spatial extent after `stage` halvings (stride-2 convs, pad 1, k 3).
  std::int64_t height_after(int stage) const;
  std::int64_t width_after(int stage) const;

  void validate() const;
};

struct StageBlock {
  Tensor conv_w;  // [C_out, C_in, 3, 3], stride 2, pad 1
  Tensor conv_b;
  ops::BnState bn;
};

struct TemporalModule {
  Tensor conv1_w;  // [M, C4, 5]
  Tensor conv1_b;
  Tensor conv2_w;  // [M, M, 5]
  Tensor conv2_b;
};

struct RnnDirection {
  Tensor w_x;  // [in, h]
  Tensor w_h;  // [h, h]
  Tensor b;    // [h]
};

struct ToyModel {
  ModelConfig cfg;
  std::vector<StageBlock> stages;                    // 4 blocks
  std::map<int, DcacParams> dcac_blocks;             // keyed by stage id
  TemporalModule temporal;
  std::vector<std::array<RnnDirection, 2>> rnn;      // layers x {fwd, bwd}
  SharedClassifier final_classifier;
  SrCtcModules sr_modules;

  // Trainable tensors under canonical names.
  void visit_params(const std::function<void(const std::string&, Tensor&)>& fn);
  // Non-trainable running buffers (batch-norm statistics).
  void visit_buffers(const std::function<void(const std::string&, std::vector<double>&)>& fn);
  std::int64_t num_params();
};

ToyModel make_model(const ModelConfig& cfg, std::uint64_t seed);

struct ForwardResult {
  Tensor final_logits;         // [T', V] log-probs
  std::vector<StageTap> taps;  // stages 2..4 plus the final tap
  const Tensor& tap(int stage_id) const;
};

// video: [C,T,H,W], T >= 4.  Training mode drives batch-norm statistics;
// the auxiliary supervision modules are never touched here.
ForwardResult model_forward(ToyModel& model, const Tensor& video, bool training);

// T after the two temporal halvings.
std::int64_t model_t_prime(std::int64_t t);

}  // namespace dcac

#endif  // DCAC_MODEL_HPP_
