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

#ifndef DCAC_DCAC_HPP_
#define DCAC_DCAC_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dcac/ops.hpp"
#include "dcac/tensor.hpp"

namespace dcac {

// Shapes and hyperparameters of one dynamic context-aware convolution.
// Feature maps are [C,T,H,W]; kernels are [Co,Ci/G,kt,kh,kw].
struct DcacConfig {
  std::int64_t c_in = 0;
  std::int64_t c_out = 0;
  int groups = 1;
  int k_t = 3;
  int k_h = 1;
  int k_w = 1;
  int num_experts = 6;
  int reduction = 16;

  std::int64_t cig() const { return c_in / groups; }
  std::int64_t cog() const { return c_out / groups; }
  std::int64_t hidden() const { return c_in / reduction; }
  std::int64_t kernel_numel() const {
    return static_cast<std::int64_t>(k_t) * k_h * k_w;
  }
  Shape kernel_shape() const { return {c_out, cig(), k_t, k_h, k_w}; }

  // Throws ConfigError on any violated constraint (divisibility, odd
  // kernel extents, reduction leaving at least one hidden unit).
  void validate() const;
};

// Trainable state of one DCAC block.  The residual gate starts at exactly
// zero so a freshly built block is the identity.
struct DcacParams {
  DcacConfig cfg;
  std::vector<Tensor> experts;  // num_experts x [Co,Ci/G,kt,kh,kw]
  Tensor fc_shared;             // [Ci, hidden], bias-free
  ops::BnState bn;              // over the hidden features
  Tensor fc_alpha_f;            // [hidden, Co]
  Tensor fc_alpha_c;            // [hidden, Ci/G]
  Tensor fc_alpha_t;            // [hidden, kt]
  Tensor fc_alpha_w;            // [hidden, num_experts]
  Tensor conv1;                 // [Ci, Ci] channel mix ahead of the context pool
  Tensor conv2;                 // [Ci, Co*(Ci/G)*kh*kw] pointwise kernel generator
  Tensor w_static;              // [Co,Ci/G,kt,kh,kw]
  Tensor gate_alpha;            // [1]
};

DcacParams make_dcac_params(const DcacConfig& cfg, std::uint64_t seed,
                            const std::string& name_prefix);

// Visits every trainable tensor with its canonical name
// (<prefix>.experts.<i>, <prefix>.fc_shared.w, ...).
void visit_params(DcacParams& params,
                  const std::function<void(const std::string&, Tensor&)>& fn);

// Per-frame attention over the four kernel dimensions.
struct AttentionFactors {
  Tensor alpha_f;  // [T, Co], sigmoid
  Tensor alpha_c;  // [T, Ci/G], sigmoid
  Tensor alpha_t;  // [T, kt], sigmoid
  Tensor alpha_w;  // [T, n], softmax rows
};

AttentionFactors intra_attention_factors(const Tensor& x, DcacParams& params, bool training);

// Attention-weighted expert mixture: [T,Co,Ci/G,kt,kh,kw].
Tensor intra_frame_attention(const Tensor& x, DcacParams& params, bool training,
                             AttentionFactors* factors_out = nullptr);

// Kernel slices initialized from each frame's temporal context:
// [T,Co,Ci/G,kt,kh,kw].
Tensor inter_frame_context(const Tensor& x, DcacParams& params);

// Frame-wise fusion of the two kernel tensors.
Tensor cakg(const Tensor& x, DcacParams& params, bool training);

// Dual-branch convolution: per-frame dynamic kernels plus the shared static
// kernel, same-padded on every axis; [Ci,T,H,W] -> [Co,T,H,W].
Tensor dcac_forward(const Tensor& x, DcacParams& params, bool training);

// x + gate * dcac_forward(x); requires c_in == c_out.
Tensor dcac_residual(const Tensor& x, DcacParams& params, bool training);

// The unfold-based dual convolution on explicit kernel tensors.  Exposed for
// oracle tests; dcac_forward routes through this.
Tensor dual_conv(const Tensor& x, const Tensor& w_dynamic, const Tensor& w_static, int groups);

}  // namespace dcac

#endif  // DCAC_DCAC_HPP_
