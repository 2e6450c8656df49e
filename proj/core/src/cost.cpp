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

#include "dcac/cost.hpp"

namespace dcac {

const char* cost_line_name(CostLine line) {
  switch (line) {
    case CostLine::kUnfoldNeighborhood: return "unfold_neighborhood";
    case CostLine::kGapAttention: return "gap_attention";
    case CostLine::kFcShared: return "fc_shared";
    case CostLine::kBn: return "bn";
    case CostLine::kFcHeads: return "fc_heads";
    case CostLine::kExpertMix: return "expert_mix";
    case CostLine::kAttnApply: return "attn_apply";
    case CostLine::kConv1: return "conv1";
    case CostLine::kGapContext: return "gap_context";
    case CostLine::kUnfoldTime: return "unfold_time";
    case CostLine::kConv2: return "conv2";
    case CostLine::kMul2: return "mul2";
    case CostLine::kConv3dDynamic: return "conv3d_dynamic";
    case CostLine::kConv3dStatic: return "conv3d_static";
    case CostLine::kOther: return "other";
    case CostLine::kNumLines: break;
  }
  return "?";
}

namespace cost_detail {

CostCounter*& active_counter() {
  thread_local CostCounter* counter = nullptr;
  return counter;
}

CostLine& active_line() {
  thread_local CostLine line = CostLine::kOther;
  return line;
}

}  // namespace cost_detail

}  // namespace dcac
