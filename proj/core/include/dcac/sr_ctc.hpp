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

#ifndef DCAC_SR_CTC_HPP_
#define DCAC_SR_CTC_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dcac/ctc.hpp"
#include "dcac/ops.hpp"
#include "dcac/tensor.hpp"

namespace dcac {

// Which classifier objects exist and who shares them.
enum class ClassifierMode {
  kSharedAuxOnly,  // one object for all auxiliary stages, separate final
  kSharedFrozen,   // as above but the auxiliary object never trains
  kAllShared,      // one object everywhere, including the final output
  kUnshared,       // every stage and the final output has its own
};

const char* classifier_mode_name(ClassifierMode mode);
ClassifierMode classifier_mode_from_name(const std::string& name);

struct SrCtcConfig {
  double lambda = 0.1;
  std::vector<int> stages = {2, 3, 4};  // subset of {2,3,4}
  ClassifierMode classifier_mode = ClassifierMode::kAllShared;
  bool ltm_shared = true;

  bool supervises(int stage) const;
  bool enabled() const { return lambda > 0.0 && !stages.empty(); }
  void validate() const;
};

// Identifier for the network-output tap alongside stages 2..4.
inline constexpr int kFinalStageId = -1;

// A named intermediate feature subject to auxiliary supervision.
struct StageTap {
  int stage_id = 0;      // 2, 3, 4 or kFinalStageId
  Tensor feature;        // [C,T,H,W] for stages, [T',d] for the final tap
  bool supervised = false;
};

// One affine classifier; shared modes alias the same object across heads.
struct SharedClassifier {
  Tensor weight;  // [d, V]
  Tensor bias;    // [V]
  std::int64_t dim() const { return weight.shape()[0]; }
};

SharedClassifier make_classifier(std::int64_t d, std::int64_t vocab, std::uint64_t seed,
                                 const std::string& name);

// Spatial adapter: one strided conv to a small grid, then global pooling.
// The conv is omitted when the feature already matches (grid, grid, d).
struct LsdParams {
  bool skip = false;
  Tensor conv_w;  // [d, C, kh, kw] with kernel == stride
  Tensor conv_b;  // [d]
  int grid = 7;
};

LsdParams make_lsd_params(std::int64_t c_in, std::int64_t h, std::int64_t w, std::int64_t d,
                          int grid_target, std::uint64_t seed, const std::string& name);

// [C,T,H,W] -> [T, d].
Tensor lsd(const Tensor& x, const LsdParams& params);

// Temporal adapter {K5, P2, K5, P2} with ReLU after each conv.
struct LtmParams {
  Tensor conv1_w;  // [M, d, 5]
  Tensor conv1_b;
  Tensor conv2_w;  // [M, M, 5]
  Tensor conv2_b;
};

LtmParams make_ltm_params(std::int64_t d_in, std::int64_t d_out, std::uint64_t seed,
                          const std::string& name);

// [T, d] -> [T', M] with T' = floor(floor(T/2)/2); needs T >= 4.
Tensor ltm(const Tensor& x, const LtmParams& params);

// Affine head then per-frame log-softmax: [T', d] -> [T', V].
Tensor stage_logits(const Tensor& x, const SharedClassifier& clf);

// Every training-only module of the auxiliary supervision path.
struct SrCtcModules {
  SrCtcConfig cfg;
  std::map<int, LsdParams> lsd_by_stage;
  std::map<int, LtmParams> ltm_by_stage;  // single entry under key 0 when shared
  SharedClassifier aux_shared;            // modes kSharedAuxOnly / kSharedFrozen
  std::map<int, SharedClassifier> aux_by_stage;  // mode kUnshared

  LtmParams& ltm_for(int stage);
  // Classifier object serving `stage`, honoring the sharing mode;
  // `final_clf` is the network's output classifier.
  SharedClassifier& classifier_for(int stage, SharedClassifier& final_clf);

  void visit_params(const std::function<void(const std::string&, Tensor&)>& fn);
};

// Sum of per-stage CTC losses over the supervised taps (Eq.-style unweighted
// aggregate).  Infeasible stages raise InfeasibleAlignmentError naming the
// stage.  Returns scalar zero when nothing is supervised.
Tensor sr_ctc_loss(const std::vector<StageTap>& taps, const GlossSequence& target,
                   SrCtcModules& modules, SharedClassifier& final_clf);

// final CTC loss + lambda * auxiliary aggregate.  The auxiliary path is not
// evaluated at all when disabled, so a disabled run is bit-identical to a
// model without these modules.
Tensor total_loss(const Tensor& final_logits, const std::vector<StageTap>& taps,
                  const GlossSequence& target, SrCtcModules& modules,
                  SharedClassifier& final_clf);

}  // namespace dcac

#endif  // DCAC_SR_CTC_HPP_
