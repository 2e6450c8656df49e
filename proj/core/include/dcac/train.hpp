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

#ifndef DCAC_TRAIN_HPP_
#define DCAC_TRAIN_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dcac/dataset.hpp"
#include "dcac/model.hpp"
#include "dcac/wer.hpp"

namespace dcac {

struct TrainParams {
  int epochs = 30;
  int batch_size = 2;
  int beam_width = 10;
  double lr = 1e-3;
  double weight_decay = 1e-3;
  std::vector<int> decay_epochs = {15, 22};  // lr *= decay_factor entering these
  double decay_factor = 0.2;
};

// Adam with L2 regularization added to the gradient.  Parameters that are
// frozen or received no gradient this step are left untouched.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(const TrainParams& params);

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  void step(ToyModel& model);

 private:
  struct Slot {
    std::vector<double> m;
    std::vector<double> v;
  };
  std::map<std::string, Slot> slots_;
  double lr_;
  double weight_decay_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::int64_t t_ = 0;
};

struct EpochMetrics {
  int epoch = 0;
  double loss_final = 0.0;
  double loss_sr = 0.0;  // unweighted auxiliary aggregate
  double dev_wer = 0.0;
  std::map<int, SpikeDiagnostics> stage_diagnostics;  // keyed by stage id

  double zero_frac(int stage) const;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  double best_dev_wer = 1e9;
  int best_epoch = -1;
};

struct TrainRuntime {
  std::string out_dir;       // empty: no checkpoint/metrics files
  std::string config_hash;   // embedded into the checkpoint manifest
  std::string config_json;   // full config document for the manifest
  std::uint64_t shuffle_seed = 1;
  bool verbose = false;      // one line per epoch on stdout
};

// Runs the full loop: shuffled batches, gradient accumulation over the
// batch, Adam step, per-epoch dev WER, spike diagnostics at every stage tap
// and best-WER checkpointing.  Throws TrainingDivergedError on a non-finite
// loss (any checkpoint already written stays on disk).
TrainResult train_model(ToyModel& model, const std::vector<Sample>& train_set,
                        const std::vector<Sample>& dev_set, const TrainParams& params,
                        const TrainRuntime& runtime);

struct EvalResult {
  WerBreakdown totals;      // aggregated over the split
  double wer = 0.0;         // sum(errors) / sum(ref lengths)
  double del_rate = 0.0;
  double ins_rate = 0.0;
};

struct PerSampleEval {
  std::string id;
  GlossSequence reference;
  GlossSequence hypothesis;
  WerBreakdown breakdown;
};

// Beam decodes every sample in eval mode.  `stretch` != 1 resamples the
// inputs first (temporal robustness probe).
EvalResult evaluate_model(ToyModel& model, const std::vector<Sample>& split, int beam_width,
                          double stretch = 1.0, std::vector<PerSampleEval>* per_sample = nullptr);

// L2 norm of the tap gradient per frame; requires a prior backward pass.
std::vector<double> per_frame_grad_l2(const Tensor& tap_feature);

struct CheckpointMeta {
  int epoch = 0;
  double dev_wer = 0.0;
  std::string config_hash;
};

// dir/params.dcb (trainables + batch-norm buffers) and dir/manifest.json.
void save_checkpoint(ToyModel& model, const std::string& dir, const CheckpointMeta& meta,
                     const std::string& config_json);

// Reads the manifest of a checkpoint directory; throws IoError /
// ConsistencyError when missing or internally inconsistent.
CheckpointMeta read_checkpoint_meta(const std::string& dir);
std::string checkpoint_config_json(const std::string& dir);

// Loads parameters and buffers into a model built from the same config.
// Shape or name mismatches raise ConsistencyError.
CheckpointMeta load_checkpoint(ToyModel& model, const std::string& dir);

}  // namespace dcac

#endif  // DCAC_TRAIN_HPP_
