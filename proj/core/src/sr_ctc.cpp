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

#include "dcac/sr_ctc.hpp"

#include <algorithm>
#include <cmath>

#include "dcac/error.hpp"
#include "dcac/rng.hpp"

namespace dcac {

const char* classifier_mode_name(ClassifierMode mode) {
  switch (mode) {
    case ClassifierMode::kSharedAuxOnly: return "shared_aux_only";
    case ClassifierMode::kSharedFrozen: return "shared_frozen";
    case ClassifierMode::kAllShared: return "all_shared";
    case ClassifierMode::kUnshared: return "unshared";
  }
  return "?";
}

ClassifierMode classifier_mode_from_name(const std::string& name) {
  if (name == "shared_aux_only") return ClassifierMode::kSharedAuxOnly;
  if (name == "shared_frozen") return ClassifierMode::kSharedFrozen;
  if (name == "all_shared") return ClassifierMode::kAllShared;
  if (name == "unshared") return ClassifierMode::kUnshared;
  throw ConfigError("unknown classifier mode: " + name);
}

bool SrCtcConfig::supervises(int stage) const {
  return std::find(stages.begin(), stages.end(), stage) != stages.end();
}

void SrCtcConfig::validate() const {
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  for (const int s : stages) {
    if (s < 2 || s > 4) {
      throw ConfigError("supervised stages must be within {2,3,4}; stage 1 is never supervised");
    }
  }
}

namespace {

Tensor init_normal(Shape shape, double stddev, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (auto& v : t.values()) v = rng.normal(0.0, stddev);
  return t;
}

}  // namespace

SharedClassifier make_classifier(std::int64_t d, std::int64_t vocab, std::uint64_t seed,
                                 const std::string& name) {
  if (d <= 0 || vocab < 2) throw ConfigError("classifier needs d >= 1 and vocab >= 2");
  SharedClassifier c;
  Rng rng = named_rng(seed, name + ".w");
  c.weight = init_normal({d, vocab}, std::sqrt(1.0 / static_cast<double>(d)), rng);
  c.bias = Tensor::zeros({vocab}, true);
  return c;
}

LsdParams make_lsd_params(std::int64_t c_in, std::int64_t h, std::int64_t w, std::int64_t d,
                          int grid_target, std::uint64_t seed, const std::string& name) {
  if (c_in <= 0 || d <= 0) throw ConfigError("lsd needs positive channel counts");
  const int g = std::min<std::int64_t>(grid_target, h);
  if (h < g || w < g) throw ConfigError("lsd target grid exceeds the feature extent");
  LsdParams p;
  p.grid = g;
  p.skip = (h == g && w == g && c_in == d);
  if (!p.skip) {
    const std::int64_t kh = h / g, kw = w / g;
    Rng rng = named_rng(seed, name + ".conv");
    p.conv_w = init_normal({d, c_in, kh, kw},
                           std::sqrt(2.0 / static_cast<double>(c_in * kh * kw)), rng);
    p.conv_b = Tensor::zeros({d}, true);
  }
  return p;
}

Tensor lsd(const Tensor& x, const LsdParams& params) {
  if (x.rank() != 4) throw ShapeError("lsd input must be [C,T,H,W]");
  const std::int64_t t = x.shape()[1];
  Tensor grid_feat = x;
  std::int64_t d = x.shape()[0];
  if (!params.skip) {
    const std::int64_t kh = params.conv_w.shape()[2], kw = params.conv_w.shape()[3];
    grid_feat = ops::conv2d(x, params.conv_w, params.conv_b, static_cast<int>(kh),
                            static_cast<int>(kw), 0, 0, 1);
    d = params.conv_w.shape()[0];
  }
  Tensor pooled = ops::global_avg_pool(grid_feat, {2, 3});
  return ops::permute(ops::reshape(pooled, {d, t}), {1, 0});
}

LtmParams make_ltm_params(std::int64_t d_in, std::int64_t d_out, std::uint64_t seed,
                          const std::string& name) {
  if (d_in <= 0 || d_out <= 0) throw ConfigError("ltm needs positive widths");
  LtmParams p;
  {
    Rng rng = named_rng(seed, name + ".conv1");
    p.conv1_w = init_normal({d_out, d_in, 5}, std::sqrt(2.0 / static_cast<double>(d_in * 5)), rng);
    p.conv1_b = Tensor::zeros({d_out}, true);
  }
  {
    Rng rng = named_rng(seed, name + ".conv2");
    p.conv2_w = init_normal({d_out, d_out, 5}, std::sqrt(2.0 / static_cast<double>(d_out * 5)), rng);
    p.conv2_b = Tensor::zeros({d_out}, true);
  }
  return p;
}

Tensor ltm(const Tensor& x, const LtmParams& params) {
  if (x.rank() != 2) throw ShapeError("ltm input must be [T,d]");
  const std::int64_t t = x.shape()[0];
  if (t < 4) throw ShapeError("ltm needs T >= 4 for two poolings, got " + std::to_string(t));
  Tensor h = ops::permute(x, {1, 0});  // [d, T]
  h = ops::relu(ops::conv1d(h, params.conv1_w, params.conv1_b, 1, 2));
  h = ops::max_pool1d(h, 2, 2);
  h = ops::relu(ops::conv1d(h, params.conv2_w, params.conv2_b, 1, 2));
  h = ops::max_pool1d(h, 2, 2);
  return ops::permute(h, {1, 0});  // [T', M]
}

Tensor stage_logits(const Tensor& x, const SharedClassifier& clf) {
  if (x.rank() != 2 || x.shape()[1] != clf.dim()) {
    throw ShapeError("classifier expects [T'," + std::to_string(clf.dim()) + "], got " +
                     shape_str(x.shape()));
  }
  return ops::log_softmax(ops::matmul_fc(x, clf.weight, clf.bias), 1);
}

LtmParams& SrCtcModules::ltm_for(int stage) {
  if (cfg.ltm_shared) {
    auto it = ltm_by_stage.find(0);
    if (it == ltm_by_stage.end()) throw ConfigError("shared ltm module missing");
    return it->second;
  }
  auto it = ltm_by_stage.find(stage);
  if (it == ltm_by_stage.end()) {
    throw ConfigError("no ltm module for stage " + std::to_string(stage));
  }
  return it->second;
}

SharedClassifier& SrCtcModules::classifier_for(int stage, SharedClassifier& final_clf) {
  if (stage == kFinalStageId) return final_clf;
  switch (cfg.classifier_mode) {
    case ClassifierMode::kSharedAuxOnly:
    case ClassifierMode::kSharedFrozen:
      return aux_shared;
    case ClassifierMode::kAllShared:
      return final_clf;
    case ClassifierMode::kUnshared: {
      auto it = aux_by_stage.find(stage);
      if (it == aux_by_stage.end()) {
        throw ConfigError("no classifier for stage " + std::to_string(stage));
      }
      return it->second;
    }
  }
  throw ConfigError("unreachable classifier mode");
}

void SrCtcModules::visit_params(const std::function<void(const std::string&, Tensor&)>& fn) {
  for (auto& [stage, p] : lsd_by_stage) {
    if (p.skip) continue;
    const std::string prefix = "srctc.lsd" + std::to_string(stage);
    fn(prefix + ".conv.w", p.conv_w);
    fn(prefix + ".conv.b", p.conv_b);
  }
  for (auto& [key, p] : ltm_by_stage) {
    const std::string prefix =
        cfg.ltm_shared ? std::string("srctc.ltm") : "srctc.ltm" + std::to_string(key);
    fn(prefix + ".conv1.w", p.conv1_w);
    fn(prefix + ".conv1.b", p.conv1_b);
    fn(prefix + ".conv2.w", p.conv2_w);
    fn(prefix + ".conv2.b", p.conv2_b);
  }
  if (cfg.classifier_mode == ClassifierMode::kSharedAuxOnly ||
      cfg.classifier_mode == ClassifierMode::kSharedFrozen) {
    fn("srctc.classifier.w", aux_shared.weight);
    fn("srctc.classifier.b", aux_shared.bias);
  }
  if (cfg.classifier_mode == ClassifierMode::kUnshared) {
    for (auto& [stage, clf] : aux_by_stage) {
      const std::string prefix = "srctc.classifier" + std::to_string(stage);
      fn(prefix + ".w", clf.weight);
      fn(prefix + ".b", clf.bias);
    }
  }
}

Tensor sr_ctc_loss(const std::vector<StageTap>& taps, const GlossSequence& target,
                   SrCtcModules& modules, SharedClassifier& final_clf) {
  modules.cfg.validate();
  Tensor total;
  bool any = false;
  for (const StageTap& tap : taps) {
    if (tap.stage_id == kFinalStageId || !tap.supervised) continue;
    auto lsd_it = modules.lsd_by_stage.find(tap.stage_id);
    if (lsd_it == modules.lsd_by_stage.end()) {
      throw ConfigError("no lsd module for supervised stage " + std::to_string(tap.stage_id));
    }
    Tensor frame_feat = lsd(tap.feature, lsd_it->second);
    Tensor temporal = ltm(frame_feat, modules.ltm_for(tap.stage_id));
    Tensor logits = stage_logits(temporal, modules.classifier_for(tap.stage_id, final_clf));
    Tensor loss;
    try {
      loss = ctc_loss_op(logits, target);
    } catch (const InfeasibleAlignmentError& e) {
      throw InfeasibleAlignmentError("stage " + std::to_string(tap.stage_id) + ": " + e.what());
    }
    total = any ? ops::add(total, loss) : loss;
    any = true;
  }
  return any ? total : Tensor::scalar(0.0);
}

Tensor total_loss(const Tensor& final_logits, const std::vector<StageTap>& taps,
                  const GlossSequence& target, SrCtcModules& modules,
                  SharedClassifier& final_clf) {
  Tensor loss = ctc_loss_op(final_logits, target);
  if (modules.cfg.enabled()) {
    Tensor aux = sr_ctc_loss(taps, target, modules, final_clf);
    loss = ops::add(loss, ops::scale(aux, modules.cfg.lambda));
  }
  return loss;
}

}  // namespace dcac
