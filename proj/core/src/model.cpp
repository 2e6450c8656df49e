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

#include "dcac/model.hpp"

#include <algorithm>
#include <cmath>

#include "dcac/error.hpp"
#include "dcac/rng.hpp"

namespace dcac {

bool ModelConfig::has_dcac_after(int stage) const {
  return std::find(dcac_after.begin(), dcac_after.end(), stage) != dcac_after.end();
}

int ModelConfig::dcac_kt_for(int stage) const {
  if (stage < 2 || stage > 4) throw ConfigError("DCAC insertion stages are 2..4");
  return dcac_kt[static_cast<std::size_t>(stage - 2)];
}

std::int64_t ModelConfig::height_after(int stage) const {
  std::int64_t h = height;
  for (int i = 0; i < stage; ++i) h = (h + 1) / 2;
  return h;
}

std::int64_t ModelConfig::width_after(int stage) const {
  std::int64_t w = width;
  for (int i = 0; i < stage; ++i) w = (w + 1) / 2;
  return w;
}

void ModelConfig::validate() const {
  if (stage_widths.size() != 4) throw ConfigError("exactly four stage widths expected");
  for (const auto w : stage_widths) {
    if (w <= 0) throw ConfigError("stage widths must be positive");
  }
  if (in_channels <= 0 || height < 8 || width < 8) {
    throw ConfigError("input must be at least 8x8 with one channel");
  }
  if (dcac_kt.size() != 3) throw ConfigError("dcac_kt lists k_t for stages 2,3,4");
  for (const int stage : dcac_after) {
    if (stage < 2 || stage > 4) {
      throw ConfigError("DCAC is inserted after stages 2..4 only (stage 1 is too low-level)");
    }
  }
  if (vocab_size < 2) throw ConfigError("vocabulary needs at least one gloss plus blank");
  if (temporal_dim <= 0 || rnn_hidden <= 0 || lsd_dim <= 0 || ltm_dim <= 0) {
    throw ConfigError("module widths must be positive");
  }
  if (temporal_kernel <= 0 || temporal_kernel % 2 == 0) {
    throw ConfigError("temporal kernel must be odd and positive");
  }
  sr.validate();
  if (sr.classifier_mode == ClassifierMode::kAllShared && ltm_dim != final_dim()) {
    throw ConfigError("all_shared classifier needs ltm_dim == 2*rnn_hidden, got " +
                      std::to_string(ltm_dim) + " vs " + std::to_string(final_dim()));
  }
}

namespace {

Tensor init_normal(Shape shape, double stddev, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (auto& v : t.values()) v = rng.normal(0.0, stddev);
  return t;
}

Tensor init_uniform(Shape shape, double bound, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (auto& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

ToyModel make_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ToyModel m;
  m.cfg = cfg;

  std::int64_t c_prev = cfg.in_channels;
  for (int stage = 1; stage <= 4; ++stage) {
    const std::int64_t c_out = cfg.stage_widths[static_cast<std::size_t>(stage - 1)];
    StageBlock block;
    Rng rng = named_rng(seed, "stages." + std::to_string(stage) + ".conv");
    block.conv_w = init_normal({c_out, c_prev, 3, 3},
                               std::sqrt(2.0 / static_cast<double>(c_prev * 9)), rng);
    block.conv_b = Tensor::zeros({c_out}, true);
    block.bn = ops::make_bn_state(c_out);
    m.stages.push_back(std::move(block));
    c_prev = c_out;
  }

  for (const int stage : cfg.dcac_after) {
    DcacConfig dc;
    dc.c_in = dc.c_out = cfg.stage_widths[static_cast<std::size_t>(stage - 1)];
    dc.groups = cfg.dcac_groups == 0 ? static_cast<int>(dc.c_in) : cfg.dcac_groups;
    dc.k_t = cfg.dcac_kt_for(stage);
    dc.k_h = dc.k_w = 1;
    dc.num_experts = cfg.dcac_experts;
    dc.reduction = cfg.dcac_reduction;
    m.dcac_blocks.emplace(stage,
                          make_dcac_params(dc, seed, "dcac." + std::to_string(stage)));
  }

  const std::int64_t c4 = cfg.stage_widths[3];
  const int tk = cfg.temporal_kernel;
  {
    Rng rng = named_rng(seed, "temporal.conv1");
    m.temporal.conv1_w = init_normal({cfg.temporal_dim, c4, tk},
                                     std::sqrt(2.0 / static_cast<double>(c4 * tk)), rng);
    m.temporal.conv1_b = Tensor::zeros({cfg.temporal_dim}, true);
  }
  {
    Rng rng = named_rng(seed, "temporal.conv2");
    m.temporal.conv2_w = init_normal({cfg.temporal_dim, cfg.temporal_dim, tk},
                                     std::sqrt(2.0 / static_cast<double>(cfg.temporal_dim * tk)), rng);
    m.temporal.conv2_b = Tensor::zeros({cfg.temporal_dim}, true);
  }

  const double rnn_bound = 1.0 / std::sqrt(static_cast<double>(cfg.rnn_hidden));
  std::int64_t rnn_in = cfg.temporal_dim;
  for (int layer = 0; layer < 2; ++layer) {
    std::array<RnnDirection, 2> dirs;
    for (int d = 0; d < 2; ++d) {
      const std::string name =
          "rnn.l" + std::to_string(layer) + (d == 0 ? ".fwd" : ".bwd");
      Rng rng = named_rng(seed, name);
      dirs[d].w_x = init_uniform({rnn_in, cfg.rnn_hidden}, rnn_bound, rng);
      dirs[d].w_h = init_uniform({cfg.rnn_hidden, cfg.rnn_hidden}, rnn_bound, rng);
      dirs[d].b = Tensor::zeros({cfg.rnn_hidden}, true);
    }
    m.rnn.push_back(std::move(dirs));
    rnn_in = cfg.final_dim();
  }

  m.final_classifier = make_classifier(cfg.final_dim(), cfg.vocab_size, seed, "classifier.final");

  // Auxiliary supervision modules exist whenever any stage is configured,
  // regardless of lambda; disabled runs simply never evaluate them.
  m.sr_modules.cfg = cfg.sr;
  for (const int stage : cfg.sr.stages) {
    const std::int64_t c_in = cfg.stage_widths[static_cast<std::size_t>(stage - 1)];
    m.sr_modules.lsd_by_stage.emplace(
        stage, make_lsd_params(c_in, cfg.height_after(stage), cfg.width_after(stage), cfg.lsd_dim,
                               cfg.lsd_grid, seed, "srctc.lsd" + std::to_string(stage)));
    if (!cfg.sr.ltm_shared) {
      m.sr_modules.ltm_by_stage.emplace(
          stage, make_ltm_params(cfg.lsd_dim, cfg.ltm_dim, seed,
                                 "srctc.ltm" + std::to_string(stage)));
    }
  }
  if (cfg.sr.ltm_shared && !cfg.sr.stages.empty()) {
    m.sr_modules.ltm_by_stage.emplace(0, make_ltm_params(cfg.lsd_dim, cfg.ltm_dim, seed, "srctc.ltm"));
  }
  switch (cfg.sr.classifier_mode) {
    case ClassifierMode::kSharedAuxOnly:
    case ClassifierMode::kSharedFrozen:
      m.sr_modules.aux_shared = make_classifier(cfg.ltm_dim, cfg.vocab_size, seed, "srctc.classifier");
      if (cfg.sr.classifier_mode == ClassifierMode::kSharedFrozen) {
        m.sr_modules.aux_shared.weight.set_requires_grad(false);
        m.sr_modules.aux_shared.bias.set_requires_grad(false);
      }
      break;
    case ClassifierMode::kUnshared:
      for (const int stage : cfg.sr.stages) {
        m.sr_modules.aux_by_stage.emplace(
            stage, make_classifier(cfg.ltm_dim, cfg.vocab_size, seed,
                                   "srctc.classifier" + std::to_string(stage)));
      }
      break;
    case ClassifierMode::kAllShared:
      break;  // aliases the final classifier
  }
  return m;
}

void ToyModel::visit_params(const std::function<void(const std::string&, Tensor&)>& fn) {
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const std::string prefix = "stages." + std::to_string(i + 1);
    fn(prefix + ".conv.w", stages[i].conv_w);
    fn(prefix + ".conv.b", stages[i].conv_b);
    fn(prefix + ".bn.gamma", stages[i].bn.gamma);
    fn(prefix + ".bn.beta", stages[i].bn.beta);
  }
  for (auto& [stage, params] : dcac_blocks) {
    const std::string prefix = "dcac." + std::to_string(stage) + ".";
    dcac::visit_params(params, [&](const std::string& name, Tensor& t) { fn(prefix + name, t); });
  }
  fn("temporal.conv1.w", temporal.conv1_w);
  fn("temporal.conv1.b", temporal.conv1_b);
  fn("temporal.conv2.w", temporal.conv2_w);
  fn("temporal.conv2.b", temporal.conv2_b);
  for (std::size_t layer = 0; layer < rnn.size(); ++layer) {
    for (int d = 0; d < 2; ++d) {
      const std::string prefix =
          "rnn.l" + std::to_string(layer) + (d == 0 ? ".fwd" : ".bwd");
      fn(prefix + ".w_x", rnn[layer][d].w_x);
      fn(prefix + ".w_h", rnn[layer][d].w_h);
      fn(prefix + ".b", rnn[layer][d].b);
    }
  }
  fn("classifier.final.w", final_classifier.weight);
  fn("classifier.final.b", final_classifier.bias);
  sr_modules.visit_params(fn);
}

void ToyModel::visit_buffers(
    const std::function<void(const std::string&, std::vector<double>&)>& fn) {
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const std::string prefix = "stages." + std::to_string(i + 1) + ".bn";
    fn(prefix + ".running_mean", stages[i].bn.running_mean);
    fn(prefix + ".running_var", stages[i].bn.running_var);
  }
  for (auto& [stage, params] : dcac_blocks) {
    const std::string prefix = "dcac." + std::to_string(stage) + ".bn";
    fn(prefix + ".running_mean", params.bn.running_mean);
    fn(prefix + ".running_var", params.bn.running_var);
  }
}

std::int64_t ToyModel::num_params() {
  std::int64_t n = 0;
  visit_params([&](const std::string&, Tensor& t) { n += t.numel(); });
  return n;
}

std::int64_t model_t_prime(std::int64_t t) { return t / 2 / 2; }

namespace {

// One direction of a vanilla recurrent layer over [T, in] rows.
std::vector<Tensor> rnn_direction(const Tensor& x, const RnnDirection& dir, bool backward_dir) {
  const std::int64_t t = x.shape()[0];
  const std::int64_t hidden = dir.w_h.shape()[0];
  // Input projection for the whole sequence at once.
  Tensor projected = ops::matmul_fc(x, dir.w_x);  // [T, h]
  std::vector<Tensor> states(static_cast<std::size_t>(t));
  Tensor h = Tensor::zeros({1, hidden});
  for (std::int64_t step = 0; step < t; ++step) {
    const std::int64_t ti = backward_dir ? t - 1 - step : step;
    Tensor pre = ops::add(ops::add(ops::slice(projected, 0, ti, 1), ops::matmul_fc(h, dir.w_h)),
                          dir.b);
    h = ops::tanh(pre);
    states[static_cast<std::size_t>(ti)] = h;
  }
  return states;
}

Tensor bidirectional_layer(const Tensor& x, const std::array<RnnDirection, 2>& dirs) {
  std::vector<Tensor> fwd = rnn_direction(x, dirs[0], false);
  std::vector<Tensor> bwd = rnn_direction(x, dirs[1], true);
  std::vector<Tensor> rows;
  rows.reserve(fwd.size());
  for (std::size_t ti = 0; ti < fwd.size(); ++ti) {
    rows.push_back(ops::concat({fwd[ti], bwd[ti]}, 1));
  }
  return ops::concat(rows, 0);  // [T, 2h]
}

}  // namespace

const Tensor& ForwardResult::tap(int stage_id) const {
  for (const auto& t : taps) {
    if (t.stage_id == stage_id) return t.feature;
  }
  throw ConfigError("no tap for stage " + std::to_string(stage_id));
}

ForwardResult model_forward(ToyModel& model, const Tensor& video, bool training) {
  const ModelConfig& cfg = model.cfg;
  if (video.rank() != 4) throw ShapeError("video must be [C,T,H,W]");
  if (video.shape()[0] != cfg.in_channels || video.shape()[2] != cfg.height ||
      video.shape()[3] != cfg.width) {
    throw ShapeError("video shape " + shape_str(video.shape()) + " does not match the model");
  }
  const std::int64_t t = video.shape()[1];
  if (t < 4) throw ShapeError("need at least 4 frames, got " + std::to_string(t));

  ForwardResult result;
  Tensor x = video;
  for (int stage = 1; stage <= 4; ++stage) {
    StageBlock& block = model.stages[static_cast<std::size_t>(stage - 1)];
    x = ops::conv2d(x, block.conv_w, block.conv_b, 2, 2, 1, 1, 1);
    x = ops::relu(ops::batch_norm(x, block.bn, 0, training));
    if (cfg.has_dcac_after(stage)) {
      x = dcac_residual(x, model.dcac_blocks.at(stage), training);
    }
    if (stage >= 2) {
      result.taps.push_back({stage, x, cfg.sr.supervises(stage)});
    }
  }

  // Frame descriptor: [C4, T] by pooling the remaining spatial extent.
  const std::int64_t c4 = cfg.stage_widths[3];
  Tensor frames = ops::reshape(ops::global_avg_pool(x, {2, 3}), {c4, t});

  const int tpad = (cfg.temporal_kernel - 1) / 2;
  Tensor h = ops::relu(
      ops::conv1d(frames, model.temporal.conv1_w, model.temporal.conv1_b, 1, tpad));
  h = ops::max_pool1d(h, 2, 2);
  h = ops::relu(ops::conv1d(h, model.temporal.conv2_w, model.temporal.conv2_b, 1, tpad));
  h = ops::max_pool1d(h, 2, 2);  // [M, T']
  Tensor seq = ops::permute(h, {1, 0});  // [T', M]

  for (const auto& layer : model.rnn) seq = bidirectional_layer(seq, layer);

  result.taps.push_back({kFinalStageId, seq, false});
  result.final_logits = stage_logits(seq, model.final_classifier);
  return result;
}

}  // namespace dcac
