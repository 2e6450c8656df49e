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

#include "dcac/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "dcac/error.hpp"
#include "dcac/rng.hpp"
#include "dcac/serialize.hpp"

namespace dcac {

namespace fs = std::filesystem;

AdamOptimizer::AdamOptimizer(const TrainParams& params)
    : lr_(params.lr), weight_decay_(params.weight_decay) {}

void AdamOptimizer::step(ToyModel& model) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  model.visit_params([&](const std::string& name, Tensor& p) {
    if (!p.requires_grad() || !p.has_grad()) return;
    Slot& slot = slots_[name];
    if (slot.m.empty()) {
      slot.m.assign(p.values().size(), 0.0);
      slot.v.assign(p.values().size(), 0.0);
    }
    const std::vector<double>& g = p.grad();
    std::vector<double>& value = p.values();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double grad = g[i] + weight_decay_ * value[i];
      slot.m[i] = beta1_ * slot.m[i] + (1.0 - beta1_) * grad;
      slot.v[i] = beta2_ * slot.v[i] + (1.0 - beta2_) * grad * grad;
      const double mhat = slot.m[i] / bc1;
      const double vhat = slot.v[i] / bc2;
      value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  });
}

double EpochMetrics::zero_frac(int stage) const {
  auto it = stage_diagnostics.find(stage);
  return it == stage_diagnostics.end() ? 0.0 : it->second.zero_fraction;
}

std::vector<double> per_frame_grad_l2(const Tensor& tap_feature) {
  if (!tap_feature.has_grad()) {
    throw ConsistencyError("tap has no gradient; run backward first");
  }
  const auto& grad = tap_feature.grad();
  const Shape& shape = tap_feature.shape();
  // Stage taps are [C,T,H,W]; the final tap is [T',d].
  std::int64_t t, outer_stride, inner;
  bool channel_major;
  if (shape.size() == 4) {
    t = shape[1];
    inner = shape[2] * shape[3];
    outer_stride = shape[1] * inner;
    channel_major = true;
  } else if (shape.size() == 2) {
    t = shape[0];
    inner = shape[1];
    outer_stride = 0;
    channel_major = false;
  } else {
    throw ShapeError("tap must be [C,T,H,W] or [T,d]");
  }

  std::vector<double> out(static_cast<std::size_t>(t), 0.0);
  if (channel_major) {
    const std::int64_t channels = shape[0];
    for (std::int64_t c = 0; c < channels; ++c) {
      for (std::int64_t ti = 0; ti < t; ++ti) {
        const double* g = grad.data() + c * outer_stride + ti * inner;
        double acc = 0.0;
        for (std::int64_t i = 0; i < inner; ++i) acc += g[i] * g[i];
        out[ti] += acc;
      }
    }
  } else {
    for (std::int64_t ti = 0; ti < t; ++ti) {
      const double* g = grad.data() + ti * inner;
      double acc = 0.0;
      for (std::int64_t i = 0; i < inner; ++i) acc += g[i] * g[i];
      out[ti] = acc;
    }
  }
  for (auto& v : out) v = std::sqrt(v);
  return out;
}

EvalResult evaluate_model(ToyModel& model, const std::vector<Sample>& split, int beam_width,
                          double stretch, std::vector<PerSampleEval>* per_sample) {
  if (beam_width < 1) throw ConfigError("beam width must be >= 1");
  EvalResult result;
  for (const Sample& sample : split) {
    Tensor video = sample.video;
    if (stretch != 1.0) video = stretch_video(video, stretch, 4);
    ForwardResult fwd = model_forward(model, video, /*training=*/false);
    const auto& lp = fwd.final_logits;
    GlossSequence hyp =
        decode_beam(lp.values(), lp.shape()[0], lp.shape()[1], beam_width);
    WerBreakdown b = wer(sample.labels, hyp);
    result.totals.substitutions += b.substitutions;
    result.totals.insertions += b.insertions;
    result.totals.deletions += b.deletions;
    result.totals.ref_length += b.ref_length;
    if (per_sample) per_sample->push_back({sample.id, sample.labels, hyp, b});
  }
  const double ref = static_cast<double>(result.totals.ref_length);
  result.wer = static_cast<double>(result.totals.errors()) / ref;
  result.del_rate = static_cast<double>(result.totals.deletions) / ref;
  result.ins_rate = static_cast<double>(result.totals.insertions) / ref;
  return result;
}

namespace {

void zero_all_grads(ToyModel& model) {
  model.visit_params([](const std::string&, Tensor& p) { p.zero_grad(); });
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& history) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "epoch,loss_final,loss_sr,dev_wer,stage2_zero_frac,stage3_zero_frac,stage4_zero_frac\n";
  for (const auto& m : history) {
    os << m.epoch << "," << m.loss_final << "," << m.loss_sr << "," << m.dev_wer << ","
       << m.zero_frac(2) << "," << m.zero_frac(3) << "," << m.zero_frac(4) << "\n";
  }
}

void write_diagnostics_json(const std::string& path, const std::vector<EpochMetrics>& history) {
  nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
  for (const auto& m : history) {
    nlohmann::ordered_json stages;
    for (const auto& [stage, d] : m.stage_diagnostics) {
      stages["stage" + std::to_string(stage)] = {{"zero_fraction", d.zero_fraction},
                                                 {"peak_to_median", d.peak_to_median},
                                                 {"entropy", d.entropy}};
    }
    epochs.push_back({{"epoch", m.epoch}, {"stages", stages}});
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << epochs.dump(2) << "\n";
}

}  // namespace

TrainResult train_model(ToyModel& model, const std::vector<Sample>& train_set,
                        const std::vector<Sample>& dev_set, const TrainParams& params,
                        const TrainRuntime& runtime) {
  if (train_set.empty() || dev_set.empty()) throw ConfigError("empty dataset split");
  if (params.batch_size < 1 || params.epochs < 1) throw ConfigError("bad training parameters");

  const bool sr_enabled = model.sr_modules.cfg.enabled();
  AdamOptimizer opt(params);
  Rng shuffle_rng(runtime.shuffle_seed ^ 0x5851f42d4c957f2dULL);

  TrainResult result;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= params.epochs; ++epoch) {
    if (std::find(params.decay_epochs.begin(), params.decay_epochs.end(), epoch) !=
        params.decay_epochs.end()) {
      opt.set_lr(opt.lr() * params.decay_factor);
    }
    // Fisher-Yates with the run's own stream keeps epochs reproducible.
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    double sum_final = 0.0, sum_sr = 0.0;
    std::map<int, std::vector<double>> diag_acc;  // stage -> accumulated fields
    std::int64_t samples_seen = 0;

    for (std::size_t start = 0; start < order.size(); start += params.batch_size) {
      const std::size_t batch_end = std::min(order.size(), start + params.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(batch_end - start);
      zero_all_grads(model);
      for (std::size_t bi = start; bi < batch_end; ++bi) {
        const Sample& sample = train_set[order[bi]];
        ForwardResult fwd;
        Tensor loss_final, loss;
        double sr_value = 0.0;
        try {
          fwd = model_forward(model, sample.video, /*training=*/true);
          loss_final = ctc_loss_op(fwd.final_logits, sample.labels);
          loss = loss_final;
          if (sr_enabled) {
            Tensor aux =
                sr_ctc_loss(fwd.taps, sample.labels, model.sr_modules, model.final_classifier);
            sr_value = aux.item();
            loss = ops::add(loss_final, ops::scale(aux, model.sr_modules.cfg.lambda));
          }
        } catch (const NumericError& e) {
          // Non-finite activations surface here (NaN feeding a softmax).
          throw TrainingDivergedError("diverged at epoch " + std::to_string(epoch) + ": " +
                                      e.what());
        }
        const double loss_value = loss.item();
        if (!std::isfinite(loss_value)) {
          throw TrainingDivergedError("non-finite loss at epoch " + std::to_string(epoch));
        }
        sum_final += loss_final.item();
        sum_sr += sr_value;
        backward(ops::scale(loss, inv_batch));

        for (const StageTap& tap : fwd.taps) {
          if (tap.stage_id == kFinalStageId) continue;
          const SpikeDiagnostics d = spike_diagnostics(per_frame_grad_l2(tap.feature));
          auto& acc = diag_acc[tap.stage_id];
          if (acc.empty()) acc.assign(3, 0.0);
          acc[0] += d.zero_fraction;
          acc[1] += d.peak_to_median;
          acc[2] += d.entropy;
        }
        ++samples_seen;
      }
      opt.step(model);
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.loss_final = sum_final / static_cast<double>(samples_seen);
    metrics.loss_sr = sum_sr / static_cast<double>(samples_seen);
    for (const auto& [stage, acc] : diag_acc) {
      SpikeDiagnostics d;
      d.zero_fraction = acc[0] / static_cast<double>(samples_seen);
      d.peak_to_median = acc[1] / static_cast<double>(samples_seen);
      d.entropy = acc[2] / static_cast<double>(samples_seen);
      metrics.stage_diagnostics[stage] = d;
    }
    metrics.dev_wer = evaluate_model(model, dev_set, params.beam_width).wer;
    result.history.push_back(metrics);

    if (metrics.dev_wer < result.best_dev_wer) {
      result.best_dev_wer = metrics.dev_wer;
      result.best_epoch = epoch;
      if (!runtime.out_dir.empty()) {
        save_checkpoint(model, (fs::path(runtime.out_dir) / "checkpoint").string(),
                        {epoch, metrics.dev_wer, runtime.config_hash}, runtime.config_json);
      }
    }
    if (!runtime.out_dir.empty()) {
      write_metrics_csv((fs::path(runtime.out_dir) / "metrics.csv").string(), result.history);
      write_diagnostics_json((fs::path(runtime.out_dir) / "diagnostics.json").string(),
                             result.history);
    }
    if (runtime.verbose) {
      std::cout << "epoch " << epoch << " loss_final " << metrics.loss_final << " loss_sr "
                << metrics.loss_sr << " dev_wer " << metrics.dev_wer << " zero_frac(2,3,4) "
                << metrics.zero_frac(2) << " " << metrics.zero_frac(3) << " "
                << metrics.zero_frac(4) << "\n";
    }
  }
  return result;
}

void save_checkpoint(ToyModel& model, const std::string& dir, const CheckpointMeta& meta,
                     const std::string& config_json) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());

  TensorBundle bundle;
  model.visit_params([&](const std::string& name, Tensor& p) { bundle.emplace(name, p); });
  model.visit_buffers([&](const std::string& name, std::vector<double>& buf) {
    bundle.emplace(name, Tensor::from_data({static_cast<std::int64_t>(buf.size())}, buf));
  });
  save_bundle((fs::path(dir) / "params.dcb").string(), bundle);

  nlohmann::ordered_json manifest;
  manifest["epoch"] = meta.epoch;
  manifest["dev_wer"] = meta.dev_wer;
  manifest["config_hash"] = meta.config_hash;
  manifest["config"] = nlohmann::json::parse(config_json.empty() ? "{}" : config_json);
  std::ofstream os(fs::path(dir) / "manifest.json");
  if (!os) throw IoError("cannot write manifest in " + dir);
  os << manifest.dump(2) << "\n";
}

namespace {

nlohmann::json read_manifest(const std::string& dir) {
  std::ifstream is(fs::path(dir) / "manifest.json");
  if (!is) throw IoError("cannot open manifest.json in " + dir);
  nlohmann::json manifest;
  try {
    is >> manifest;
  } catch (const std::exception& e) {
    throw IoError(std::string("malformed manifest.json: ") + e.what());
  }
  return manifest;
}

}  // namespace

CheckpointMeta read_checkpoint_meta(const std::string& dir) {
  const nlohmann::json manifest = read_manifest(dir);
  CheckpointMeta meta;
  meta.epoch = manifest.value("epoch", 0);
  meta.dev_wer = manifest.value("dev_wer", 0.0);
  meta.config_hash = manifest.value("config_hash", "");
  return meta;
}

std::string checkpoint_config_json(const std::string& dir) {
  const nlohmann::json manifest = read_manifest(dir);
  if (!manifest.contains("config")) throw ConsistencyError("manifest has no embedded config");
  return manifest["config"].dump();
}

CheckpointMeta load_checkpoint(ToyModel& model, const std::string& dir) {
  const CheckpointMeta meta = read_checkpoint_meta(dir);
  TensorBundle bundle = load_bundle((fs::path(dir) / "params.dcb").string());

  model.visit_params([&](const std::string& name, Tensor& p) {
    auto it = bundle.find(name);
    if (it == bundle.end()) throw ConsistencyError("checkpoint missing parameter " + name);
    if (it->second.shape() != p.shape()) {
      throw ConsistencyError("checkpoint shape mismatch for " + name + ": " +
                             shape_str(it->second.shape()) + " vs " + shape_str(p.shape()));
    }
    p.values() = it->second.values();
    bundle.erase(it);
  });
  model.visit_buffers([&](const std::string& name, std::vector<double>& buf) {
    auto it = bundle.find(name);
    if (it == bundle.end()) throw ConsistencyError("checkpoint missing buffer " + name);
    if (it->second.numel() != static_cast<std::int64_t>(buf.size())) {
      throw ConsistencyError("checkpoint buffer size mismatch for " + name);
    }
    buf = it->second.values();
    bundle.erase(it);
  });
  if (!bundle.empty()) {
    throw ConsistencyError("checkpoint has " + std::to_string(bundle.size()) +
                           " entries the model does not expect (first: " +
                           bundle.begin()->first + ")");
  }
  return meta;
}

}  // namespace dcac
