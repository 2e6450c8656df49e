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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dcac/run_config.hpp"
#include "dcac/train.hpp"
#include "oracles.hpp"

using namespace dcac;
namespace fs = std::filesystem;
namespace dt = dcac::testing;

namespace {

ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.in_channels = 1;
  cfg.height = cfg.width = 12;
  cfg.stage_widths = {4, 8, 16, 32};
  cfg.dcac_after = {3, 4};
  cfg.dcac_kt = {3, 3, 5};
  cfg.dcac_reduction = 8;
  cfg.temporal_dim = 16;
  cfg.rnn_hidden = 8;
  cfg.vocab_size = 7;
  cfg.lsd_dim = 8;
  cfg.ltm_dim = 16;
  cfg.sr.stages = {2, 3, 4};
  return cfg;
}

WorldConfig tiny_world() {
  WorldConfig world;
  world.num_glosses = 6;
  world.min_len = 2;
  world.max_len = 3;
  return world;
}

TrainParams quick_params(int epochs) {
  TrainParams p;
  p.epochs = epochs;
  p.batch_size = 2;
  p.beam_width = 3;
  p.decay_epochs = {2};
  return p;
}

}  // namespace

TEST_CASE("per-frame gradient norms from a tap") {
  Tensor tap = Tensor::zeros({2, 3, 1, 2}, true);
  backward(ops::sum_all(ops::mul(tap, tap)));  // grads all zero: values are zero
  auto series0 = per_frame_grad_l2(tap);
  CHECK(series0 == std::vector<double>{0.0, 0.0, 0.0});

  Tensor tap2 = Tensor::from_data({1, 2, 1, 1}, {3.0, 4.0}, true);
  backward(ops::sum_all(ops::mul(tap2, tap2)));  // grad = 2x = [6, 8]
  auto series = per_frame_grad_l2(tap2);
  CHECK(series[0] == doctest::Approx(6.0));
  CHECK(series[1] == doctest::Approx(8.0));
}

TEST_CASE("adam drives a quadratic toward its minimum") {
  ModelConfig cfg = tiny_model_config();
  cfg.sr.stages = {};
  ToyModel m = make_model(cfg, 1);
  TrainParams params = quick_params(1);
  params.lr = 0.05;
  params.weight_decay = 0.0;
  AdamOptimizer opt(params);
  // abuse one real parameter as the optimization variable
  Tensor& theta = m.final_classifier.bias;
  double first_loss = 0.0, last_loss = 0.0;
  for (int step = 0; step < 200; ++step) {
    theta.zero_grad();
    Tensor target = Tensor::full(theta.shape(), 3.0);
    Tensor diff = ops::sub(theta, target);
    Tensor loss = ops::sum_all(ops::mul(diff, diff));
    if (step == 0) first_loss = loss.item();
    last_loss = loss.item();
    backward(loss);
    opt.step(m);
  }
  CHECK(last_loss < 0.01 * first_loss);
}

TEST_CASE("two-epoch run: metrics, determinism and file outputs") {
  const WorldConfig world = tiny_world();
  const auto train_set = generate_split(world, 31, "train", 8);
  const auto dev_set = generate_split(world, 31, "dev", 4);

  auto run = [&](const std::string& dir) {
    ToyModel m = make_model(tiny_model_config(), 33);
    TrainRuntime runtime;
    runtime.out_dir = dir;
    runtime.shuffle_seed = 33;
    return train_model(m, train_set, dev_set, quick_params(2), runtime);
  };
  const fs::path base = fs::temp_directory_path() / "dcac_train_test";
  fs::remove_all(base);
  const TrainResult a = run((base / "a").string());
  const TrainResult b = run((base / "b").string());

  REQUIRE(a.history.size() == 2);
  CHECK(a.best_epoch >= 1);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(a.history[i].loss_final == b.history[i].loss_final);
    CHECK(a.history[i].dev_wer == b.history[i].dev_wer);
    CHECK(a.history[i].zero_frac(2) == b.history[i].zero_frac(2));
  }

  // metrics.csv with the pinned column header
  std::ifstream is(base / "a" / "metrics.csv");
  REQUIRE(is.good());
  std::string header;
  std::getline(is, header);
  CHECK(header ==
        "epoch,loss_final,loss_sr,dev_wer,stage2_zero_frac,stage3_zero_frac,stage4_zero_frac");
  CHECK(fs::exists(base / "a" / "diagnostics.json"));
  CHECK(fs::exists(base / "a" / "checkpoint" / "params.dcb"));
  CHECK(fs::exists(base / "a" / "checkpoint" / "manifest.json"));
  fs::remove_all(base);
}

TEST_CASE("a disabled regularizer reproduces the no-module baseline exactly") {
  const WorldConfig world = tiny_world();
  const auto train_set = generate_split(world, 41, "train", 6);
  const auto dev_set = generate_split(world, 41, "dev", 3);

  auto run = [&](ModelConfig cfg) {
    ToyModel m = make_model(cfg, 43);
    TrainRuntime runtime;
    runtime.shuffle_seed = 43;
    return train_model(m, train_set, dev_set, quick_params(2), runtime);
  };

  ModelConfig no_modules = tiny_model_config();
  no_modules.sr.stages = {};
  ModelConfig lambda_zero = tiny_model_config();
  lambda_zero.sr.lambda = 0.0;  // modules exist but the aggregate is off
  ModelConfig empty_set = tiny_model_config();
  empty_set.sr.stages = {};
  empty_set.sr.lambda = 0.1;

  const TrainResult base = run(no_modules);
  const TrainResult lz = run(lambda_zero);
  const TrainResult es = run(empty_set);
  for (std::size_t i = 0; i < base.history.size(); ++i) {
    CHECK(base.history[i].loss_final == lz.history[i].loss_final);
    CHECK(base.history[i].dev_wer == lz.history[i].dev_wer);
    CHECK(base.history[i].loss_final == es.history[i].loss_final);
    CHECK(base.history[i].dev_wer == es.history[i].dev_wer);
  }
}

TEST_CASE("checkpoint round trip reproduces the dev WER exactly") {
  const WorldConfig world = tiny_world();
  const auto train_set = generate_split(world, 51, "train", 6);
  const auto dev_set = generate_split(world, 51, "dev", 4);

  const fs::path dir = fs::temp_directory_path() / "dcac_ckpt_test";
  fs::remove_all(dir);

  ModelConfig cfg = tiny_model_config();
  ToyModel m = make_model(cfg, 53);
  TrainRuntime runtime;
  runtime.out_dir = dir.string();
  runtime.config_hash = "cafebabe";
  runtime.shuffle_seed = 53;
  const TrainResult result = train_model(m, train_set, dev_set, quick_params(2), runtime);

  ToyModel fresh = make_model(cfg, 999);  // different init; weights come from disk
  const CheckpointMeta meta = load_checkpoint(fresh, (dir / "checkpoint").string());
  CHECK(meta.config_hash == "cafebabe");
  const EvalResult eval = evaluate_model(fresh, dev_set, quick_params(2).beam_width);
  CHECK(eval.wer == doctest::Approx(result.best_dev_wer).epsilon(1e-12));
  fs::remove_all(dir);
}

TEST_CASE("greedy equals beam width one across the dev split") {
  const WorldConfig world = tiny_world();
  const auto dev_set = generate_split(world, 61, "dev", 5);
  ToyModel m = make_model(tiny_model_config(), 63);
  const EvalResult beam1 = evaluate_model(m, dev_set, 1);
  // decode by hand with the greedy path
  WerBreakdown totals;
  for (const auto& s : dev_set) {
    ForwardResult fwd = model_forward(m, s.video, false);
    const GlossSequence hyp = decode_greedy(fwd.final_logits.values(),
                                            fwd.final_logits.shape()[0],
                                            fwd.final_logits.shape()[1]);
    const WerBreakdown b = wer(s.labels, hyp);
    totals.substitutions += b.substitutions;
    totals.insertions += b.insertions;
    totals.deletions += b.deletions;
    totals.ref_length += b.ref_length;
  }
  CHECK(beam1.totals.errors() == totals.errors());
}

TEST_CASE("aggregate WER is sum-of-errors over sum-of-lengths") {
  // three-sample fixture, counted by hand: refs of lengths 2,3,1 with
  // 1, 0 and 2 errors -> 3/6, not the mean of per-sample WERs
  ToyModel m = make_model(tiny_model_config(), 71);
  WerBreakdown b1 = wer({1, 2}, {1, 3});        // 1 sub
  WerBreakdown b2 = wer({1, 2, 3}, {1, 2, 3});  // clean
  WerBreakdown b3 = wer({4}, {2, 2});           // 1 sub + 1 ins
  const double aggregate =
      static_cast<double>(b1.errors() + b2.errors() + b3.errors()) /
      static_cast<double>(b1.ref_length + b2.ref_length + b3.ref_length);
  CHECK(aggregate == doctest::Approx(0.5));
  const double mean_of_wers = (b1.wer() + b2.wer() + b3.wer()) / 3.0;
  CHECK(mean_of_wers != doctest::Approx(aggregate));
}

TEST_CASE("stretched evaluation runs without shape failures") {
  const WorldConfig world = tiny_world();
  const auto dev_set = generate_split(world, 81, "dev", 4);
  ToyModel m = make_model(tiny_model_config(), 83);
  for (const double f : {0.8, 1.2}) {
    const EvalResult r = evaluate_model(m, dev_set, 2, f);
    CHECK(std::isfinite(r.wer));
  }
}

TEST_CASE("divergence raises TrainingDivergedError and keeps the checkpoint") {
  const WorldConfig world = tiny_world();
  const auto train_set = generate_split(world, 91, "train", 4);
  const auto dev_set = generate_split(world, 91, "dev", 2);
  const fs::path dir = fs::temp_directory_path() / "dcac_diverge_test";
  fs::remove_all(dir);

  ModelConfig cfg = tiny_model_config();
  ToyModel m = make_model(cfg, 93);
  TrainRuntime runtime;
  runtime.out_dir = dir.string();
  runtime.shuffle_seed = 93;
  train_model(m, train_set, dev_set, quick_params(1), runtime);
  REQUIRE(fs::exists(dir / "checkpoint" / "params.dcb"));

  // poison the weights; the next run must report divergence, not crash
  m.visit_params([](const std::string&, Tensor& p) {
    for (auto& v : p.values()) v = 1e200;
  });
  CHECK_THROWS_AS(train_model(m, train_set, dev_set, quick_params(1), runtime),
                  TrainingDivergedError);
  CHECK(fs::exists(dir / "checkpoint" / "params.dcb"));  // last good one retained
  fs::remove_all(dir);
}

TEST_CASE("run config: hash stability, round trip and presets") {
  RunConfig cfg = default_run_config();
  const std::string h1 = config_hash(cfg);
  RunConfig round = run_config_from_json(run_config_to_json(cfg));
  CHECK(config_hash(round) == h1);

  apply_preset(cfg, "table7-stage4-only");
  CHECK(cfg.model.sr.stages == std::vector<int>{4});
  CHECK(config_hash(cfg) != h1);

  apply_preset(cfg, "table3-L-3-7-11");
  CHECK(cfg.model.dcac_kt == std::vector<int>{3, 7, 11});
  apply_preset(cfg, "table6-mode3");
  CHECK(cfg.model.sr.classifier_mode == ClassifierMode::kAllShared);
  apply_preset(cfg, "baseline");
  CHECK(cfg.model.dcac_after.empty());
  CHECK(cfg.model.sr.stages.empty());
  CHECK_THROWS_AS(apply_preset(cfg, "not-a-preset"), ConfigError);
}
