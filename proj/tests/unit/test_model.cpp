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

#include <cmath>
#include <cstring>

#include "dcac/model.hpp"
#include "dcac/sr_ctc.hpp"
#include "oracles.hpp"

using namespace dcac;
namespace dt = dcac::testing;

namespace {

// Small-but-complete configuration that keeps unit runtimes low.
ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.in_channels = 1;
  cfg.height = cfg.width = 12;
  cfg.stage_widths = {4, 8, 16, 32};
  cfg.dcac_after = {2, 3, 4};
  cfg.dcac_kt = {3, 5, 7};
  cfg.dcac_reduction = 8;
  cfg.temporal_dim = 16;
  cfg.rnn_hidden = 8;
  cfg.vocab_size = 6;
  cfg.lsd_dim = 8;
  cfg.ltm_dim = 16;
  cfg.sr.stages = {2, 3, 4};
  return cfg;
}

}  // namespace

TEST_CASE("temporal downsampling arithmetic") {
  CHECK(model_t_prime(64) == 16);
  CHECK(model_t_prime(17) == 4);
}

TEST_CASE("forward shapes, taps and log-prob rows") {
  ModelConfig cfg = tiny_config();
  ToyModel model = make_model(cfg, 5);
  Rng rng(6);
  Tensor video = dt::random_tensor({1, 16, 12, 12}, rng);
  ForwardResult fwd = model_forward(model, video, /*training=*/true);

  REQUIRE(fwd.final_logits.shape() == Shape{4, 6});
  // rows are normalized log-probabilities
  for (int t = 0; t < 4; ++t) {
    double sum = 0.0;
    for (int k = 0; k < 6; ++k) sum += std::exp(fwd.final_logits.values()[t * 6 + k]);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  REQUIRE(fwd.taps.size() == 4);  // stages 2,3,4 + final
  CHECK(fwd.tap(2).shape() == Shape{8, 16, 3, 3});
  CHECK(fwd.tap(3).shape() == Shape{16, 16, 2, 2});
  CHECK(fwd.tap(4).shape() == Shape{32, 16, 1, 1});
  CHECK(fwd.tap(kFinalStageId).shape() == Shape{4, 16});
  for (const auto& tap : fwd.taps) {
    if (tap.stage_id != kFinalStageId) CHECK(tap.supervised);
  }
}

TEST_CASE("shape violations are rejected") {
  ModelConfig cfg = tiny_config();
  ToyModel model = make_model(cfg, 5);
  CHECK_THROWS_AS(model_forward(model, Tensor::zeros({2, 16, 12, 12}), true), ShapeError);
  CHECK_THROWS_AS(model_forward(model, Tensor::zeros({1, 16, 10, 12}), true), ShapeError);
  CHECK_THROWS_AS(model_forward(model, Tensor::zeros({1, 3, 12, 12}), true), ShapeError);
}

TEST_CASE("fresh gates: outputs equal the insertion-free model bit for bit") {
  ModelConfig with = tiny_config();
  ModelConfig without = tiny_config();
  without.dcac_after = {};
  ToyModel a = make_model(with, 9);
  ToyModel b = make_model(without, 9);
  Rng rng(10);
  Tensor video = dt::random_tensor({1, 20, 12, 12}, rng);
  ForwardResult fa = model_forward(a, video, /*training=*/true);
  ForwardResult fb = model_forward(b, video, /*training=*/true);
  REQUIRE(fa.final_logits.numel() == fb.final_logits.numel());
  CHECK(std::memcmp(fa.final_logits.data(), fb.final_logits.data(),
                    sizeof(double) * fa.final_logits.numel()) == 0);
}

TEST_CASE("inference purity: disabled auxiliaries never touch the forward pass") {
  ModelConfig with = tiny_config();
  with.sr.lambda = 0.1;  // modules exist...
  ModelConfig stripped = tiny_config();
  stripped.sr.stages = {};  // ...or do not exist at all
  ToyModel a = make_model(with, 11);
  ToyModel b = make_model(stripped, 11);
  Rng rng(12);
  Tensor video = dt::random_tensor({1, 16, 12, 12}, rng);
  ForwardResult fa = model_forward(a, video, /*training=*/false);
  ForwardResult fb = model_forward(b, video, /*training=*/false);
  CHECK(std::memcmp(fa.final_logits.data(), fb.final_logits.data(),
                    sizeof(double) * fa.final_logits.numel()) == 0);
}

TEST_CASE("classifier-sharing topology at the model level") {
  SUBCASE("all_shared resolves every head to the final object") {
    ModelConfig cfg = tiny_config();
    cfg.sr.classifier_mode = ClassifierMode::kAllShared;
    ToyModel m = make_model(cfg, 13);
    for (const int stage : {2, 3, 4}) {
      CHECK(&m.sr_modules.classifier_for(stage, m.final_classifier) == &m.final_classifier);
    }
  }
  SUBCASE("shared_aux_only keeps one auxiliary object distinct from the final") {
    ModelConfig cfg = tiny_config();
    cfg.sr.classifier_mode = ClassifierMode::kSharedAuxOnly;
    ToyModel m = make_model(cfg, 13);
    auto& c2 = m.sr_modules.classifier_for(2, m.final_classifier);
    CHECK(&c2 == &m.sr_modules.classifier_for(3, m.final_classifier));
    CHECK(&c2 == &m.sr_modules.classifier_for(4, m.final_classifier));
    CHECK(c2.weight.impl() != m.final_classifier.weight.impl());
  }
  SUBCASE("shared_frozen stays at zero gradient through a full training loss") {
    ModelConfig cfg = tiny_config();
    cfg.sr.classifier_mode = ClassifierMode::kSharedFrozen;
    ToyModel m = make_model(cfg, 13);
    Rng rng(14);
    Tensor video = dt::random_tensor({1, 16, 12, 12}, rng);
    ForwardResult fwd = model_forward(m, video, true);
    Tensor loss = total_loss(fwd.final_logits, fwd.taps, {1, 2}, m.sr_modules,
                             m.final_classifier);
    backward(loss);
    CHECK_FALSE(m.sr_modules.aux_shared.weight.has_grad());
    CHECK(m.final_classifier.weight.has_grad());
  }
  SUBCASE("unshared gives every stage its own object") {
    ModelConfig cfg = tiny_config();
    cfg.sr.classifier_mode = ClassifierMode::kUnshared;
    ToyModel m = make_model(cfg, 13);
    auto& c2 = m.sr_modules.classifier_for(2, m.final_classifier);
    auto& c3 = m.sr_modules.classifier_for(3, m.final_classifier);
    auto& c4 = m.sr_modules.classifier_for(4, m.final_classifier);
    CHECK(c2.weight.impl() != c3.weight.impl());
    CHECK(c3.weight.impl() != c4.weight.impl());
    CHECK(c2.weight.impl() != m.final_classifier.weight.impl());
  }
  SUBCASE("all_shared demands matching widths") {
    ModelConfig cfg = tiny_config();
    cfg.ltm_dim = 24;  // != 2*rnn_hidden
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("gradient reach: supervised stages receive gradient everywhere") {
  ModelConfig cfg = tiny_config();
  ToyModel m = make_model(cfg, 15);
  // a zero gate blocks gradient into the dynamic branch by construction,
  // so put the blocks into a generic post-step state first
  for (auto& [stage, p] : m.dcac_blocks) p.gate_alpha.values()[0] = 0.05;
  Rng rng(16);
  Tensor video = dt::random_tensor({1, 16, 12, 12}, rng);
  ForwardResult fwd = model_forward(m, video, true);
  Tensor loss =
      total_loss(fwd.final_logits, fwd.taps, {2, 1}, m.sr_modules, m.final_classifier);
  backward(loss);
  int zero_grad_params = 0;
  m.visit_params([&](const std::string& name, Tensor& p) {
    if (!p.requires_grad()) return;
    REQUIRE_MESSAGE(p.has_grad(), name);
    double norm = 0.0;
    for (const double g : p.grad()) norm += g * g;
    if (norm == 0.0) ++zero_grad_params;
  });
  CHECK(zero_grad_params == 0);
}

TEST_CASE("end-to-end gradients match finite differences on sampled parameters") {
  ModelConfig cfg = tiny_config();
  cfg.dcac_after = {3};
  cfg.dcac_kt = {3, 3, 3};
  cfg.sr.stages = {3};
  ToyModel m = make_model(cfg, 17);
  Rng rng(18);
  Tensor video = dt::random_tensor({1, 16, 12, 12}, rng);
  const GlossSequence target = {2, 4};

  std::vector<Tensor> params;
  m.visit_params([&](const std::string&, Tensor& p) {
    if (p.requires_grad()) params.push_back(p);
  });
  auto fwd = [&]() {
    ForwardResult f = model_forward(m, video, true);
    return total_loss(f.final_logits, f.taps, target, m.sr_modules, m.final_classifier);
  };
  // h = 1e-6: the network is piecewise smooth (relu, max-pool), and a wider
  // step occasionally straddles a kink
  const auto report = dt::grad_check(fwd, params, 1e-6, 1e-3, 1e-7, 2, 19);
  INFO("checked " << report.checked << " entries, worst rel " << report.worst_rel);
  CHECK(report.failures == 0);
}

TEST_CASE("parameter registry has unique names and a stable count") {
  ModelConfig cfg = tiny_config();
  ToyModel m = make_model(cfg, 20);
  std::map<std::string, int> seen;
  m.visit_params([&](const std::string& name, Tensor&) { ++seen[name]; });
  for (const auto& [name, count] : seen) {
    CAPTURE(name);
    CHECK(count == 1);
  }
  CHECK(m.num_params() > 0);
}
