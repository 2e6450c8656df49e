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

#include "dcac/run_config.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "dcac/error.hpp"
#include "dcac/rng.hpp"

namespace dcac {

using nlohmann::json;

RunConfig default_run_config() { return RunConfig{}; }

namespace {

json world_json(const WorldConfig& w) {
  return {{"num_glosses", w.num_glosses}, {"channels", w.channels},
          {"height", w.height},           {"width", w.width},
          {"canvas_margin", w.canvas_margin},
          {"min_duration", w.min_duration}, {"max_duration", w.max_duration},
          {"min_len", w.min_len},         {"max_len", w.max_len},
          {"noise_sigma", w.noise_sigma}, {"stretch_prob", w.stretch_prob},
          {"stretch_min", w.stretch_min}, {"stretch_max", w.stretch_max}};
}

void world_from(const json& j, WorldConfig& w) {
  w.num_glosses = j.value("num_glosses", w.num_glosses);
  w.channels = j.value("channels", w.channels);
  w.height = j.value("height", w.height);
  w.width = j.value("width", w.width);
  w.canvas_margin = j.value("canvas_margin", w.canvas_margin);
  w.min_duration = j.value("min_duration", w.min_duration);
  w.max_duration = j.value("max_duration", w.max_duration);
  w.min_len = j.value("min_len", w.min_len);
  w.max_len = j.value("max_len", w.max_len);
  w.noise_sigma = j.value("noise_sigma", w.noise_sigma);
  w.stretch_prob = j.value("stretch_prob", w.stretch_prob);
  w.stretch_min = j.value("stretch_min", w.stretch_min);
  w.stretch_max = j.value("stretch_max", w.stretch_max);
}

json sr_json(const SrCtcConfig& s) {
  return {{"lambda", s.lambda},
          {"stages", s.stages},
          {"classifier_mode", classifier_mode_name(s.classifier_mode)},
          {"ltm_shared", s.ltm_shared}};
}

void sr_from(const json& j, SrCtcConfig& s) {
  s.lambda = j.value("lambda", s.lambda);
  if (j.contains("stages")) s.stages = j["stages"].get<std::vector<int>>();
  if (j.contains("classifier_mode")) {
    s.classifier_mode = classifier_mode_from_name(j["classifier_mode"].get<std::string>());
  }
  s.ltm_shared = j.value("ltm_shared", s.ltm_shared);
}

json model_json(const ModelConfig& m) {
  return {{"in_channels", m.in_channels},
          {"height", m.height},
          {"width", m.width},
          {"stage_widths", m.stage_widths},
          {"dcac_after", m.dcac_after},
          {"dcac_kt", m.dcac_kt},
          {"dcac_groups", m.dcac_groups},
          {"dcac_experts", m.dcac_experts},
          {"dcac_reduction", m.dcac_reduction},
          {"temporal_dim", m.temporal_dim},
          {"temporal_kernel", m.temporal_kernel},
          {"rnn_hidden", m.rnn_hidden},
          {"vocab_size", m.vocab_size},
          {"lsd_dim", m.lsd_dim},
          {"ltm_dim", m.ltm_dim},
          {"lsd_grid", m.lsd_grid},
          {"sr_ctc", sr_json(m.sr)}};
}

void model_from(const json& j, ModelConfig& m) {
  m.in_channels = j.value("in_channels", m.in_channels);
  m.height = j.value("height", m.height);
  m.width = j.value("width", m.width);
  if (j.contains("stage_widths")) m.stage_widths = j["stage_widths"].get<std::vector<std::int64_t>>();
  if (j.contains("dcac_after")) m.dcac_after = j["dcac_after"].get<std::vector<int>>();
  if (j.contains("dcac_kt")) m.dcac_kt = j["dcac_kt"].get<std::vector<int>>();
  m.dcac_groups = j.value("dcac_groups", m.dcac_groups);
  m.dcac_experts = j.value("dcac_experts", m.dcac_experts);
  m.dcac_reduction = j.value("dcac_reduction", m.dcac_reduction);
  m.temporal_dim = j.value("temporal_dim", m.temporal_dim);
  m.temporal_kernel = j.value("temporal_kernel", m.temporal_kernel);
  m.rnn_hidden = j.value("rnn_hidden", m.rnn_hidden);
  m.vocab_size = j.value("vocab_size", m.vocab_size);
  m.lsd_dim = j.value("lsd_dim", m.lsd_dim);
  m.ltm_dim = j.value("ltm_dim", m.ltm_dim);
  m.lsd_grid = j.value("lsd_grid", m.lsd_grid);
  if (j.contains("sr_ctc")) sr_from(j["sr_ctc"], m.sr);
}

json train_json(const TrainParams& t) {
  return {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"beam_width", t.beam_width},
          {"lr", t.lr},
          {"weight_decay", t.weight_decay},
          {"decay_epochs", t.decay_epochs},
          {"decay_factor", t.decay_factor}};
}

void train_from(const json& j, TrainParams& t) {
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.beam_width = j.value("beam_width", t.beam_width);
  t.lr = j.value("lr", t.lr);
  t.weight_decay = j.value("weight_decay", t.weight_decay);
  if (j.contains("decay_epochs")) t.decay_epochs = j["decay_epochs"].get<std::vector<int>>();
  t.decay_factor = j.value("decay_factor", t.decay_factor);
}

}  // namespace

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["world"] = world_json(cfg.world);
  j["model"] = model_json(cfg.model);
  j["train"] = train_json(cfg.train);
  return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  RunConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("world")) world_from(j["world"], cfg.world);
  if (j.contains("model")) model_from(j["model"], cfg.model);
  if (j.contains("train")) train_from(j["train"], cfg.train);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return run_config_from_json(buf.str());
}

std::string config_hash(const RunConfig& cfg) {
  // nlohmann::json objects iterate in sorted key order, so dump() of the
  // round-tripped document is canonical.
  const std::string canonical = json::parse(run_config_to_json(cfg)).dump();
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(canonical);
  return os.str();
}

namespace {

const std::vector<std::pair<std::string, void (*)(RunConfig&)>>& preset_table() {
  static const std::vector<std::pair<std::string, void (*)(RunConfig&)>> table = {
      {"baseline", [](RunConfig& c) { c.model.dcac_after = {}; c.model.sr.stages = {}; }},
      {"dcac-only", [](RunConfig& c) { c.model.sr.stages = {}; }},
      {"srctc-only", [](RunConfig& c) { c.model.dcac_after = {}; }},
      {"full", [](RunConfig&) {}},
      {"table3-none", [](RunConfig& c) { c.model.dcac_after = {}; }},
      {"table3-L-3-3-3", [](RunConfig& c) { c.model.dcac_kt = {3, 3, 3}; }},
      {"table3-L-3-5-7", [](RunConfig& c) { c.model.dcac_kt = {3, 5, 7}; }},
      {"table3-L-3-7-11", [](RunConfig& c) { c.model.dcac_kt = {3, 7, 11}; }},
      {"table3-L-5-7-9", [](RunConfig& c) { c.model.dcac_kt = {5, 7, 9}; }},
      {"table3-L-5-9-13", [](RunConfig& c) { c.model.dcac_kt = {5, 9, 13}; }},
      {"table3-L-13-13-13", [](RunConfig& c) { c.model.dcac_kt = {13, 13, 13}; }},
      {"table6-mode1",
       [](RunConfig& c) { c.model.sr.classifier_mode = ClassifierMode::kSharedAuxOnly; }},
      {"table6-mode2",
       [](RunConfig& c) { c.model.sr.classifier_mode = ClassifierMode::kSharedFrozen; }},
      {"table6-mode3",
       [](RunConfig& c) { c.model.sr.classifier_mode = ClassifierMode::kAllShared; }},
      {"table6-mode4",
       [](RunConfig& c) { c.model.sr.classifier_mode = ClassifierMode::kUnshared; }},
      {"table7-off", [](RunConfig& c) { c.model.sr.stages = {}; }},
      {"table7-stage4-only", [](RunConfig& c) { c.model.sr.stages = {4}; }},
      {"table7-stages-3-4", [](RunConfig& c) { c.model.sr.stages = {3, 4}; }},
      {"table7-stages-2-3-4", [](RunConfig& c) { c.model.sr.stages = {2, 3, 4}; }},
  };
  return table;
}

}  // namespace

void apply_preset(RunConfig& cfg, const std::string& name) {
  for (const auto& [preset, fn] : preset_table()) {
    if (preset == name) {
      fn(cfg);
      return;
    }
  }
  throw ConfigError("unknown preset: " + name);
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [preset, fn] : preset_table()) names.push_back(preset);
  return names;
}

}  // namespace dcac
