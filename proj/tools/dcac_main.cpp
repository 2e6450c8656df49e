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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dcac/cost_model.hpp"
#include "dcac/dataset.hpp"
#include "dcac/error.hpp"
#include "dcac/model.hpp"
#include "dcac/run_config.hpp"
#include "dcac/sr_ctc.hpp"
#include "dcac/train.hpp"

namespace {

namespace fs = std::filesystem;
using dcac::RunConfig;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDiverged = 4;
constexpr int kExitIntegrity = 5;

// Dimensions the data pipeline owns flow from the world block into the
// model block so the two cannot drift apart.
dcac::ModelConfig resolved_model_config(const RunConfig& cfg) {
  dcac::ModelConfig m = cfg.model;
  m.in_channels = cfg.world.channels;
  m.height = cfg.world.height;
  m.width = cfg.world.width;
  m.vocab_size = cfg.world.num_glosses + 1;
  return m;
}

RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return dcac::default_run_config();
  return dcac::load_run_config(path);
}

void apply_env_seed(RunConfig& cfg) {
  if (const char* env = std::getenv("DCAC_SEED")) {
    cfg.seed = std::strtoull(env, nullptr, 10);
  }
}

int cmd_gen(const std::string& config_path, std::uint64_t seed, bool seed_given,
            const std::string& out, std::int64_t n_train, std::int64_t n_dev) {
  RunConfig cfg = load_config_or_default(config_path);
  if (seed_given) cfg.seed = seed;
  apply_env_seed(cfg);
  dcac::generate_dataset(cfg.world, cfg.seed, out, n_train, n_dev);
  std::cout << "wrote " << n_train << " train and " << n_dev << " dev samples to " << out << "\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& presets,
              std::uint64_t seed, bool seed_given, const std::string& data,
              const std::string& out) {
  RunConfig cfg = load_config_or_default(config_path);
  for (const auto& preset : presets) dcac::apply_preset(cfg, preset);
  if (seed_given) cfg.seed = seed;
  apply_env_seed(cfg);

  dcac::ModelConfig mc = resolved_model_config(cfg);
  mc.validate();
  dcac::ToyModel model = dcac::make_model(mc, cfg.seed);

  const auto train_set = dcac::load_dataset(data, "train");
  const auto dev_set = dcac::load_dataset(data, "dev");

  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw dcac::IoError("cannot create " + out + ": " + ec.message());

  RunConfig resolved = cfg;
  resolved.model = mc;
  dcac::TrainRuntime runtime;
  runtime.out_dir = out;
  runtime.config_hash = dcac::config_hash(resolved);
  runtime.config_json = dcac::run_config_to_json(resolved);
  runtime.shuffle_seed = cfg.seed;
  runtime.verbose = true;

  dcac::TrainResult result = dcac::train_model(model, train_set, dev_set, cfg.train, runtime);
  std::cout << "best dev WER " << result.best_dev_wer << " at epoch " << result.best_epoch << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, int beam,
             const std::string& split, const std::string& per_sample_csv, double stretch) {
  const std::string config_json = dcac::checkpoint_config_json(checkpoint);
  RunConfig cfg = dcac::run_config_from_json(config_json);
  const dcac::CheckpointMeta meta = dcac::read_checkpoint_meta(checkpoint);
  if (!meta.config_hash.empty() && meta.config_hash != dcac::config_hash(cfg)) {
    throw dcac::ConsistencyError("checkpoint config hash mismatch: manifest says " +
                                 meta.config_hash + ", config hashes to " +
                                 dcac::config_hash(cfg));
  }

  dcac::ToyModel model = dcac::make_model(cfg.model, cfg.seed);
  dcac::load_checkpoint(model, checkpoint);

  const auto samples = dcac::load_dataset(data, split);
  std::vector<dcac::PerSampleEval> rows;
  dcac::EvalResult result = dcac::evaluate_model(model, samples, beam, 1.0,
                                                 per_sample_csv.empty() ? nullptr : &rows);

  nlohmann::ordered_json report;
  report["wer"] = result.wer;
  report["del"] = result.del_rate;
  report["ins"] = result.ins_rate;
  report["num_samples"] = samples.size();
  report["beam_width"] = beam;
  report["checkpoint_epoch"] = meta.epoch;
  if (stretch != 1.0) {
    dcac::EvalResult stretched = dcac::evaluate_model(model, samples, beam, stretch);
    report["stretch_factor"] = stretch;
    report["wer_stretched"] = stretched.wer;
  }
  std::cout << report.dump() << "\n";

  if (!per_sample_csv.empty()) {
    std::ofstream os(per_sample_csv);
    if (!os) throw dcac::IoError("cannot write " + per_sample_csv);
    os << "id,ref_len,errors,substitutions,insertions,deletions,wer\n";
    for (const auto& row : rows) {
      os << row.id << "," << row.breakdown.ref_length << "," << row.breakdown.errors() << ","
         << row.breakdown.substitutions << "," << row.breakdown.insertions << ","
         << row.breakdown.deletions << "," << row.breakdown.wer() << "\n";
    }
  }
  return kExitOk;
}

int cmd_cost(const std::string& config_path, std::int64_t frames, bool as_json) {
  RunConfig cfg = load_config_or_default(config_path);
  dcac::ModelConfig mc = resolved_model_config(cfg);
  mc.validate();

  nlohmann::ordered_json doc;
  doc["t"] = frames;
  nlohmann::ordered_json blocks = nlohmann::ordered_json::array();
  std::uint64_t total_exact = 0, total_params = 0;
  double total_approx = 0.0;
  std::string tables;
  for (const int stage : mc.dcac_after) {
    dcac::DcacConfig dc;
    dc.c_in = dc.c_out = mc.stage_widths[static_cast<std::size_t>(stage - 1)];
    dc.groups = mc.dcac_groups == 0 ? static_cast<int>(dc.c_in) : mc.dcac_groups;
    dc.k_t = mc.dcac_kt_for(stage);
    dc.num_experts = mc.dcac_experts;
    dc.reduction = mc.dcac_reduction;
    const dcac::CostBreakdown b =
        dcac::cost_model(dc, frames, mc.height_after(stage), mc.width_after(stage));
    nlohmann::ordered_json entry = nlohmann::json::parse(dcac::cost_breakdown_json(b));
    entry["stage"] = stage;
    blocks.push_back(entry);
    tables += "stage " + std::to_string(stage) + "\n" + dcac::cost_breakdown_table(b);
    total_exact += b.flops_total;
    total_approx += b.flops_approx;
    total_params += b.params_total;
  }
  doc["blocks"] = blocks;
  doc["total"] = {{"flops_exact", total_exact},
                  {"flops_approx", total_approx},
                  {"params_exact", total_params}};
  if (as_json) {
    std::cout << doc.dump(2) << "\n";
  } else {
    std::cout << tables;
    std::cout << "model total at T=" << frames << ": flops_exact " << total_exact
              << " flops_approx " << static_cast<std::uint64_t>(total_approx) << " params "
              << total_params << "\n";
  }
  return kExitOk;
}

int cmd_diagnose(const std::string& checkpoint, const std::string& data, const std::string& stage,
                 const std::string& out_csv, int num_samples, const std::string& split) {
  int stage_id = 0;
  if (stage == "stage2") stage_id = 2;
  else if (stage == "stage3") stage_id = 3;
  else if (stage == "stage4") stage_id = 4;
  else if (stage == "final") stage_id = dcac::kFinalStageId;
  else throw dcac::ConfigError("unknown stage '" + stage + "' (use stage2|stage3|stage4|final)");

  RunConfig cfg = dcac::run_config_from_json(dcac::checkpoint_config_json(checkpoint));
  dcac::ToyModel model = dcac::make_model(cfg.model, cfg.seed);
  dcac::load_checkpoint(model, checkpoint);

  auto samples = dcac::load_dataset(data, split);
  if (num_samples > 0 && static_cast<std::size_t>(num_samples) < samples.size()) {
    samples.resize(static_cast<std::size_t>(num_samples));
  }

  std::ofstream os(out_csv);
  if (!os) throw dcac::IoError("cannot write " + out_csv);
  os << "frame_index,grad_l2,stage\n";

  double zero_frac_sum = 0.0;
  for (const auto& sample : samples) {
    dcac::ForwardResult fwd = dcac::model_forward(model, sample.video, /*training=*/true);
    dcac::Tensor loss = dcac::total_loss(fwd.final_logits, fwd.taps, sample.labels,
                                         model.sr_modules, model.final_classifier);
    dcac::backward(loss);
    const std::vector<double> series = dcac::per_frame_grad_l2(fwd.tap(stage_id));
    for (std::size_t t = 0; t < series.size(); ++t) {
      os << t << "," << series[t] << "," << stage << "\n";
    }
    zero_frac_sum += dcac::spike_diagnostics(series).zero_fraction;
    model.visit_params([](const std::string&, dcac::Tensor& p) { p.zero_grad(); });
  }

  nlohmann::ordered_json summary;
  summary["stage"] = stage;
  summary["num_samples"] = samples.size();
  summary["zero_fraction"] = zero_frac_sum / static_cast<double>(samples.size());
  std::cout << summary.dump() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentiable sequence recognition desk engine"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  std::string gen_config, gen_out;
  std::uint64_t gen_seed = 1;
  std::int64_t n_train = 512, n_dev = 64;
  gen->add_option("--config", gen_config, "run config JSON (world block is used)");
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--n-train", n_train, "training samples");
  gen->add_option("--n-dev", n_dev, "dev samples");

  // train
  auto* train = app.add_subcommand("train", "train a model");
  std::string train_config, train_data, train_out;
  std::vector<std::string> train_presets;
  std::uint64_t train_seed = 1;
  train->add_option("--config", train_config, "run config JSON");
  train->add_option("--preset", train_presets, "named ablation preset (repeatable)");
  auto* train_seed_opt = train->add_option("--seed", train_seed, "seed override");
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "output directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_split = "dev", eval_csv;
  int eval_beam = 10;
  double eval_stretch = 1.0;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint directory")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--beam", eval_beam, "beam width (default 10)");
  eval->add_option("--split", eval_split, "dataset split (default dev)");
  eval->add_option("--per-sample", eval_csv, "write per-sample CSV here");
  eval->add_option("--stretch", eval_stretch, "also report WER under this temporal stretch");

  // cost
  auto* cost = app.add_subcommand("cost", "analytic FLOPs/parameter report");
  std::string cost_config;
  std::int64_t cost_t = 100;
  bool cost_json = false;
  cost->add_option("--config", cost_config, "run config JSON");
  cost->add_option("--t", cost_t, "frame count (default 100)");
  cost->add_flag("--json", cost_json, "emit JSON instead of the table");

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "per-frame gradient norms at a stage tap");
  std::string diag_ckpt, diag_data, diag_stage, diag_out, diag_split = "dev";
  int diag_samples = 4;
  diag->add_option("--checkpoint", diag_ckpt, "checkpoint directory")->required();
  diag->add_option("--data", diag_data, "dataset directory")->required();
  diag->add_option("--stage", diag_stage, "stage2|stage3|stage4|final")->required();
  diag->add_option("--out", diag_out, "output CSV path")->required();
  diag->add_option("--samples", diag_samples, "number of samples (default 4)");
  diag->add_option("--split", diag_split, "dataset split (default dev)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints message/usage
    return e.get_exit_code() == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen(gen_config, gen_seed, gen_seed_opt->count() > 0, gen_out, n_train, n_dev);
    }
    if (train->parsed()) {
      return cmd_train(train_config, train_presets, train_seed, train_seed_opt->count() > 0,
                       train_data, train_out);
    }
    if (eval->parsed()) {
      return cmd_eval(eval_ckpt, eval_data, eval_beam, eval_split, eval_csv, eval_stretch);
    }
    if (cost->parsed()) {
      return cmd_cost(cost_config, cost_t, cost_json);
    }
    if (diag->parsed()) {
      return cmd_diagnose(diag_ckpt, diag_data, diag_stage, diag_out, diag_samples, diag_split);
    }
  } catch (const dcac::TrainingDivergedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const dcac::ConsistencyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIntegrity;
  } catch (const dcac::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const dcac::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
