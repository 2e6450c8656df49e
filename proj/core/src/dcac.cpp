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

#include "dcac/dcac.hpp"

#include <cmath>

#include "dcac/cost.hpp"
#include "dcac/error.hpp"
#include "dcac/rng.hpp"

namespace dcac {

void DcacConfig::validate() const {
  if (c_in <= 0 || c_out <= 0) throw ConfigError("channel counts must be positive");
  if (groups <= 0 || c_in % groups != 0 || c_out % groups != 0) {
    throw ConfigError("groups must divide both channel counts");
  }
  if (k_t <= 0 || k_h <= 0 || k_w <= 0 || k_t % 2 == 0 || k_h % 2 == 0 || k_w % 2 == 0) {
    throw ConfigError("kernel extents must be odd and positive");
  }
  if (num_experts <= 0) throw ConfigError("need at least one expert");
  if (reduction <= 0 || c_in / reduction < 1) {
    throw ConfigError("reduction " + std::to_string(reduction) + " leaves no hidden units for " +
                      std::to_string(c_in) + " channels");
  }
}

namespace {

Tensor init_normal(Shape shape, double stddev, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (auto& v : t.values()) v = rng.normal(0.0, stddev);
  return t;
}

}  // namespace

DcacParams make_dcac_params(const DcacConfig& cfg, std::uint64_t seed,
                            const std::string& name_prefix) {
  cfg.validate();
  DcacParams p;
  p.cfg = cfg;
  const std::int64_t hidden = cfg.hidden();
  const std::int64_t m = cfg.c_out * cfg.cig() * cfg.k_h * cfg.k_w;

  // Kaiming fan-in for the kernels, Xavier-style for the generator fcs.
  const double expert_std = std::sqrt(2.0 / static_cast<double>(cfg.cig() * cfg.kernel_numel()));
  for (int i = 0; i < cfg.num_experts; ++i) {
    Rng rng = named_rng(seed, name_prefix + ".experts." + std::to_string(i));
    p.experts.push_back(init_normal(cfg.kernel_shape(), expert_std, rng));
  }
  {
    Rng rng = named_rng(seed, name_prefix + ".fc_shared");
    p.fc_shared = init_normal({cfg.c_in, hidden}, std::sqrt(2.0 / cfg.c_in), rng);
  }
  p.bn = ops::make_bn_state(hidden);
  {
    Rng rng = named_rng(seed, name_prefix + ".fc_alpha_f");
    p.fc_alpha_f = init_normal({hidden, cfg.c_out}, std::sqrt(1.0 / hidden), rng);
  }
  {
    Rng rng = named_rng(seed, name_prefix + ".fc_alpha_c");
    p.fc_alpha_c = init_normal({hidden, cfg.cig()}, std::sqrt(1.0 / hidden), rng);
  }
  {
    Rng rng = named_rng(seed, name_prefix + ".fc_alpha_t");
    p.fc_alpha_t = init_normal({hidden, cfg.k_t}, std::sqrt(1.0 / hidden), rng);
  }
  {
    Rng rng = named_rng(seed, name_prefix + ".fc_alpha_w");
    p.fc_alpha_w = init_normal({hidden, cfg.num_experts}, std::sqrt(1.0 / hidden), rng);
  }
  {
    Rng rng = named_rng(seed, name_prefix + ".conv1");
    p.conv1 = init_normal({cfg.c_in, cfg.c_in}, std::sqrt(1.0 / cfg.c_in), rng);
  }
  {
    Rng rng = named_rng(seed, name_prefix + ".conv2");
    p.conv2 = init_normal({cfg.c_in, m}, std::sqrt(1.0 / cfg.c_in), rng);
  }
  {
    Rng rng = named_rng(seed, name_prefix + ".w_static");
    p.w_static = init_normal(cfg.kernel_shape(), expert_std, rng);
  }
  p.gate_alpha = Tensor::zeros({1}, true);
  return p;
}

void visit_params(DcacParams& p,
                  const std::function<void(const std::string&, Tensor&)>& fn) {
  for (std::size_t i = 0; i < p.experts.size(); ++i) {
    fn("experts." + std::to_string(i), p.experts[i]);
  }
  fn("fc_shared.w", p.fc_shared);
  fn("bn.gamma", p.bn.gamma);
  fn("bn.beta", p.bn.beta);
  fn("fc_alpha_f.w", p.fc_alpha_f);
  fn("fc_alpha_c.w", p.fc_alpha_c);
  fn("fc_alpha_t.w", p.fc_alpha_t);
  fn("fc_alpha_w.w", p.fc_alpha_w);
  fn("conv1.w", p.conv1);
  fn("conv2.w", p.conv2);
  fn("w_static", p.w_static);
  fn("gate.alpha", p.gate_alpha);
}

namespace {

void check_feature_shape(const Tensor& x, const DcacConfig& cfg) {
  if (x.rank() != 4 || x.shape()[0] != cfg.c_in) {
    throw ShapeError("expected feature map [C=" + std::to_string(cfg.c_in) + ",T,H,W], got " +
                     shape_str(x.shape()));
  }
}

// Pooled per-frame channel descriptor: [C,T,H,W] -> [T,C].
Tensor pooled_frames(const Tensor& x, CostLine line) {
  LineScope scope(line);
  Tensor pooled = ops::global_avg_pool(x, {2, 3});
  Tensor flat = ops::reshape(pooled, {x.shape()[0], x.shape()[1]});
  return ops::permute(flat, {1, 0});
}

}  // namespace

AttentionFactors intra_attention_factors(const Tensor& x, DcacParams& p, bool training) {
  p.cfg.validate();
  check_feature_shape(x, p.cfg);

  Tensor pooled = pooled_frames(x, CostLine::kGapAttention);  // [T, C]
  Tensor reduced;
  {
    LineScope scope(CostLine::kFcShared);
    reduced = ops::matmul_fc(pooled, p.fc_shared);
  }
  {
    LineScope scope(CostLine::kBn);
    reduced = ops::batch_norm(reduced, p.bn, 1, training);
  }
  Tensor xprime = ops::relu(reduced);

  AttentionFactors f;
  {
    LineScope scope(CostLine::kFcHeads);
    f.alpha_f = ops::sigmoid(ops::matmul_fc(xprime, p.fc_alpha_f));
    f.alpha_c = ops::sigmoid(ops::matmul_fc(xprime, p.fc_alpha_c));
    f.alpha_t = ops::sigmoid(ops::matmul_fc(xprime, p.fc_alpha_t));
    f.alpha_w = ops::softmax(ops::matmul_fc(xprime, p.fc_alpha_w), 1);
  }
  return f;
}

Tensor intra_frame_attention(const Tensor& x, DcacParams& p, bool training,
                             AttentionFactors* factors_out) {
  AttentionFactors f = intra_attention_factors(x, p, training);
  const auto& cfg = p.cfg;
  const std::int64_t t = x.shape()[1];

  Tensor mix;
  {
    LineScope scope(CostLine::kExpertMix);
    for (int i = 0; i < cfg.num_experts; ++i) {
      Tensor weight_i = ops::reshape(ops::slice(f.alpha_w, 1, i, 1), {t, 1, 1, 1, 1, 1});
      Tensor term = ops::mul(weight_i, p.experts[i]);
      mix = i == 0 ? term : ops::add(mix, term);
    }
  }

  // Each factor scales its own kernel axis: alpha_f the output channels,
  // alpha_c the input channels, alpha_t the temporal taps.
  Tensor w_intra;
  {
    LineScope scope(CostLine::kAttnApply);
    Tensor af = ops::reshape(f.alpha_f, {t, cfg.c_out, 1, 1, 1, 1});
    Tensor ac = ops::reshape(f.alpha_c, {t, 1, cfg.cig(), 1, 1, 1});
    Tensor at = ops::reshape(f.alpha_t, {t, 1, 1, cfg.k_t, 1, 1});
    w_intra = ops::mul(ops::mul(ops::mul(mix, af), ac), at);
  }

  if (factors_out) *factors_out = std::move(f);
  return w_intra;
}

Tensor inter_frame_context(const Tensor& x, DcacParams& p) {
  p.cfg.validate();
  check_feature_shape(x, p.cfg);
  const auto& cfg = p.cfg;
  const std::int64_t t = x.shape()[1];

  Tensor mixed;
  {
    LineScope scope(CostLine::kConv1);
    Tensor w1 = ops::reshape(p.conv1, {cfg.c_in, cfg.c_in, 1, 1});
    mixed = ops::conv2d(x, w1, Tensor(), 1, 1, 0, 0, 1);
  }
  Tensor pooled;
  {
    LineScope scope(CostLine::kGapContext);
    pooled = ops::reshape(ops::global_avg_pool(mixed, {2, 3}), {cfg.c_in, t});
  }
  Tensor windows;
  {
    LineScope scope(CostLine::kUnfoldTime);
    windows = ops::unfold_time(pooled, cfg.k_t);  // [C, T, kt]
  }
  Tensor generated;
  {
    LineScope scope(CostLine::kConv2);
    Tensor positions = ops::permute(ops::reshape(windows, {cfg.c_in, t * cfg.k_t}), {1, 0});
    generated = ops::matmul_fc(positions, p.conv2);  // [T*kt, Co*Cig*kh*kw]
  }
  Tensor shaped = ops::reshape(generated, {t, cfg.k_t, cfg.c_out, cfg.cig(), cfg.k_h, cfg.k_w});
  return ops::permute(shaped, {0, 2, 3, 1, 4, 5});
}

Tensor cakg(const Tensor& x, DcacParams& p, bool training) {
  Tensor w_intra = intra_frame_attention(x, p, training);
  Tensor w_inter = inter_frame_context(x, p);
  LineScope scope(CostLine::kMul2);
  return ops::mul(w_inter, w_intra);
}

Tensor dual_conv(const Tensor& x, const Tensor& w_dynamic, const Tensor& w_static, int groups) {
  if (x.rank() != 4) throw ShapeError("dual_conv input must be [C,T,H,W]");
  if (w_dynamic.rank() != 6 || w_static.rank() != 5) {
    throw ShapeError("dual_conv kernels must be [T,Co,Ci/G,kt,kh,kw] and [Co,Ci/G,kt,kh,kw]");
  }
  const std::int64_t ci = x.shape()[0], t = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
  const std::int64_t co = w_static.shape()[0], cig = w_static.shape()[1];
  const std::int64_t kt = w_static.shape()[2], kh = w_static.shape()[3], kw = w_static.shape()[4];
  for (int d = 0; d < 5; ++d) {
    if (w_dynamic.shape()[d + 1] != w_static.shape()[d]) {
      throw ShapeError("dynamic and static kernel shapes disagree");
    }
  }
  if (w_dynamic.shape()[0] != t) throw ShapeError("dynamic kernel needs one slice per frame");
  if (groups <= 0 || ci % groups != 0 || co % groups != 0 || cig != ci / groups) {
    throw ShapeError("dual_conv group structure inconsistent");
  }
  if (kt % 2 == 0 || kh % 2 == 0 || kw % 2 == 0) throw ConfigError("kernel extents must be odd");

  const std::int64_t ht = (kt - 1) / 2, hh = (kh - 1) / 2, hw = (kw - 1) / 2;
  const std::int64_t k = kt * kh * kw;
  const std::int64_t cog = co / groups;

  // Materialize zero-padded neighborhoods: xu[ci][t][h][w][kt*kh*kw].
  std::vector<double> xu(static_cast<std::size_t>(ci * t * h * w * k), 0.0);
  {
    LineScope scope(CostLine::kUnfoldNeighborhood);
    const double* px = x.data();
    std::uint64_t trips = 0;
    std::size_t pos = 0;
    for (std::int64_t c = 0; c < ci; ++c) {
      for (std::int64_t ti = 0; ti < t; ++ti) {
        for (std::int64_t hi = 0; hi < h; ++hi) {
          for (std::int64_t wi = 0; wi < w; ++wi) {
            for (std::int64_t a = 0; a < kt; ++a) {
              const std::int64_t ts = ti + a - ht;
              for (std::int64_t b = 0; b < kh; ++b) {
                const std::int64_t hs = hi + b - hh;
                for (std::int64_t cc = 0; cc < kw; ++cc) {
                  const std::int64_t ws = wi + cc - hw;
                  const bool in = ts >= 0 && ts < t && hs >= 0 && hs < h && ws >= 0 && ws < w;
                  xu[pos++] = in ? px[((c * t + ts) * h + hs) * w + ws] : 0.0;
                  ++trips;
                }
              }
            }
          }
        }
      }
    }
    cost_add(trips);
  }

  const double* pd = w_dynamic.data();
  const double* ps = w_static.data();
  std::vector<double> out(static_cast<std::size_t>(co * t * h * w), 0.0);
  std::uint64_t trips_dyn = 0, trips_stat = 0;
  for (std::int64_t o = 0; o < co; ++o) {
    const std::int64_t g = o / cog;
    for (std::int64_t ti = 0; ti < t; ++ti) {
      const double* wd = pd + ((ti * co + o) * cig) * k;
      const double* ws = ps + (o * cig) * k;
      for (std::int64_t hi = 0; hi < h; ++hi) {
        for (std::int64_t wi = 0; wi < w; ++wi) {
          double acc_d = 0.0, acc_s = 0.0;
          for (std::int64_t cl = 0; cl < cig; ++cl) {
            const std::int64_t c = g * cig + cl;
            const double* xrow = xu.data() + (((c * t + ti) * h + hi) * w + wi) * k;
            const double* wdrow = wd + cl * k;
            const double* wsrow = ws + cl * k;
            for (std::int64_t j = 0; j < k; ++j) {
              acc_d += wdrow[j] * xrow[j];
              acc_s += wsrow[j] * xrow[j];
              ++trips_dyn;
              ++trips_stat;
            }
          }
          out[((o * t + ti) * h + hi) * w + wi] = acc_d + acc_s;
        }
      }
    }
  }
  {
    LineScope scope(CostLine::kConv3dDynamic);
    cost_add(trips_dyn);
  }
  {
    LineScope scope(CostLine::kConv3dStatic);
    cost_add(trips_stat);
  }

  const auto wd_impl = w_dynamic.impl();
  const auto ws_impl = w_static.impl();
  return detail::make_op_output(
      "dual_conv", {co, t, h, w}, std::move(out), {x, w_dynamic, w_static},
      [xu = std::move(xu), wd_impl, ws_impl, ci, t, h, w, co, cig, cog, k, kt, kh, kw, ht, hh,
       hw](const std::vector<double>& dz,
           const std::function<std::vector<double>&(std::size_t)>& sink) {
        std::vector<double>& dx = sink(0);
        std::vector<double>& dwd = sink(1);
        std::vector<double>& dws = sink(2);
        std::vector<double> dxu(xu.size(), 0.0);
        const double* pd = wd_impl->data.data();
        const double* ps = ws_impl->data.data();
        for (std::int64_t o = 0; o < co; ++o) {
          const std::int64_t g = o / cog;
          for (std::int64_t ti = 0; ti < t; ++ti) {
            const double* wd = pd + ((ti * co + o) * cig) * k;
            double* dwdrow0 = dwd.data() + ((ti * co + o) * cig) * k;
            const double* ws = ps + (o * cig) * k;
            double* dwsrow0 = dws.data() + (o * cig) * k;
            for (std::int64_t hi = 0; hi < h; ++hi) {
              for (std::int64_t wi = 0; wi < w; ++wi) {
                const double d = dz[((o * t + ti) * h + hi) * w + wi];
                if (d == 0.0) continue;
                for (std::int64_t cl = 0; cl < cig; ++cl) {
                  const std::int64_t c = g * cig + cl;
                  const double* xrow = xu.data() + (((c * t + ti) * h + hi) * w + wi) * k;
                  double* dxrow = dxu.data() + (((c * t + ti) * h + hi) * w + wi) * k;
                  for (std::int64_t j = 0; j < k; ++j) {
                    dwdrow0[cl * k + j] += d * xrow[j];
                    dwsrow0[cl * k + j] += d * xrow[j];
                    dxrow[j] += d * (wd[cl * k + j] + ws[cl * k + j]);
                  }
                }
              }
            }
          }
        }
        // Fold the neighborhood adjoints back onto the input.
        std::size_t pos = 0;
        for (std::int64_t c = 0; c < ci; ++c) {
          for (std::int64_t ti = 0; ti < t; ++ti) {
            for (std::int64_t hi = 0; hi < h; ++hi) {
              for (std::int64_t wi = 0; wi < w; ++wi) {
                for (std::int64_t a = 0; a < kt; ++a) {
                  const std::int64_t ts = ti + a - ht;
                  for (std::int64_t b = 0; b < kh; ++b) {
                    const std::int64_t hs = hi + b - hh;
                    for (std::int64_t cc = 0; cc < kw; ++cc) {
                      const std::int64_t ws2 = wi + cc - hw;
                      if (ts >= 0 && ts < t && hs >= 0 && hs < h && ws2 >= 0 && ws2 < w) {
                        dx[((c * t + ts) * h + hs) * w + ws2] += dxu[pos];
                      }
                      ++pos;
                    }
                  }
                }
              }
            }
          }
        }
      });
}

Tensor dcac_forward(const Tensor& x, DcacParams& p, bool training) {
  Tensor w_cakg = cakg(x, p, training);
  return dual_conv(x, w_cakg, p.w_static, p.cfg.groups);
}

Tensor dcac_residual(const Tensor& x, DcacParams& p, bool training) {
  if (p.cfg.c_in != p.cfg.c_out) {
    throw ConfigError("residual integration needs c_in == c_out, got " +
                      std::to_string(p.cfg.c_in) + " vs " + std::to_string(p.cfg.c_out));
  }
  Tensor branch = dcac_forward(x, p, training);
  return ops::add(x, ops::mul(branch, p.gate_alpha));
}

}  // namespace dcac
