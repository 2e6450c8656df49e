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

#include "dcac/cost_model.hpp"

#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "dcac/error.hpp"

namespace dcac {

std::uint64_t CostBreakdown::flops_line(const std::string& name) const {
  for (const auto& [n, v] : flops_lines) {
    if (n == name) return v;
  }
  throw ConfigError("unknown cost line: " + name);
}

CostBreakdown cost_model(const DcacConfig& cfg, std::int64_t t, std::int64_t h, std::int64_t w) {
  cfg.validate();
  if (t <= 0 || h <= 0 || w <= 0) throw ConfigError("cost_model extents must be positive");

  using U = std::uint64_t;
  const U ci = cfg.c_in, co = cfg.c_out, g = cfg.groups;
  const U cig = cfg.cig(), hid = cfg.hidden();
  const U kt = cfg.k_t, kk = cfg.kernel_numel();
  const U n = cfg.num_experts;
  const U T = t, HW = static_cast<U>(h) * static_cast<U>(w);

  CostBreakdown b;
  b.cfg = cfg;
  b.t = t;
  b.h = h;
  b.w = w;

  b.flops_lines = {
      {"unfold_neighborhood", ci * T * HW * kk},
      {"gap_attention", ci * T * HW},
      {"fc_shared", ci * hid * T},
      {"bn", hid * T},
      {"fc_heads", hid * (cig + co + kt + n) * T},
      {"expert_mix", n * co * cig * kk * T},
      {"attn_apply", 3 * co * cig * kk * T},
      {"conv1", ci * ci * T * HW},
      {"gap_context", ci * T * HW},
      {"unfold_time", ci * T * kt},
      {"conv2", ci * co * cig * kk * T},
      {"mul2", co * cig * kk * T},
      {"conv3d_dynamic", cig * co * T * HW * kk},
  };
  b.flops_static = co * cig * kk * T * HW;
  b.flops_dynamic = 0;
  for (const auto& [name, v] : b.flops_lines) b.flops_dynamic += v;
  b.flops_total = b.flops_static + b.flops_dynamic;
  b.flops_approx = static_cast<double>(ci) * static_cast<double>(T) *
                   (static_cast<double>(ci) * static_cast<double>(HW) +
                    static_cast<double>(co * kk) / static_cast<double>(g) *
                        (static_cast<double>(ci) + 2.0 * static_cast<double>(HW)));

  b.params_lines = {
      {"fc_shared", ci * hid},
      {"bn", 2 * hid},
      {"fc_heads", hid * (cig + co + kt + n)},
      {"experts", n * co * cig * kk},
      {"conv1", ci * ci},
      {"conv2", ci * co * cig * static_cast<U>(cfg.k_h) * static_cast<U>(cfg.k_w)},
  };
  b.params_static = co * cig * kk;
  b.params_dynamic = 0;
  for (const auto& [name, v] : b.params_lines) b.params_dynamic += v;
  b.params_gate = 1;
  b.params_total = b.params_static + b.params_dynamic + b.params_gate;
  b.params_approx_dynamic =
      static_cast<double>(ci) * static_cast<double>(ci) *
      (1.0 + static_cast<double>(co * cfg.k_h * cfg.k_w) / static_cast<double>(g));

  return b;
}

std::string cost_breakdown_json(const CostBreakdown& b) {
  nlohmann::json j;
  j["config"] = {{"c_in", b.cfg.c_in},     {"c_out", b.cfg.c_out},
                 {"groups", b.cfg.groups}, {"k_t", b.cfg.k_t},
                 {"k_h", b.cfg.k_h},       {"k_w", b.cfg.k_w},
                 {"num_experts", b.cfg.num_experts},
                 {"reduction", b.cfg.reduction},
                 {"t", b.t},               {"h", b.h},
                 {"w", b.w}};
  nlohmann::json fl;
  for (const auto& [name, v] : b.flops_lines) fl[name] = v;
  j["flops_exact"] = {{"lines", fl},
                      {"static", b.flops_static},
                      {"dynamic", b.flops_dynamic},
                      {"total", b.flops_total}};
  j["flops_approx"] = b.flops_approx;
  nlohmann::json pl;
  for (const auto& [name, v] : b.params_lines) pl[name] = v;
  j["params_exact"] = {{"lines", pl},
                       {"static", b.params_static},
                       {"dynamic", b.params_dynamic},
                       {"gate", b.params_gate},
                       {"total", b.params_total}};
  j["params_approx"] = b.params_approx_dynamic;
  return j.dump();
}

std::string cost_breakdown_table(const CostBreakdown& b) {
  std::ostringstream os;
  os << "DCAC cost: C_in=" << b.cfg.c_in << " C_out=" << b.cfg.c_out << " G=" << b.cfg.groups
     << " k=(" << b.cfg.k_t << "," << b.cfg.k_h << "," << b.cfg.k_w << ") n=" << b.cfg.num_experts
     << " r=" << b.cfg.reduction << " T=" << b.t << " H=" << b.h << " W=" << b.w << "\n";
  os << "  flops lines (dynamic branch):\n";
  for (const auto& [name, v] : b.flops_lines) {
    os << "    " << std::left << std::setw(20) << name << std::right << std::setw(16) << v << "\n";
  }
  os << "  flops_static   " << std::setw(16) << b.flops_static << "\n";
  os << "  flops_dynamic  " << std::setw(16) << b.flops_dynamic << "\n";
  os << "  flops_total    " << std::setw(16) << b.flops_total << "\n";
  os << "  flops_approx   " << std::setw(16) << std::fixed << std::setprecision(0)
     << b.flops_approx << "\n";
  os << "  params lines (dynamic branch):\n";
  for (const auto& [name, v] : b.params_lines) {
    os << "    " << std::left << std::setw(20) << name << std::right << std::setw(16) << v << "\n";
  }
  os << "  params_static  " << std::setw(16) << b.params_static << "\n";
  os << "  params_dynamic " << std::setw(16) << b.params_dynamic << "\n";
  os << "  params_gate    " << std::setw(16) << b.params_gate << "\n";
  os << "  params_total   " << std::setw(16) << b.params_total << "\n";
  os << "  params_approx  " << std::setw(16) << std::fixed << std::setprecision(0)
     << b.params_approx_dynamic << "\n";
  return os.str();
}

}  // namespace dcac
