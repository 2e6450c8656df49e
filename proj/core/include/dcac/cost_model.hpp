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

#ifndef DCAC_COST_MODEL_HPP_
#define DCAC_COST_MODEL_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dcac/dcac.hpp"

namespace dcac {

// Exact term-by-term work and parameter accounting of one DCAC block, plus
// the dominant-term approximations.  The exact flops lines carry the same
// names as the instrumented CostCounter, so a counted forward pass can be
// audited line by line.
struct CostBreakdown {
  DcacConfig cfg;
  std::int64_t t = 0, h = 0, w = 0;

  std::vector<std::pair<std::string, std::uint64_t>> flops_lines;  // dynamic branch
  std::uint64_t flops_static = 0;
  std::uint64_t flops_dynamic = 0;
  std::uint64_t flops_total = 0;
  double flops_approx = 0.0;  // C_i*T*(C_i*H*W + (C_o*kt*kh*kw/G)*(C_i + 2*H*W))

  std::vector<std::pair<std::string, std::uint64_t>> params_lines;  // dynamic branch
  std::uint64_t params_static = 0;
  std::uint64_t params_dynamic = 0;
  std::uint64_t params_gate = 1;
  std::uint64_t params_total = 0;
  double params_approx_dynamic = 0.0;  // C_i^2 * (1 + C_o*kh*kw/G)

  std::uint64_t flops_line(const std::string& name) const;
};

CostBreakdown cost_model(const DcacConfig& cfg, std::int64_t t, std::int64_t h, std::int64_t w);

// {config, flops_exact, flops_approx, params_exact, params_approx} JSON record.
std::string cost_breakdown_json(const CostBreakdown& b);

// Fixed-width human-readable table; same fields as the JSON record.
std::string cost_breakdown_table(const CostBreakdown& b);

}  // namespace dcac

#endif  // DCAC_COST_MODEL_HPP_
