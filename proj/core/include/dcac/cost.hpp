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

#ifndef DCAC_COST_HPP_
#define DCAC_COST_HPP_

#include <array>
#include <cstdint>
#include <string>

namespace dcac {

// Work-unit ledger lines of the dynamic-convolution pipeline.  Kernels add
// the trip counts they actually execute into the line installed by the
// caller, so a counted forward pass audits the analytic cost model against
// the shapes that really ran.
enum class CostLine : int {
  kUnfoldNeighborhood = 0,  // input neighborhood materialization (copies)
  kGapAttention,            // spatial pooling feeding the attention heads (adds)
  kFcShared,                // shared reduction fc (MACs)
  kBn,                      // batch norm over the reduced features (elements)
  kFcHeads,                 // four attention heads (MACs)
  kExpertMix,               // per-frame expert mixture (multiplies)
  kAttnApply,               // attention factors applied onto the kernel (multiplies)
  kConv1,                   // channel-mixing conv ahead of the context pool (MACs)
  kGapContext,              // spatial pooling in the context branch (adds)
  kUnfoldTime,              // temporal window materialization (copies)
  kConv2,                   // pointwise kernel-generating conv (MACs)
  kMul2,                    // fusion product of the two kernel tensors (multiplies)
  kConv3dDynamic,           // per-frame dynamic convolution (MACs)
  kConv3dStatic,            // shared static convolution (MACs)
  kOther,                   // anything not attributed to a pipeline line
  kNumLines,
};

const char* cost_line_name(CostLine line);

struct CostCounter {
  std::array<std::uint64_t, static_cast<int>(CostLine::kNumLines)> lines{};

  std::uint64_t get(CostLine line) const { return lines[static_cast<int>(line)]; }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto v : lines) t += v;
    return t;
  }
  void reset() { lines.fill(0); }
};

namespace cost_detail {
CostCounter*& active_counter();
CostLine& active_line();
}  // namespace cost_detail

// Installs a counter for the current thread for the guard's lifetime.
class CountingScope {
 public:
  explicit CountingScope(CostCounter& counter)
      : prev_(cost_detail::active_counter()) {
    cost_detail::active_counter() = &counter;
  }
  ~CountingScope() { cost_detail::active_counter() = prev_; }
  CountingScope(const CountingScope&) = delete;
  CountingScope& operator=(const CountingScope&) = delete;

 private:
  CostCounter* prev_;
};

// Attributes kernel work to a given ledger line while alive.
class LineScope {
 public:
  explicit LineScope(CostLine line) : prev_(cost_detail::active_line()) {
    cost_detail::active_line() = line;
  }
  ~LineScope() { cost_detail::active_line() = prev_; }
  LineScope(const LineScope&) = delete;
  LineScope& operator=(const LineScope&) = delete;

 private:
  CostLine prev_;
};

// Called from kernel inner loops with the number of work units executed.
inline void cost_add(std::uint64_t n) {
  if (CostCounter* c = cost_detail::active_counter()) {
    c->lines[static_cast<int>(cost_detail::active_line())] += n;
  }
}

}  // namespace dcac

#endif  // DCAC_COST_HPP_
