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

#include "dcac/wer.hpp"

#include <vector>

#include "dcac/error.hpp"

namespace dcac {

WerBreakdown wer(const GlossSequence& ref, const GlossSequence& hyp) {
  if (ref.empty()) throw ConfigError("WER needs a nonempty reference");

  // dp cell = (total edits, ins+del edits), minimized lexicographically.
  struct Cell {
    std::int64_t total;
    std::int64_t insdel;
    bool operator<(const Cell& o) const {
      return total != o.total ? total < o.total : insdel < o.insdel;
    }
  };
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<Cell> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = {static_cast<std::int64_t>(j), static_cast<std::int64_t>(j)};
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = {static_cast<std::int64_t>(i), static_cast<std::int64_t>(i)};
    for (std::size_t j = 1; j <= m; ++j) {
      const std::int64_t diag_cost = ref[i - 1] == hyp[j - 1] ? 0 : 1;
      Cell best = {prev[j - 1].total + diag_cost, prev[j - 1].insdel};  // match / substitute
      const Cell del = {prev[j].total + 1, prev[j].insdel + 1};
      const Cell ins = {cur[j - 1].total + 1, cur[j - 1].insdel + 1};
      if (del < best) best = del;
      if (ins < best) best = ins;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }

  const Cell final_cell = prev[m];
  WerBreakdown b;
  b.ref_length = static_cast<std::int64_t>(n);
  // ins - del is fixed by the length difference, ins + del by the DP.
  const std::int64_t len_diff = static_cast<std::int64_t>(m) - static_cast<std::int64_t>(n);
  b.insertions = (final_cell.insdel + len_diff) / 2;
  b.deletions = (final_cell.insdel - len_diff) / 2;
  b.substitutions = final_cell.total - final_cell.insdel;
  return b;
}

}  // namespace dcac
