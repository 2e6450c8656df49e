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

#ifndef DCAC_WER_HPP_
#define DCAC_WER_HPP_

#include <cstdint>

#include "dcac/ctc.hpp"

namespace dcac {

struct WerBreakdown {
  std::int64_t substitutions = 0;
  std::int64_t insertions = 0;
  std::int64_t deletions = 0;
  std::int64_t ref_length = 0;

  std::int64_t errors() const { return substitutions + insertions + deletions; }
  double wer() const { return static_cast<double>(errors()) / static_cast<double>(ref_length); }
};

// Unit-cost Levenshtein alignment.  Among minimal alignments the breakdown
// prefers substitutions over insertion+deletion pairs (the secondary
// objective minimizes ins+del), which pins the counts uniquely.
// Throws ConfigError on an empty reference; WER may exceed 1.
WerBreakdown wer(const GlossSequence& ref, const GlossSequence& hyp);

}  // namespace dcac

#endif  // DCAC_WER_HPP_
