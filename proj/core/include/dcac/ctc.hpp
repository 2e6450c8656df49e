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

#ifndef DCAC_CTC_HPP_
#define DCAC_CTC_HPP_

#include <cstdint>
#include <vector>

#include "dcac/tensor.hpp"

namespace dcac {

// Gloss ids are 1..num_glosses; id 0 is the reserved blank.
struct Vocabulary {
  int num_glosses = 0;
  static constexpr int kBlank = 0;
  int size() const { return num_glosses + 1; }
};

// Target label sequence; never contains the blank.
using GlossSequence = std::vector<int>;

// Log-domain forward/backward tables over the blank-extended target.
// Both tables include the emission term at their own time step, so the
// path mass through state s at time t is alpha + beta - emission.
struct CtcLattice {
  std::int64_t t_prime = 0;
  std::int64_t vocab_size = 0;
  std::vector<int> extended;        // [blank, g1, blank, g2, ..., blank]
  std::vector<double> log_alpha;    // T' x S row-major
  std::vector<double> log_beta;     // T' x S row-major
  double log_p_target = 0.0;
  std::uint64_t probs_digest = 0;   // fingerprint of the source log_probs

  std::int64_t states() const { return static_cast<std::int64_t>(extended.size()); }
};

// Minimum number of frames that can carry the target: N plus one separator
// blank per adjacent repeated label.
std::int64_t ctc_min_frames(const GlossSequence& target);

// Forward/backward over log-softmax rows `log_probs` ([T' x V] row-major).
// Returns -log p(target | Z).  Throws InfeasibleAlignmentError when
// T' < ctc_min_frames(target); an infinite loss is never silently returned.
struct CtcResult {
  double loss = 0.0;
  CtcLattice lattice;
};
CtcResult ctc_loss(const std::vector<double>& log_probs, std::int64_t t_prime,
                   std::int64_t vocab_size, const GlossSequence& target);

// Analytic gradient of the loss w.r.t. the per-frame probabilities p(k | t)
// ([T' x V]).  The lattice must have been produced from exactly these
// log_probs; a stale lattice raises ConsistencyError.
std::vector<double> ctc_grad(const CtcLattice& lattice, const std::vector<double>& log_probs);

// Same gradient expressed w.r.t. the log-probabilities (composes with
// log_softmax backward to reach the logits).
std::vector<double> ctc_grad_log_probs(const CtcLattice& lattice,
                                       const std::vector<double>& log_probs);

// Autodiff wrapper: log_probs is a [T' x V] tensor of log-softmax rows; the
// returned scalar backpropagates the analytic gradient above.
Tensor ctc_loss_op(const Tensor& log_probs, const GlossSequence& target);

// CTC collapse: drop consecutive repeats, then blanks.
GlossSequence collapse(const std::vector<int>& path);

// Per-frame argmax (ties toward the lowest id), collapsed.
GlossSequence decode_greedy(const std::vector<double>& log_probs, std::int64_t t_prime,
                            std::int64_t vocab_size);

// Prefix beam search merging blank/non-blank continuations per prefix.
// Deterministic: candidates are ordered by (log-prob desc, prefix lex asc).
GlossSequence decode_beam(const std::vector<double>& log_probs, std::int64_t t_prime,
                          std::int64_t vocab_size, int width);

// Spike-shape summary of a per-frame gradient-norm series.
struct SpikeDiagnostics {
  double zero_fraction = 0.0;   // share of frames below 1e-3 * max (floor 1e-12)
  double peak_to_median = 0.0;
  double entropy = 0.0;         // normalized to [0,1]; 1 is uniform
};
SpikeDiagnostics spike_diagnostics(const std::vector<double>& per_frame_grad_l2);

}  // namespace dcac

#endif  // DCAC_CTC_HPP_
