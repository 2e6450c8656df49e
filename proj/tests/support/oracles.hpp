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

// Independent reference implementations used only by tests.  Everything in
// here is deliberately written the slow, obvious way and shares no kernel
// code with the library.

#ifndef DCAC_TESTS_ORACLES_HPP_
#define DCAC_TESTS_ORACLES_HPP_

#include <functional>
#include <vector>

#include "dcac/ctc.hpp"
#include "dcac/rng.hpp"
#include "dcac/tensor.hpp"
#include "dcac/wer.hpp"

namespace dcac::testing {

// Central-difference gradient audit.  Runs `forward` once, backpropagates,
// then re-evaluates with each checked entry nudged by +-h.  An entry passes
// when |fd - ad| <= abs_tol or <= rel_tol * max(|fd|, |ad|).
struct GradCheckReport {
  double worst_rel = 0.0;
  double worst_abs = 0.0;
  int checked = 0;
  int failures = 0;
};

GradCheckReport grad_check(const std::function<Tensor()>& forward, std::vector<Tensor> params,
                           double h = 1e-5, double rel_tol = 1e-4, double abs_tol = 1e-7,
                           int max_entries_per_param = -1, std::uint64_t sample_seed = 0);

// Direct six-nested-loop dual convolution (dynamic + static branch), zero
// padded to preserve extents.  Shapes as in dcac::dual_conv.
std::vector<double> naive_dual_conv(const std::vector<double>& x, std::int64_t ci, std::int64_t t,
                                    std::int64_t h, std::int64_t w,
                                    const std::vector<double>& w_dyn,
                                    const std::vector<double>& w_stat, std::int64_t co,
                                    int groups, int kt, int kh, int kw);

// Exhaustive CTC: sums path probabilities over all V^T paths that collapse
// to the target.  Only usable for tiny instances.
double ctc_loss_bruteforce(const std::vector<double>& log_probs, std::int64_t t_prime,
                           std::int64_t vocab, const GlossSequence& target);

// Exhaustive marginal decode: enumerates all paths, accumulates probability
// per collapsed sequence and returns the argmax (ties: lexicographically
// smallest sequence).
GlossSequence ctc_decode_bruteforce(const std::vector<double>& log_probs, std::int64_t t_prime,
                                    std::int64_t vocab);

// CTC loss as a differentiable graph over the DP recurrence (log-sum-exp
// composed from exp/log/add ops).  Gradient oracle for the analytic path.
Tensor ctc_loss_autodiff_dp(const Tensor& log_probs, const GlossSequence& target);

// Recursive memoized edit distance minimizing (total, ins+del)
// lexicographically; independent of the production DP.
WerBreakdown wer_bruteforce(const GlossSequence& ref, const GlossSequence& hyp);

// Uniform tensor in [lo, hi].
Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                     bool requires_grad = false);

// Random log-softmax rows ([T x V]).
std::vector<double> random_log_probs(std::int64_t t_prime, std::int64_t vocab, Rng& rng);

}  // namespace dcac::testing

#endif  // DCAC_TESTS_ORACLES_HPP_
