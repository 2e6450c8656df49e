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

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "dcac/error.hpp"
#include "dcac/ops.hpp"

namespace dcac::testing {

GradCheckReport grad_check(const std::function<Tensor()>& forward, std::vector<Tensor> params,
                           double h, double rel_tol, double abs_tol, int max_entries_per_param,
                           std::uint64_t sample_seed) {
  Tensor loss = forward();
  for (auto& p : params) p.zero_grad();
  backward(loss);

  GradCheckReport report;
  Rng pick(sample_seed ^ 0x9e3779b97f4a7c15ULL);
  for (auto& p : params) {
    const std::vector<double> autodiff_grad = p.grad();
    std::vector<std::int64_t> entries;
    if (max_entries_per_param < 0 ||
        p.numel() <= static_cast<std::int64_t>(max_entries_per_param)) {
      entries.resize(static_cast<std::size_t>(p.numel()));
      for (std::int64_t i = 0; i < p.numel(); ++i) entries[static_cast<std::size_t>(i)] = i;
    } else {
      for (int i = 0; i < max_entries_per_param; ++i) {
        entries.push_back(pick.uniform_int(0, p.numel() - 1));
      }
    }
    for (const std::int64_t idx : entries) {
      double& cell = p.values()[static_cast<std::size_t>(idx)];
      const double saved = cell;
      cell = saved + h;
      const double up = forward().item();
      cell = saved - h;
      const double down = forward().item();
      cell = saved;
      const double fd = (up - down) / (2.0 * h);
      const double ad = autodiff_grad[static_cast<std::size_t>(idx)];
      const double abs_err = std::abs(fd - ad);
      const double rel_err = abs_err / std::max({std::abs(fd), std::abs(ad), 1e-12});
      report.worst_abs = std::max(report.worst_abs, abs_err);
      if (abs_err > abs_tol) {
        report.worst_rel = std::max(report.worst_rel, rel_err);
        if (rel_err > rel_tol) ++report.failures;
      }
      ++report.checked;
    }
  }
  return report;
}

std::vector<double> naive_dual_conv(const std::vector<double>& x, std::int64_t ci, std::int64_t t,
                                    std::int64_t h, std::int64_t w,
                                    const std::vector<double>& w_dyn,
                                    const std::vector<double>& w_stat, std::int64_t co,
                                    int groups, int kt, int kh, int kw) {
  const std::int64_t cig = ci / groups;
  const std::int64_t cog = co / groups;
  const std::int64_t ht = (kt - 1) / 2, hh = (kh - 1) / 2, hw = (kw - 1) / 2;
  std::vector<double> out(static_cast<std::size_t>(co * t * h * w), 0.0);
  auto xf = [&](std::int64_t c, std::int64_t ti, std::int64_t hi, std::int64_t wi) {
    if (ti < 0 || ti >= t || hi < 0 || hi >= h || wi < 0 || wi >= w) return 0.0;
    return x[((c * t + ti) * h + hi) * w + wi];
  };
  for (std::int64_t o = 0; o < co; ++o) {
    for (std::int64_t ti = 0; ti < t; ++ti) {
      for (std::int64_t hi = 0; hi < h; ++hi) {
        for (std::int64_t wi = 0; wi < w; ++wi) {
          double acc = 0.0;
          for (std::int64_t cl = 0; cl < cig; ++cl) {
            const std::int64_t c = (o / cog) * cig + cl;
            for (int a = 0; a < kt; ++a) {
              for (int b = 0; b < kh; ++b) {
                for (int d = 0; d < kw; ++d) {
                  const double xv = xf(c, ti + a - ht, hi + b - hh, wi + d - hw);
                  const std::int64_t kidx = (static_cast<std::int64_t>(a) * kh + b) * kw + d;
                  const double wd = w_dyn[(((ti * co + o) * cig + cl)) * (kt * kh * kw) + kidx];
                  const double ws = w_stat[((o * cig + cl)) * (kt * kh * kw) + kidx];
                  acc += (wd + ws) * xv;
                }
              }
            }
          }
          out[((o * t + ti) * h + hi) * w + wi] = acc;
        }
      }
    }
  }
  return out;
}

namespace {

double log_add(double a, double b) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

template <typename Fn>
void for_each_path(std::int64_t t_prime, std::int64_t vocab, Fn&& fn) {
  std::vector<int> path(static_cast<std::size_t>(t_prime), 0);
  while (true) {
    fn(path);
    std::int64_t pos = t_prime - 1;
    while (pos >= 0) {
      if (++path[static_cast<std::size_t>(pos)] < vocab) break;
      path[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
}

}  // namespace

double ctc_loss_bruteforce(const std::vector<double>& log_probs, std::int64_t t_prime,
                           std::int64_t vocab, const GlossSequence& target) {
  double total = -std::numeric_limits<double>::infinity();
  for_each_path(t_prime, vocab, [&](const std::vector<int>& path) {
    if (collapse(path) != target) return;
    double lp = 0.0;
    for (std::int64_t t = 0; t < t_prime; ++t) {
      lp += log_probs[t * vocab + path[static_cast<std::size_t>(t)]];
    }
    total = log_add(total, lp);
  });
  return -total;
}

GlossSequence ctc_decode_bruteforce(const std::vector<double>& log_probs, std::int64_t t_prime,
                                    std::int64_t vocab) {
  std::map<GlossSequence, double> mass;
  for_each_path(t_prime, vocab, [&](const std::vector<int>& path) {
    double lp = 0.0;
    for (std::int64_t t = 0; t < t_prime; ++t) {
      lp += log_probs[t * vocab + path[static_cast<std::size_t>(t)]];
    }
    GlossSequence seq = collapse(path);
    auto [it, fresh] = mass.emplace(std::move(seq), lp);
    if (!fresh) it->second = log_add(it->second, lp);
  });
  // map order is lexicographic, so scanning with strict > matches the
  // production tie-break (best log-prob, then lexicographically smallest).
  const GlossSequence* best = nullptr;
  double best_lp = -std::numeric_limits<double>::infinity();
  for (const auto& [seq, lp] : mass) {
    if (best == nullptr || lp > best_lp) {
      best = &seq;
      best_lp = lp;
    }
  }
  return *best;
}

Tensor ctc_loss_autodiff_dp(const Tensor& log_probs, const GlossSequence& target) {
  const std::int64_t t_prime = log_probs.shape()[0];
  const std::int64_t vocab = log_probs.shape()[1];
  std::vector<int> ext(2 * target.size() + 1, 0);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  const std::int64_t s_count = static_cast<std::int64_t>(ext.size());

  auto lp_at = [&](std::int64_t t, std::int64_t k) {
    return ops::reshape(ops::slice(ops::slice(log_probs, 0, t, 1), 1, k, 1), {1});
  };
  // log(exp a + exp b) built from primitive ops; magnitudes at oracle scale
  // stay well inside double range without max-shifting.
  auto log_add_t = [&](const Tensor& a, const Tensor& b) {
    return ops::log(ops::add(ops::exp(a), ops::exp(b)));
  };

  std::vector<std::vector<Tensor>> alpha(static_cast<std::size_t>(t_prime),
                                         std::vector<Tensor>(static_cast<std::size_t>(s_count)));
  auto defined = [](const Tensor& t) { return t.defined(); };

  alpha[0][0] = lp_at(0, ext[0]);
  if (s_count > 1) alpha[0][1] = lp_at(0, ext[1]);
  for (std::int64_t t = 1; t < t_prime; ++t) {
    for (std::int64_t s = 0; s < s_count; ++s) {
      Tensor acc = alpha[t - 1][s];
      if (s >= 1 && defined(alpha[t - 1][s - 1])) {
        acc = defined(acc) ? log_add_t(acc, alpha[t - 1][s - 1]) : alpha[t - 1][s - 1];
      }
      const bool skip = s >= 2 && ext[s] != 0 && ext[s] != ext[s - 2];
      if (skip && defined(alpha[t - 1][s - 2])) {
        acc = defined(acc) ? log_add_t(acc, alpha[t - 1][s - 2]) : alpha[t - 1][s - 2];
      }
      if (defined(acc)) alpha[t][s] = ops::add(acc, lp_at(t, ext[s]));
    }
  }
  Tensor total = alpha[t_prime - 1][s_count - 1];
  if (s_count > 1 && defined(alpha[t_prime - 1][s_count - 2])) {
    total = defined(total) ? log_add_t(total, alpha[t_prime - 1][s_count - 2])
                           : alpha[t_prime - 1][s_count - 2];
  }
  return ops::neg(total);
}

namespace {

struct EditTriple {
  std::int64_t sub, ins, del;
  std::int64_t total() const { return sub + ins + del; }
  std::int64_t insdel() const { return ins + del; }
  bool better_than(const EditTriple& o) const {
    if (total() != o.total()) return total() < o.total();
    return insdel() < o.insdel();
  }
};

EditTriple wer_rec(const GlossSequence& ref, const GlossSequence& hyp, std::size_t i,
                   std::size_t j, std::map<std::pair<std::size_t, std::size_t>, EditTriple>& memo) {
  if (i == ref.size() && j == hyp.size()) return {0, 0, 0};
  const auto key = std::make_pair(i, j);
  auto it = memo.find(key);
  if (it != memo.end()) return it->second;

  EditTriple best{1 << 20, 1 << 20, 1 << 20};
  if (i < ref.size() && j < hyp.size()) {
    EditTriple diag = wer_rec(ref, hyp, i + 1, j + 1, memo);
    if (ref[i] != hyp[j]) ++diag.sub;
    if (diag.better_than(best)) best = diag;
  }
  if (i < ref.size()) {
    EditTriple del = wer_rec(ref, hyp, i + 1, j, memo);
    ++del.del;
    if (del.better_than(best)) best = del;
  }
  if (j < hyp.size()) {
    EditTriple ins = wer_rec(ref, hyp, i, j + 1, memo);
    ++ins.ins;
    if (ins.better_than(best)) best = ins;
  }
  memo[key] = best;
  return best;
}

}  // namespace

WerBreakdown wer_bruteforce(const GlossSequence& ref, const GlossSequence& hyp) {
  std::map<std::pair<std::size_t, std::size_t>, EditTriple> memo;
  const EditTriple t = wer_rec(ref, hyp, 0, 0, memo);
  WerBreakdown b;
  b.substitutions = t.sub;
  b.insertions = t.ins;
  b.deletions = t.del;
  b.ref_length = static_cast<std::int64_t>(ref.size());
  return b;
}

Tensor random_tensor(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

std::vector<double> random_log_probs(std::int64_t t_prime, std::int64_t vocab, Rng& rng) {
  std::vector<double> out(static_cast<std::size_t>(t_prime * vocab));
  for (std::int64_t t = 0; t < t_prime; ++t) {
    double mx = -1e300;
    for (std::int64_t k = 0; k < vocab; ++k) {
      out[t * vocab + k] = rng.uniform(-3.0, 3.0);
      mx = std::max(mx, out[t * vocab + k]);
    }
    double denom = 0.0;
    for (std::int64_t k = 0; k < vocab; ++k) denom += std::exp(out[t * vocab + k] - mx);
    const double log_denom = std::log(denom);
    for (std::int64_t k = 0; k < vocab; ++k) out[t * vocab + k] -= mx + log_denom;
  }
  return out;
}

}  // namespace dcac::testing
