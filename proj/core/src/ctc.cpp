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

#include "dcac/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string_view>

#include "dcac/error.hpp"
#include "dcac/rng.hpp"

namespace dcac {

namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

double log_add3(double a, double b, double c) { return log_add(log_add(a, b), c); }

std::uint64_t digest_of(const std::vector<double>& v) {
  return fnv1a(std::string_view(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double)));
}

void validate_target(const GlossSequence& target, std::int64_t vocab_size) {
  for (const int g : target) {
    if (g <= 0 || g >= vocab_size) {
      throw ConfigError("gloss id " + std::to_string(g) + " outside vocabulary of size " +
                        std::to_string(vocab_size) + " (0 is the blank)");
    }
  }
}

std::vector<int> extend_with_blanks(const GlossSequence& target) {
  std::vector<int> ext(2 * target.size() + 1, Vocabulary::kBlank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  return ext;
}

// Can state s follow state s-2 directly (skipping the blank between them)?
bool skip_allowed(const std::vector<int>& ext, std::int64_t s) {
  return s >= 2 && ext[s] != Vocabulary::kBlank && ext[s] != ext[s - 2];
}

}  // namespace

std::int64_t ctc_min_frames(const GlossSequence& target) {
  std::int64_t repeats = 0;
  for (std::size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++repeats;
  }
  return static_cast<std::int64_t>(target.size()) + repeats;
}

CtcResult ctc_loss(const std::vector<double>& log_probs, std::int64_t t_prime,
                   std::int64_t vocab_size, const GlossSequence& target) {
  if (t_prime <= 0 || vocab_size < 2) {
    throw ShapeError("ctc_loss needs T' >= 1 and a vocabulary with at least one gloss");
  }
  if (static_cast<std::int64_t>(log_probs.size()) != t_prime * vocab_size) {
    throw ShapeError("log_probs size != T' * V");
  }
  validate_target(target, vocab_size);
  if (t_prime < ctc_min_frames(target)) {
    throw InfeasibleAlignmentError(
        "target needs at least " + std::to_string(ctc_min_frames(target)) + " frames, got " +
        std::to_string(t_prime));
  }

  CtcLattice lat;
  lat.t_prime = t_prime;
  lat.vocab_size = vocab_size;
  lat.extended = extend_with_blanks(target);
  lat.probs_digest = digest_of(log_probs);
  const std::int64_t s_count = lat.states();
  const auto& ext = lat.extended;
  auto lp = [&](std::int64_t t, std::int64_t k) { return log_probs[t * vocab_size + k]; };

  lat.log_alpha.assign(static_cast<std::size_t>(t_prime * s_count), kLogZero);
  lat.log_beta.assign(static_cast<std::size_t>(t_prime * s_count), kLogZero);
  auto la = [&](std::int64_t t, std::int64_t s) -> double& { return lat.log_alpha[t * s_count + s]; };
  auto lb = [&](std::int64_t t, std::int64_t s) -> double& { return lat.log_beta[t * s_count + s]; };

  la(0, 0) = lp(0, ext[0]);
  if (s_count > 1) la(0, 1) = lp(0, ext[1]);
  for (std::int64_t t = 1; t < t_prime; ++t) {
    for (std::int64_t s = 0; s < s_count; ++s) {
      double acc = la(t - 1, s);
      if (s >= 1) acc = log_add(acc, la(t - 1, s - 1));
      if (skip_allowed(ext, s)) acc = log_add(acc, la(t - 1, s - 2));
      la(t, s) = acc == kLogZero ? kLogZero : acc + lp(t, ext[s]);
    }
  }

  lb(t_prime - 1, s_count - 1) = lp(t_prime - 1, ext[s_count - 1]);
  if (s_count > 1) lb(t_prime - 1, s_count - 2) = lp(t_prime - 1, ext[s_count - 2]);
  for (std::int64_t t = t_prime - 2; t >= 0; --t) {
    for (std::int64_t s = 0; s < s_count; ++s) {
      double acc = lb(t + 1, s);
      if (s + 1 < s_count) acc = log_add(acc, lb(t + 1, s + 1));
      if (s + 2 < s_count && skip_allowed(ext, s + 2)) acc = log_add(acc, lb(t + 1, s + 2));
      lb(t, s) = acc == kLogZero ? kLogZero : acc + lp(t, ext[s]);
    }
  }

  double log_p = la(t_prime - 1, s_count - 1);
  if (s_count > 1) log_p = log_add(log_p, la(t_prime - 1, s_count - 2));
  lat.log_p_target = log_p;
  if (!std::isfinite(log_p)) {
    throw NumericError("CTC total path probability is not finite");
  }

  CtcResult result;
  result.loss = -log_p;
  result.lattice = std::move(lat);
  return result;
}

namespace {

// Shared core: gradient w.r.t. the log-probabilities,
// d(-log P)/d lp[t,k] = -sum_{s: ext[s]=k} exp(alpha + beta - lp - log P).
std::vector<double> grad_wrt_log_probs(const CtcLattice& lat,
                                       const std::vector<double>& log_probs) {
  if (static_cast<std::int64_t>(log_probs.size()) != lat.t_prime * lat.vocab_size) {
    throw ShapeError("log_probs size does not match the lattice");
  }
  if (digest_of(log_probs) != lat.probs_digest) {
    throw ConsistencyError("lattice is stale: log_probs changed since ctc_loss");
  }
  const std::int64_t s_count = lat.states();
  std::vector<double> grad(log_probs.size(), 0.0);
  for (std::int64_t t = 0; t < lat.t_prime; ++t) {
    // log of total mass through each symbol at frame t
    std::vector<double> log_q(static_cast<std::size_t>(lat.vocab_size), kLogZero);
    for (std::int64_t s = 0; s < s_count; ++s) {
      const double mass = lat.log_alpha[t * s_count + s] + lat.log_beta[t * s_count + s] -
                          log_probs[t * lat.vocab_size + lat.extended[s]];
      log_q[lat.extended[s]] = log_add(log_q[lat.extended[s]], mass);
    }
    for (std::int64_t k = 0; k < lat.vocab_size; ++k) {
      if (log_q[k] != kLogZero) {
        grad[t * lat.vocab_size + k] = -std::exp(log_q[k] - lat.log_p_target);
      }
    }
  }
  return grad;
}

}  // namespace

std::vector<double> ctc_grad(const CtcLattice& lattice, const std::vector<double>& log_probs) {
  std::vector<double> grad = grad_wrt_log_probs(lattice, log_probs);
  // d/dp = d/dlp * dlp/dp = d/dlp / p
  for (std::int64_t t = 0; t < lattice.t_prime; ++t) {
    for (std::int64_t k = 0; k < lattice.vocab_size; ++k) {
      const std::int64_t i = t * lattice.vocab_size + k;
      grad[i] = grad[i] == 0.0 ? 0.0 : grad[i] * std::exp(-log_probs[i]);
    }
  }
  return grad;
}

std::vector<double> ctc_grad_log_probs(const CtcLattice& lattice,
                                       const std::vector<double>& log_probs) {
  return grad_wrt_log_probs(lattice, log_probs);
}

Tensor ctc_loss_op(const Tensor& log_probs, const GlossSequence& target) {
  if (log_probs.rank() != 2) {
    throw ShapeError("ctc_loss_op expects [T',V] log-probs, got " + shape_str(log_probs.shape()));
  }
  const std::int64_t t_prime = log_probs.shape()[0];
  const std::int64_t vocab = log_probs.shape()[1];
  CtcResult res = ctc_loss(log_probs.values(), t_prime, vocab, target);
  std::vector<double> grad = ctc_grad_log_probs(res.lattice, log_probs.values());

  return detail::make_op_output(
      "ctc_loss", {1}, {res.loss}, {log_probs},
      [grad = std::move(grad)](const std::vector<double>& dz,
                               const std::function<std::vector<double>&(std::size_t)>& sink) {
        std::vector<double>& dlp = sink(0);
        for (std::size_t i = 0; i < grad.size(); ++i) dlp[i] += dz[0] * grad[i];
      });
}

GlossSequence collapse(const std::vector<int>& path) {
  GlossSequence out;
  int prev = -1;
  for (const int id : path) {
    if (id != prev && id != Vocabulary::kBlank) out.push_back(id);
    prev = id;
  }
  return out;
}

GlossSequence decode_greedy(const std::vector<double>& log_probs, std::int64_t t_prime,
                            std::int64_t vocab_size) {
  if (static_cast<std::int64_t>(log_probs.size()) != t_prime * vocab_size) {
    throw ShapeError("log_probs size != T' * V");
  }
  std::vector<int> path(static_cast<std::size_t>(t_prime));
  for (std::int64_t t = 0; t < t_prime; ++t) {
    const double* row = log_probs.data() + t * vocab_size;
    int best = 0;
    for (std::int64_t k = 1; k < vocab_size; ++k) {
      if (row[k] > row[best]) best = static_cast<int>(k);
    }
    path[t] = best;
  }
  return collapse(path);
}

GlossSequence decode_beam(const std::vector<double>& log_probs, std::int64_t t_prime,
                          std::int64_t vocab_size, int width) {
  if (width < 1) throw ConfigError("beam width must be >= 1");
  if (static_cast<std::int64_t>(log_probs.size()) != t_prime * vocab_size) {
    throw ShapeError("log_probs size != T' * V");
  }
  // The degenerate beam is best-path decoding.  Sum-merged bookkeeping at
  // width one would sometimes prefer a stay (blank + repeat mass) over the
  // frame argmax, which is not the contract for width 1.
  if (width == 1) return decode_greedy(log_probs, t_prime, vocab_size);

  struct Mass {
    double blank = kLogZero;     // prefix probability for paths ending in blank
    double nonblank = kLogZero;  // ... ending in the prefix's last symbol
    double total() const { return log_add(blank, nonblank); }
  };
  // std::map keeps prefixes in lexicographic order, which makes the
  // tie-break below deterministic without extra bookkeeping.
  std::map<GlossSequence, Mass> beam;
  beam[{}] = Mass{0.0, kLogZero};

  for (std::int64_t t = 0; t < t_prime; ++t) {
    const double* row = log_probs.data() + t * vocab_size;
    std::map<GlossSequence, Mass> next;
    for (const auto& [prefix, mass] : beam) {
      const double total = mass.total();
      // stay: emit blank
      {
        Mass& m = next[prefix];
        m.blank = log_add(m.blank, total + row[Vocabulary::kBlank]);
      }
      for (std::int64_t k = 1; k < vocab_size; ++k) {
        const double lp_k = row[k];
        if (!prefix.empty() && prefix.back() == static_cast<int>(k)) {
          // repeat of the last symbol extends the same run...
          Mass& same = next[prefix];
          same.nonblank = log_add(same.nonblank, mass.nonblank + lp_k);
          // ...or starts a new gloss if a blank intervened
          GlossSequence grown = prefix;
          grown.push_back(static_cast<int>(k));
          Mass& m = next[grown];
          m.nonblank = log_add(m.nonblank, mass.blank + lp_k);
        } else {
          GlossSequence grown = prefix;
          grown.push_back(static_cast<int>(k));
          Mass& m = next[grown];
          m.nonblank = log_add(m.nonblank, total + lp_k);
        }
      }
    }

    if (static_cast<int>(next.size()) > width) {
      std::vector<std::pair<double, const GlossSequence*>> order;
      order.reserve(next.size());
      for (const auto& [prefix, mass] : next) order.emplace_back(mass.total(), &prefix);
      std::stable_sort(order.begin(), order.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      std::map<GlossSequence, Mass> pruned;
      for (int i = 0; i < width; ++i) pruned.emplace(*order[i].second, next[*order[i].second]);
      next = std::move(pruned);
    }
    beam = std::move(next);
  }

  const GlossSequence* best = nullptr;
  double best_score = kLogZero;
  for (const auto& [prefix, mass] : beam) {
    const double total = mass.total();
    if (best == nullptr || total > best_score) {
      best = &prefix;
      best_score = total;
    }
  }
  return best ? *best : GlossSequence{};
}

SpikeDiagnostics spike_diagnostics(const std::vector<double>& series) {
  if (series.empty()) throw ShapeError("spike_diagnostics on empty series");
  const std::size_t n = series.size();

  const double mx = *std::max_element(series.begin(), series.end());
  const double tau = std::max(1e-3 * mx, 1e-12);

  SpikeDiagnostics d;
  std::size_t below = 0;
  double total = 0.0;
  for (const double v : series) {
    if (v < tau) ++below;
    total += v;
  }
  d.zero_fraction = static_cast<double>(below) / static_cast<double>(n);

  std::vector<double> sorted(series);
  std::sort(sorted.begin(), sorted.end());
  const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  d.peak_to_median = mx == 0.0 ? 1.0 : mx / std::max(median, 1e-300);

  if (n == 1 || total == 0.0) {
    d.entropy = 1.0;
  } else {
    double h = 0.0;
    for (const double v : series) {
      if (v > 0.0) {
        const double p = v / total;
        h -= p * std::log(p);
      }
    }
    d.entropy = h / std::log(static_cast<double>(n));
  }
  return d;
}

}  // namespace dcac
