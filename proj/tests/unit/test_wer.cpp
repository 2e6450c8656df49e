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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dcac/wer.hpp"
#include "oracles.hpp"

using namespace dcac;
namespace dt = dcac::testing;

TEST_CASE("identity has zero error") {
  const auto b = wer({1, 2, 3}, {1, 2, 3});
  CHECK(b.errors() == 0);
  CHECK(b.wer() == 0.0);
}

TEST_CASE("single deletion") {
  const auto b = wer({1, 2, 3}, {1, 3});
  CHECK(b.deletions == 1);
  CHECK(b.insertions == 0);
  CHECK(b.substitutions == 0);
  CHECK(b.wer() == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("WER may exceed one") {
  const auto b = wer({1}, {2, 2});
  CHECK(b.substitutions == 1);
  CHECK(b.insertions == 1);
  CHECK(b.deletions == 0);
  CHECK(b.wer() == doctest::Approx(2.0));
}

TEST_CASE("ties prefer substitutions over insertion+deletion pairs") {
  // [a,b] vs [b,a]: two substitutions or {del a, match b, ins a}; both cost 2
  const auto b = wer({1, 2}, {2, 1});
  CHECK(b.substitutions == 2);
  CHECK(b.insertions == 0);
  CHECK(b.deletions == 0);
}

TEST_CASE("empty reference is rejected") {
  CHECK_THROWS_AS(wer({}, {1}), ConfigError);
}

TEST_CASE("empty hypothesis is all deletions") {
  const auto b = wer({3, 1, 4}, {});
  CHECK(b.deletions == 3);
  CHECK(b.wer() == doctest::Approx(1.0));
}

TEST_CASE("random pairs agree with the recursive oracle") {
  Rng rng(314);
  for (int trial = 0; trial < 300; ++trial) {
    const int nr = static_cast<int>(rng.uniform_int(1, 8));
    const int nh = static_cast<int>(rng.uniform_int(0, 8));
    GlossSequence ref(nr), hyp(nh);
    for (auto& g : ref) g = static_cast<int>(rng.uniform_int(1, 5));
    for (auto& g : hyp) g = static_cast<int>(rng.uniform_int(1, 5));
    const auto got = wer(ref, hyp);
    const auto want = dt::wer_bruteforce(ref, hyp);
    CHECK(got.substitutions == want.substitutions);
    CHECK(got.insertions == want.insertions);
    CHECK(got.deletions == want.deletions);
    CHECK(got.ref_length == want.ref_length);
  }
}
