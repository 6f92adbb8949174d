#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "descentlab/rng.hpp"

using namespace descentlab;

TEST_CASE("streams are deterministic in the seed") {
  Rng a(42), b(42), c(43);
  bool all_equal = true;
  bool any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    all_equal = all_equal && (va == b.next_u64());
    any_diff = any_diff || (va != c.next_u64());
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("next_unit stays strictly inside (0,1)") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_unit();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("gaussian moments are roughly standard normal") {
  Rng rng(123);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.next_gaussian();
    sum += g;
    sum_sq += g * g;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("next_below is in range and hits every residue") {
  Rng rng(5);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t v = rng.next_below(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("shuffle is a permutation and depends on the seed") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> a = v, b = v;
  Rng r1(1), r2(2);
  r1.shuffle(a);
  r2.shuffle(b);
  auto sorted = [](std::vector<int> x) {
    std::sort(x.begin(), x.end());
    return x;
  };
  CHECK(sorted(a) == v);
  CHECK(sorted(b) == v);
  CHECK(a != b);
}

TEST_CASE("derive_key separates every part") {
  CHECK(derive_key({1, 2}) != derive_key({2, 1}));
  CHECK(derive_key({1, 2}) != derive_key({1, 3}));
  CHECK(derive_key({1}) != derive_key({1, 0}));
  CHECK(derive_key({1, 2}) == derive_key({1, 2}));
}
