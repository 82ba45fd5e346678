#include "doctest.h"

#include <cmath>
#include <set>

#include "salesopt/rng.hpp"

using namespace salesopt;

TEST_CASE("philox known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("same seed and stream reproduce the sequence") {
  Rng a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  bool differs_stream = false, differs_seed = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs_stream |= x != c.next_u64();
    differs_seed |= x != d.next_u64();
  }
  CHECK(differs_stream);
  CHECK(differs_seed);
}

TEST_CASE("fork does not advance the parent") {
  Rng a(5), b(5);
  Rng child = a.fork(99);
  child.next_u64();
  CHECK(a.next_u64() == b.next_u64());
  CHECK(child.stream() == 99);
}

TEST_CASE("uniform and normal moments") {
  Rng r(2024);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  double lo = 1, hi = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    su += u;
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  // Standard errors: 1/sqrt(12 n) ~ 6.5e-4 and 1/sqrt(n) ~ 2.2e-3.
  CHECK(std::abs(su / n - 0.5) < 4e-3);
  CHECK(std::abs(sn / n) < 1.2e-2);
  CHECK(std::abs(sn2 / n - 1.0) < 2e-2);
}

TEST_CASE("below stays in range and covers it") {
  Rng r(3);
  std::array<int, 7> counts{};
  for (int i = 0; i < 70000; ++i) {
    const auto k = r.below(7);
    REQUIRE(k < 7);
    ++counts[k];
  }
  double chi2 = 0;
  for (int c : counts) chi2 += (c - 10000.0) * (c - 10000.0) / 10000.0;
  // 6 degrees of freedom; 22.46 is the 0.999 quantile.
  CHECK(chi2 < 22.46);
  CHECK(Rng(1).below(1) == 0);
}

TEST_CASE("bernoulli extremes") {
  Rng r(9);
  for (int i = 0; i < 100; ++i) {
    CHECK_FALSE(r.bernoulli(0.0));
    CHECK(r.bernoulli(1.0));
  }
}
