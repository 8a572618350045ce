#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "specdiff/philox.hpp"

using namespace specdiff;

TEST_CASE("philox4x32 known-answer vectors") {
  // Reference vectors from the generator's published test suite.
  auto z = philox4x32({0u, 0u, 0u, 0u}, {0u, 0u});
  CHECK(z.x[0] == 0x6627e8d5u);
  CHECK(z.x[1] == 0xe169c58du);
  CHECK(z.x[2] == 0xbc57ac4cu);
  CHECK(z.x[3] == 0x9b00dbd8u);

  auto f = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                      {0xffffffffu, 0xffffffffu});
  CHECK(f.x[0] == 0x408f276du);
  CHECK(f.x[1] == 0x41c83b0eu);
  CHECK(f.x[2] == 0xa20bc7c6u);
  CHECK(f.x[3] == 0x6d5451fdu);

  auto p = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                      {0xa4093822u, 0x299f31d0u});
  CHECK(p.x[0] == 0xd16cfe09u);
  CHECK(p.x[1] == 0x94fdccebu);
  CHECK(p.x[2] == 0x5001e420u);
  CHECK(p.x[3] == 0x24126ea1u);
}

TEST_CASE("streams are deterministic and independent") {
  PhiloxStream a1(42, 0), a2(42, 0);
  for (int i = 0; i < 100; ++i) CHECK(a1.next_u64() == a2.next_u64());

  // different stream ids and different seeds give different sequences
  PhiloxStream b(42, 1), c(43, 0), a3(42, 0);
  int same_b = 0, same_c = 0;
  for (int i = 0; i < 64; ++i) {
    std::uint64_t v = a3.next_u64();
    if (v == b.next_u64()) ++same_b;
    if (v == c.next_u64()) ++same_c;
  }
  CHECK(same_b == 0);
  CHECK(same_c == 0);
}

TEST_CASE("uniform doubles live in the right intervals") {
  PhiloxStream s(1234, 7);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double u = s.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(5e-3));
  CHECK(lo < 1e-4);
  CHECK(hi > 1.0 - 1e-4);

  PhiloxStream t(1234, 8);
  for (int i = 0; i < 1000; ++i) {
    double u = t.next_double_open();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
}

TEST_CASE("gaussian and exponential moments") {
  PhiloxStream s(99, 3);
  const int n = 400000;
  double m1 = 0.0, m2 = 0.0, m3 = 0.0;
  for (int i = 0; i < n; ++i) {
    double g = s.next_gaussian();
    m1 += g;
    m2 += g * g;
    m3 += g * g * g;
  }
  m1 /= n;
  m2 /= n;
  m3 /= n;
  // 5-sigma windows for n = 4e5
  CHECK(std::abs(m1) < 5.0 / std::sqrt(static_cast<double>(n)));
  CHECK(m2 == doctest::Approx(1.0).epsilon(0.02));
  CHECK(std::abs(m3) < 5.0 * std::sqrt(15.0 / n));

  PhiloxStream t(99, 4);
  double e1 = 0.0, e2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = t.next_exponential();
    CHECK(x >= 0.0);
    e1 += x;
    e2 += x * x;
  }
  e1 /= n;
  e2 /= n;
  CHECK(e1 == doctest::Approx(1.0).epsilon(0.01));
  CHECK(e2 == doctest::Approx(2.0).epsilon(0.03));
}

TEST_CASE("block layout: two u64 per block, little half first") {
  PhiloxStream s(0, 0);
  std::uint64_t first = s.next_u64();
  std::uint64_t second = s.next_u64();
  auto block = philox4x32({0u, 0u, 0u, 0u}, {0u, 0u});
  CHECK(first == ((static_cast<std::uint64_t>(block.x[1]) << 32) | block.x[0]));
  CHECK(second ==
        ((static_cast<std::uint64_t>(block.x[3]) << 32) | block.x[2]));
}
