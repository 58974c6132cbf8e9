#include "dyadapt/dyadic.hpp"
#include "dyadapt/errors.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

using namespace dyadapt;

TEST_CASE("bin_index follows the left-open right-closed convention")
{
  CHECK(bin_index(0.3, 2) == 1);
  CHECK(bin_index(0.25, 2) == 0);
  CHECK(bin_index(1.0, 3) == 7);
  CHECK(bin_index(1.0, 0) == 0);
  CHECK(bin_index(0.5, 1) == 0);
  CHECK(bin_index(std::nextafter(0.5, 1.0), 1) == 1);
  CHECK(bin_index(std::numeric_limits<double>::denorm_min(), 10) == 0);
  CHECK(bin_index(0.75, 62) == (std::uint64_t{ 3 } << 60) - 1);

  const DyadicInterval I{ 2, 1 };
  CHECK(I.left() == 0.25);
  CHECK(I.right() == 0.5);
  CHECK(I.contains(0.3));
  CHECK_FALSE(I.contains(0.25));
  CHECK(I.contains(0.5));
}

TEST_CASE("bin_index rejects points outside (0, 1]")
{
  CHECK_THROWS_AS(bin_index(0.0, 3), std::domain_error);
  CHECK_THROWS_AS(bin_index(-0.1, 3), std::domain_error);
  CHECK_THROWS_AS(bin_index(1.0000001, 3), std::domain_error);
  CHECK_THROWS_AS(bin_index(std::nan(""), 3), std::domain_error);
  CHECK_THROWS_AS(bin_index(0.5, -1), ConfigError);
}

TEST_CASE("bin_index agrees with bisection on random and dyadic points")
{
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 20000; ++rep) {
    const int j = static_cast<int>(gen() % 40);
    double x = 1.0 - u(gen);
    if (rep % 3 == 0) {
      const int jj = static_cast<int>(gen() % 40);
      x = std::ldexp(static_cast<double>(1 + gen() % (std::uint64_t{ 1 } << jj)), -jj);
    }
    const auto b = oracle::bisect_bin(x, j);
    const DyadicInterval I{ j, bin_index(x, j) };
    REQUIRE(I.left() == b.lo);
    REQUIRE(I.right() == b.hi);
  }
}

TEST_CASE("interval family relations")
{
  const DyadicInterval I{ 3, 5 };
  CHECK(I.parent() == DyadicInterval{ 2, 2 });
  CHECK(I.left_child() == DyadicInterval{ 4, 10 });
  CHECK(I.right_child() == DyadicInterval{ 4, 11 });
  CHECK(I.ancestor(0) == DyadicInterval{ 0, 0 });
  CHECK(I.ancestor(3) == I);
  CHECK(I.contains(I.left_child()));
  CHECK_FALSE(I.left_child().contains(I));
  CHECK_THROWS_AS(DyadicInterval{}.parent(), std::domain_error);
  CHECK_THROWS_AS(I.ancestor(4), std::domain_error);
  CHECK(I.width() == 0.125);
}

TEST_CASE("pyramid counts of small fixtures")
{
  SUBCASE("four points, one level")
  {
    const std::vector<double> xs{ 0.1, 0.6, 0.7, 0.9 };
    const auto p = build_pyramid(xs, 1);
    CHECK(p.count(0, 0) == 4);
    CHECK(p.count(1, 0) == 1);
    CHECK(p.count(1, 1) == 3);
    CHECK(linear_estimate(p, 1, 1) == 1.5);
    CHECK(linear_estimate(p, 0, 0) == 1.0);
    CHECK(linear_estimate(p, 1, 0) == 0.5);
  }
  SUBCASE("empty sample")
  {
    const auto p = build_pyramid({}, 2);
    for (int j = 0; j <= 2; ++j)
      for (std::uint64_t k = 0; k < (1u << j); ++k)
        CHECK(p.count(j, k) == 0);
    CHECK(p.n() == 0);
  }
  SUBCASE("ties at a dyadic point")
  {
    const std::vector<double> xs{ 0.5, 0.5, 0.5 };
    const auto p = build_pyramid(xs, 2, 0.1);
    CHECK(p.count(2, 1) == 3);
    CHECK(p.count(2, 0) == 0);
    CHECK(p.count(2, 2) == 0);
    CHECK(p.count(2, 3) == 0);
    CHECK(linear_estimate(p, 2, 3) == 0.0);
  }
}

TEST_CASE("points outside (0, 1] are dropped and reported")
{
  const std::vector<double> xs{ -0.5, 0.0, 0.2, 1.0, 1.5, std::nan(""), 0.7 };
  const auto p = build_pyramid(xs, 0, 0.0);
  CHECK(p.n() == xs.size());
  CHECK(p.dropped() == 4);
  CHECK(p.count(0, 0) == 3);
  CHECK(linear_estimate(p, 0, 0) == doctest::Approx(3.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("the resolution constraint is enforced")
{
  std::vector<double> xs(4, 0.3);
  // (log 4)^2 / 4 = 0.48, so only level 0 and 1 are admissible at d = 1
  CHECK_NOTHROW(build_pyramid(xs, 1));
  CHECK_THROWS_AS(build_pyramid(xs, 2), ConfigError);
  CHECK_NOTHROW(build_pyramid(xs, 4, 0.1));
  CHECK_THROWS_AS(build_pyramid(xs, 63), ConfigError);

  CHECK(default_j_max(1024) == 4);
  CHECK(default_j_max(4) == 1);
  CHECK(default_j_max(4, 0.1) == 4);
  CHECK_THROWS_AS(default_j_max(1), ConfigError);
  CHECK_THROWS_AS(default_j_max(100, 0.0), ConfigError);
  // smallest n and largest admissible level from a direct scan
  for (std::size_t n : { 2ul, 3ul, 10ul, 4096ul, 65536ul, 1000003ul }) {
    const int j = default_j_max(n, 1.0);
    const double nn = static_cast<double>(n);
    const double need = std::log(nn) * std::log(nn) / nn;
    CHECK(std::ldexp(1.0, -j) >= need);
    if (j < 62)
      CHECK(std::ldexp(1.0, -(j + 1)) < need);
  }
}

TEST_CASE("pyramid from finest counts")
{
  const std::vector<std::uint64_t> finest{ 1, 0, 2, 5 };
  const auto p = CountsPyramid::from_finest_counts(10, 2, finest, 0.0);
  CHECK(p.count(1, 0) == 1);
  CHECK(p.count(1, 1) == 7);
  CHECK(p.count(0, 0) == 8);
  CHECK(p.dropped() == 2);
  CHECK_THROWS_AS(CountsPyramid::from_finest_counts(7, 2, finest, 0.0), ConfigError);
  CHECK_THROWS_AS(CountsPyramid::from_finest_counts(10, 3, finest, 0.0), ConfigError);
}

TEST_CASE("count-based estimates equal kernel sums over the raw sample")
{
  std::mt19937_64 gen(2);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 2 + gen() % 400;
    const auto xs = oracle::stress_sample(gen, n);
    const int j_max = static_cast<int>(gen() % 9);
    const auto p = build_pyramid(xs, j_max, 0.0);
    std::vector<double> chain(j_max + 1);
    for (int q = 0; q < 64; ++q) {
      const double x = 1.0 - std::ldexp(static_cast<double>(gen() >> 11), -53);
      const auto m = bin_index(x, j_max);
      p.chain_estimates(m, chain);
      for (int j = 0; j <= j_max; ++j) {
        const double expect = oracle::kernel_estimate(xs, j, x);
        REQUIRE(linear_estimate(p, j, bin_index(x, j)) == expect);
        REQUIRE(chain[j] == expect);
      }
    }
  }
}

TEST_CASE("linear estimates are non-negative and at least 2^j / n when positive")
{
  std::mt19937_64 gen(8);
  const auto xs = oracle::stress_sample(gen, 300);
  const auto p = build_pyramid(xs, 6, 0.0);
  for (int j = 0; j <= 6; ++j) {
    for (std::uint64_t k = 0; k < (1u << j); ++k) {
      const double f = linear_estimate(p, j, k);
      CHECK(f >= 0.0);
      if (f > 0.0)
        CHECK(f >= std::ldexp(1.0, j) / 300.0);
    }
  }
  CHECK_THROWS(p.count(7, 0));
  CHECK_THROWS(p.count(2, 4));
}
