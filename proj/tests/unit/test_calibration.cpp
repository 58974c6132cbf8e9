#include "dyadapt/calibration.hpp"
#include "dyadapt/errors.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace dyadapt;

namespace {

const double inf = std::numeric_limits<double>::infinity();

CalibrationConfig
single_point(std::size_t n, int j_max, int level, double p, std::vector<double> zetas,
             std::size_t reps, std::uint64_t seed)
{
  CalibrationConfig c;
  c.n = n;
  c.j_max = j_max;
  c.level_grid = { level };
  c.p_grid = { { p } };
  c.zeta_grid = std::move(zetas);
  c.reps = reps;
  c.seed = seed;
  c.d = 0.1;
  c.validate();
  return c;
}

} // namespace

TEST_CASE("default grids")
{
  const auto p = default_p_grid(2, 0.1, 10.0);
  REQUIRE(p.size() == 9);
  CHECK(p.front() == 0.025);
  CHECK(p.back() == 1.0);
  for (std::size_t i = 1; i < p.size(); ++i)
    CHECK(p[i] > p[i - 1]);
  // geometric spacing
  CHECK(p[1] / p[0] == doctest::Approx(p[8] / p[7]).epsilon(1e-12));

  const auto q = default_p_grid(5, 0.1, 10.0);
  CHECK(q.front() == std::ldexp(0.1, -5));
  CHECK(q.back() == std::ldexp(10.0, -5));
  CHECK(default_p_grid(0, 1.0, 1.0).size() == 1);

  const auto z = default_zeta_grid(1024, 0.1, 10.0, 64);
  REQUIRE(z.size() == 64);
  const double s = std::sqrt(std::log(1024.0));
  CHECK(z.front() == doctest::Approx(0.1 * s));
  CHECK(z.back() == doctest::Approx(10.0 * s));
  CHECK_THROWS_AS(default_zeta_grid(1024, 2.0, 1.0, 4), ConfigError);
  CHECK_THROWS_AS(default_p_grid(0, 0.0, 1.0), ConfigError);

  const auto cfg = make_calibration_config(1024, 4);
  CHECK(cfg.level_grid.size() == 5);
  CHECK(cfg.bound() == 1.0 / (1024.0 * 256.0));
}

TEST_CASE("config validation")
{
  auto c = single_point(256, 3, 0, 1.0, { 1.0 }, 10, 1);
  auto bad = c;
  // (log 256)^2 / 256 = 0.12 > 2^-4
  bad.j_max = 4;
  bad.d = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.zeta_grid = { 2.0, 1.0 };
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.p_grid = { { 0.0 } };
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.level_grid = { 5 };
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.reps = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(estimate_lhs_curve(c, 1, 0), ConfigError);
  CHECK_THROWS_AS(estimate_lhs_curve(c, 0, 1), ConfigError);
}

TEST_CASE("simulated chains in degenerate cases")
{
  Substream rng(3);
  const auto zero = simulate_chain(50, 0.0, 1, 4, rng);
  CHECK(zero.counts == std::vector<std::uint64_t>(4, 0));
  CHECK(zero.j_max() == 4);
  const auto full = simulate_chain(8, 1.0, 2, 2, rng);
  CHECK(full.counts == std::vector<std::uint64_t>{ 8 });
  CHECK_THROWS_AS(simulate_chain(8, 1.5, 0, 2, rng), ConfigError);
  CHECK_THROWS_AS(simulate_chain(8, 0.5, 3, 2, rng), ConfigError);

  for (int r = 0; r < 200; ++r) {
    const auto c = simulate_chain(300, 0.3, 0, 6, rng);
    for (std::size_t i = 1; i < c.counts.size(); ++i)
      REQUIRE(c.counts[i] <= c.counts[i - 1]);
  }
}

TEST_CASE("thinning reproduces the finest-level mean")
{
  // E V[3] = n p 2^-(3-1) = 12.5
  const std::size_t reps = 100000;
  double s = 0.0;
  double s2 = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    Substream rng(41, { r });
    const double v = static_cast<double>(simulate_chain(100, 0.5, 1, 3, rng).at(3));
    s += v;
    s2 += v * v;
  }
  const double mean = s / reps;
  const double se = std::sqrt((s2 / reps - mean * mean) / reps);
  CHECK(std::fabs(mean - 12.5) < 3.0 * se);
  // Var V[3] = n q (1 - q) for q = 1/8
  const double var = s2 / reps - mean * mean;
  CHECK(var == doctest::Approx(100.0 * 0.125 * 0.875).epsilon(0.03));
}

TEST_CASE("propagation statistic vanishes where it must")
{
  const ChainCounts halving{ 0, { 8, 4, 2, 1 } };
  for (double zeta : { 0.0, 0.3, 5.0 })
    CHECK(propagation_statistic(halving, Threshold(zeta), 64) == 0.0);

  const ChainCounts rough{ 0, { 8, 6, 5, 5 } };
  CHECK(propagation_statistic(rough, Threshold(inf), 64) == 0.0);
  const ChainCounts empty{ 2, { 0, 0 } };
  CHECK(propagation_statistic(empty, Threshold(0.0), 64) == 0.0);
  CHECK_THROWS_AS(propagation_statistic(rough, Threshold(1.0), 1), ConfigError);
}

TEST_CASE("propagation statistic on a hand chain")
{
  const ChainCounts c{ 0, { 8, 6, 5, 5 } };
  for (double zeta : { 0.0, 0.1, 0.5, 1.0, 2.0 }) {
    CHECK(propagation_statistic(c, Threshold(zeta), 64) ==
          oracle::reference_statistic(c.counts, 0, 64.0, zeta));
  }
  // at zeta = 0 every start jumps to j_max = 3 (f = 0.625); the start
  // j' = 0 (f = 0.125) gives the largest term:
  // sqrt(64 / log 64) |0.625 - 0.125| / sqrt(0.125)
  const double expect = std::sqrt(64.0 / std::log(64.0)) * 0.5 / std::sqrt(0.125);
  CHECK(propagation_statistic(c, Threshold(0.0), 64) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("statistic of a pyramid chain matches raw-sample counts")
{
  std::mt19937_64 gen(12);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 2 + gen() % 500;
    const int j_max = static_cast<int>(gen() % 8);
    const auto xs = oracle::stress_sample(gen, n);
    const auto p = build_pyramid(xs, j_max, 0.0);
    const int base = static_cast<int>(gen() % (j_max + 1));
    const std::uint64_t m = gen() % p.finest_bins();
    const double x = std::ldexp(static_cast<double>(m) + 1.0, -j_max);

    std::vector<std::uint64_t> V;
    for (int j = base; j <= j_max; ++j) {
      const auto b = oracle::bisect_bin(x, j);
      std::uint64_t k = 0;
      for (double y : xs)
        k += (b.lo < y && y <= b.hi) ? 1 : 0;
      V.push_back(k);
    }
    const auto chain = chain_from_pyramid(p, base, m);
    REQUIRE(chain.counts == V);
    const double zeta = std::ldexp(static_cast<double>(gen() % 1024), -8);
    REQUIRE(propagation_statistic(chain, Threshold(zeta), n) ==
            oracle::reference_statistic(V, base, static_cast<double>(n), zeta));
  }
}

TEST_CASE("Monte-Carlo mean against exact enumeration")
{
  // n = 256 with p = 1 at level 0: V[0] = 256 and three thinning steps,
  // so E[T^2] is a finite sum over (V1, V2, V3)
  const std::size_t n = 256;
  const double zeta = 1.0;
  double exact = 0.0;
  for (std::uint64_t v1 = 0; v1 <= n; ++v1) {
    const double p1 = oracle::binomial_pmf(n, v1, 0.5);
    if (p1 < 1e-16)
      continue;
    for (std::uint64_t v2 = 0; v2 <= v1; ++v2) {
      const double p2 = p1 * oracle::binomial_pmf(v1, v2, 0.5);
      if (p2 < 1e-16)
        continue;
      for (std::uint64_t v3 = 0; v3 <= v2; ++v3) {
        const double p3 = p2 * oracle::binomial_pmf(v2, v3, 0.5);
        if (p3 < 1e-16)
          continue;
        const double t = oracle::reference_statistic({ n, v1, v2, v3 }, 0, 256.0, zeta);
        exact += p3 * t * t;
      }
    }
  }
  REQUIRE(exact > 0.0);
  const auto cfg = single_point(n, 3, 0, 1.0, { zeta }, 40000, 77);
  const auto est = estimate_lhs(cfg, 0, 0, zeta);
  CHECK(est.std_error > 0.0);
  CHECK(std::fabs(est.mean - exact) < 4.0 * est.std_error);
}

TEST_CASE("Monte-Carlo mean for a single binomial step")
{
  // base = j_max - 1: T^2 is a function of (Z, V) with Z ~ Bin(n, p)
  const std::size_t n = 512;
  const double p = 0.05;
  const int j_max = 4;
  const double zeta = 0.8;
  double exact = 0.0;
  for (std::uint64_t z = 0; z <= n; ++z) {
    const double pz = oracle::binomial_pmf(n, z, p);
    if (pz < 1e-18)
      continue;
    for (std::uint64_t v = 0; v <= z; ++v) {
      const double t = oracle::reference_statistic({ z, v }, j_max - 1, 512.0, zeta);
      exact += pz * oracle::binomial_pmf(z, v, 0.5) * t * t;
    }
  }
  const auto cfg = single_point(n, j_max, j_max - 1, p, { zeta }, 30000, 5);
  const auto est = estimate_lhs(cfg, j_max - 1, 0, zeta);
  CHECK(std::fabs(est.mean - exact) < 4.0 * est.std_error);
}

TEST_CASE("curve and single-threshold estimates agree bitwise")
{
  auto cfg = make_calibration_config(2048, 5, { .reps = 5000, .seed = 9, .zeta_points = 16 });
  const auto curve = estimate_lhs_curve(cfg, 2, 4);
  for (std::size_t q = 0; q < cfg.zeta_grid.size(); ++q) {
    const auto one = estimate_lhs(cfg, 2, 4, cfg.zeta_grid[q]);
    REQUIRE(one.mean == curve[q].mean);
    REQUIRE(one.std_error == curve[q].std_error);
  }
  // huge thresholds accept the start level everywhere
  CHECK(estimate_lhs(cfg, 2, 4, 1e9).mean == 0.0);
}

TEST_CASE("estimates do not depend on the worker count")
{
  const auto cfg = make_calibration_config(4096, 5, { .reps = 9000, .seed = 3, .zeta_points = 24 });
  const auto a = estimate_lhs_curve(cfg, 1, 6, Parallelism{ 1 });
  const auto b = estimate_lhs_curve(cfg, 1, 6, Parallelism{ 4 });
  for (std::size_t q = 0; q < a.size(); ++q) {
    REQUIRE(a[q].mean == b[q].mean);
    REQUIRE(a[q].std_error == b[q].std_error);
  }
  const auto r1 = calibrate(cfg, Parallelism{ 1 });
  const auto r3 = calibrate(cfg, Parallelism{ 3 });
  CHECK(r1.zeta_n == r3.zeta_n);
  REQUIRE(r1.achieved.size() == r3.achieved.size());
  for (std::size_t k = 0; k < r1.achieved.size(); ++k)
    CHECK(r1.achieved[k].lhs.mean == r3.achieved[k].lhs.mean);
}

TEST_CASE("calibrate picks the smallest qualifying threshold")
{
  SUBCASE("first grid point already qualifies")
  {
    auto cfg = single_point(1024, 4, 0, 1.0, { 1e6, 2e6 }, 100, 1);
    const auto rec = calibrate(cfg);
    CHECK(rec.zeta_index == 0);
    CHECK(rec.zeta_n == 1e6);
    CHECK(rec.achieved.front().lhs.mean == 0.0);
  }
  SUBCASE("choice rule on the full default grid")
  {
    const auto cfg = make_calibration_config(1024, 4, { .reps = 3000, .seed = 20 });
    const auto rec = calibrate(cfg);
    const double bound = cfg.bound();
    CHECK(rec.bound == bound);
    CHECK(rec.achieved.size() == 5 * 9);
    std::vector<std::vector<LhsEstimate>> curves;
    for (std::size_t s = 0; s < cfg.level_grid.size(); ++s)
      for (std::size_t i = 0; i < cfg.p_grid[s].size(); ++i)
        curves.push_back(estimate_lhs_curve(cfg, cfg.level_grid[s], i));
    auto ok = [&](std::size_t q) {
      for (const auto& c : curves)
        if (!(c[q].mean + c[q].std_error <= bound))
          return false;
      return true;
    };
    REQUIRE(ok(rec.zeta_index));
    for (std::size_t q = 0; q < rec.zeta_index; ++q)
      CHECK_FALSE(ok(q));
    const double kappa = rec.zeta_n / std::sqrt(std::log(1024.0));
    CHECK(kappa > 0.5);
    CHECK(kappa < 5.0);
  }
  SUBCASE("infeasible grid")
  {
    auto cfg = single_point(1024, 4, 0, 1.0, { 0.0, 0.01 }, 500, 1);
    CHECK_THROWS_AS(calibrate(cfg), CalibrationInfeasible);
  }
}

TEST_CASE("reruns with the same seed are identical and seeds matter")
{
  const auto cfg = make_calibration_config(1024, 4, { .reps = 2000, .seed = 8, .zeta_points = 32 });
  const auto a = calibrate(cfg);
  const auto b = calibrate(cfg);
  CHECK(a.zeta_n == b.zeta_n);
  for (std::size_t k = 0; k < a.achieved.size(); ++k) {
    CHECK(a.achieved[k].lhs.mean == b.achieved[k].lhs.mean);
    CHECK(a.achieved[k].lhs.std_error == b.achieved[k].lhs.std_error);
  }
  auto other = cfg;
  other.seed = 9;
  const auto c0 = estimate_lhs_curve(cfg, 0, 8);
  const auto c1 = estimate_lhs_curve(other, 0, 8);
  bool differ = false;
  for (std::size_t q = 0; q < c0.size(); ++q)
    differ = differ || c0[q].mean != c1[q].mean;
  CHECK(differ);
}
