#pragma once

#include "dyadapt/dyadic.hpp"
#include "dyadapt/lepski.hpp"
#include "dyadapt/parallel.hpp"
#include "dyadapt/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace dyadapt {

//! Monte-Carlo setup for choosing zeta_n under the uniform propagation
//! condition. p_grid[i] holds the bin masses probed at level level_grid[i].
struct CalibrationConfig
{
  std::size_t n = 0;
  int j_max = 0;
  double alpha = 1.0;
  double d = 1.0;
  double delta = 0.1;
  double M = 10.0;
  std::vector<int> level_grid;
  std::vector<std::vector<double>> p_grid;
  std::size_t reps = 10000;
  std::vector<double> zeta_grid;
  std::uint64_t seed = 0;

  //! Throws ConfigError on any violated invariant.
  void validate() const;
  //! alpha / (n 2^{2 j_max}).
  double bound() const;
};

//! Geometric grid of `points` masses on [delta 2^-j, min(1, M 2^-j)].
std::vector<double> default_p_grid(int level, double delta, double M,
                                   std::size_t points = 9);

//! `points` equally spaced thresholds on [kappa_min, kappa_max] sqrt(log n).
std::vector<double> default_zeta_grid(std::size_t n, double kappa_min = 0.1,
                                      double kappa_max = 10.0,
                                      std::size_t points = 64);

struct CalibrationDefaults
{
  double alpha = 1.0;
  double d = 1.0;
  double delta = 0.1;
  double M = 10.0;
  std::size_t reps = 10000;
  std::uint64_t seed = 0;
  double kappa_min = 0.1;
  double kappa_max = 10.0;
  std::size_t zeta_points = 64;
  std::size_t p_points = 9;
};

//! Full config with every level 0..j_max and the default grids.
CalibrationConfig make_calibration_config(std::size_t n, int j_max,
                                          const CalibrationDefaults& opts = {});

//! Counts V[j'] of the nested intervals containing one finest bin, for
//! j' = base_level..j_max. Nonincreasing along the chain.
struct ChainCounts
{
  int base_level = 0;
  std::vector<std::uint64_t> counts;

  int j_max() const noexcept
  {
    return base_level + static_cast<int>(counts.size()) - 1;
  }
  std::uint64_t at(int level) const { return counts.at(level - base_level); }
};

//! Z ~ Binomial(n, p) points in the base interval, then binomial thinning
//! V[j'+1] | V[j'] ~ Binomial(V[j'], 1/2) down to j_max.
ChainCounts simulate_chain(std::size_t n, double p, int base_level, int j_max,
                           Substream& rng);

//! The chain of finest bin m of a pyramid, from base_level down.
ChainCounts chain_from_pyramid(const CountsPyramid& p, int base_level,
                               std::uint64_t m);

//! T = max_{base <= j' <= j_max} sqrt(n 2^-j'/log n) |f_hat(j') - f_n(j')| / s_n(j'),
//! evaluated from the chain counts alone. Requires n > 1.
double propagation_statistic(const ChainCounts& chain, Threshold zeta,
                             std::size_t n);

struct LhsEstimate
{
  double mean = 0.0;
  double std_error = 0.0;
};

//! Monte-Carlo E[T^2] at one grid point for every threshold of
//! config.zeta_grid, using common substreams keyed by
//! (seed, level, p_index, replicate).
std::vector<LhsEstimate> estimate_lhs_curve(const CalibrationConfig& config,
                                            int level, std::size_t p_index,
                                            Parallelism par = {});

//! Monte-Carlo E[T^2] at one grid point and one threshold. Uses the same
//! substreams as estimate_lhs_curve, so the two agree bitwise.
LhsEstimate estimate_lhs(const CalibrationConfig& config, int level,
                         std::size_t p_index, double zeta, Parallelism par = {});

struct GridPointResult
{
  int level = 0;
  std::size_t p_index = 0;
  double p = 0.0;
  LhsEstimate lhs;
};

struct ThresholdRecord
{
  double zeta_n = 0.0;
  std::size_t zeta_index = 0;
  CalibrationConfig config;
  //! E[T^2] estimates at zeta_n, one per (level, p) grid point.
  std::vector<GridPointResult> achieved;
  double bound = 0.0;
};

//! Smallest zeta in the grid with mean + one standard error <= bound at
//! every grid point. Throws CalibrationInfeasible when none qualifies.
ThresholdRecord calibrate(const CalibrationConfig& config, Parallelism par = {});

} // namespace dyadapt
