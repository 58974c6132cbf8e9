#pragma once

#include "dyadapt/density.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dyadapt {

//! Value of the local projection K_{j,x}(f) on I_{j,k}: 2^j times the mass
//! of the interval (f is unchanged elsewhere).
double local_projection(const PiecewiseDensity& f, int level, std::uint64_t k);

//! sup over I_{j,k} of |f - K_{j,x}(f)|, from the exact extrema of f.
double local_bias(const PiecewiseDensity& f, int level, std::uint64_t k);

//! (M / delta^2) 2^-j local_bias^2; needs delta > 0.
double delta_conc(const PiecewiseDensity& f, int level, std::uint64_t k);

//! Constants of the Hoelder bias bound local_bias <= c 2^{-jt}.
//! c1 = max over pieces of 6 L (2/eta)^t; c0 is measured on the density as
//! the largest local_bias(f,j,k) 2^{j t} over bins with 2^{1-j} <= eta.
struct HolderConstants
{
  double c0 = 0.0;
  double c1 = 0.0;
  double c = 0.0;
  //! c' = c^2 L / delta^2 with the largest L of the profile.
  double c_prime = 0.0;
};

HolderConstants holder_constants(const PiecewiseDensity& f,
                                 const HolderProfile& profile,
                                 int measure_level = 16);

//! c' 2^{-j(2t+1)}.
double delta_daub(const HolderConstants& constants, double t, int level);

//! c' 2^{-j(2t(x)+1)} with t read from the profile at x.
double delta_daub(const HolderProfile& profile, const HolderConstants& constants,
                  int level, double x);

//! Running maximum from the finest level down: out[j] = max_{l >= j} in[l].
std::vector<double> monotonize(std::span<const double> deltas);

struct OracleLevel
{
  int level = 0;
  //! false when no level up to j_max satisfied n Delta_j <= Delta log n.
  bool qualified = true;
};

//! min { j <= j_max : n deltas[j] <= Delta log n } (j_max if none).
//! deltas[j] is Delta_{j,x} for j = 0..j_max and must be nonincreasing.
OracleLevel oracle_level(std::span<const double> deltas, double Delta,
                         std::size_t n, int j_max);

enum class DeltaVariant
{
  Concentration, // local bias functional
  Holder         // Hoelder-profile bound
};

//! Oracle level j*(x) on every finest bin.
struct OracleLevels
{
  std::vector<int> jstar;
  double Delta = 0.4;
  DeltaVariant variant = DeltaVariant::Concentration;
  std::size_t n = 0;
  int j_max = 0;
  //! Finest bins where no level qualified and j_max was used.
  std::size_t unqualified = 0;
};

//! j* from the monotonized delta_conc chain of each finest bin.
OracleLevels oracle_levels_conc(const PiecewiseDensity& f, std::size_t n,
                                int j_max, double Delta = 0.4);

//! j* from delta_daub, with t taken as the smallest exponent over each
//! level-j interval so that Delta_{j,x} is constant on I_{j,k}.
OracleLevels oracle_levels_holder(const HolderProfile& profile,
                                  const HolderConstants& constants,
                                  std::size_t n, int j_max, double Delta = 0.4);

//! sup over x of sup_y |log(f(y) / K_{j*(x),x}(f)(y))|; needs inf f > 0.
double compute_U(const PiecewiseDensity& f, const OracleLevels& oracle);

} // namespace dyadapt
