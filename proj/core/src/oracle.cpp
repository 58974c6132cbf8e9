#include "dyadapt/oracle.hpp"

#include "dyadapt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dyadapt {

namespace {

void
check_bin(int level, std::uint64_t k)
{
  if (level < 0 || level > 62 || k >= (std::uint64_t{ 1 } << level))
    throw std::domain_error("dyadic interval out of range");
}

double
left_end(int level, std::uint64_t k)
{
  return std::ldexp(static_cast<double>(k), -level);
}

double
right_end(int level, std::uint64_t k)
{
  return std::ldexp(static_cast<double>(k + 1), -level);
}

} // namespace

double
local_projection(const PiecewiseDensity& f, int level, std::uint64_t k)
{
  check_bin(level, k);
  return std::ldexp(f.mass(level, k), level);
}

double
local_bias(const PiecewiseDensity& f, int level, std::uint64_t k)
{
  const double proj = local_projection(f, level, k);
  const ValueRange r = f.range(left_end(level, k), right_end(level, k));
  return std::max({ r.hi - proj, proj - r.lo, 0.0 });
}

double
delta_conc(const PiecewiseDensity& f, int level, std::uint64_t k)
{
  if (!(f.delta() > 0.0))
    throw ConfigError("delta_conc requires a density bounded below by delta > 0");
  const double b = local_bias(f, level, k);
  return f.upper() / (f.delta() * f.delta()) * std::ldexp(b * b, -level);
}

HolderConstants
holder_constants(const PiecewiseDensity& f, const HolderProfile& profile,
                 int measure_level)
{
  if (!(f.delta() > 0.0))
    throw ConfigError("holder constants require delta > 0");
  if (measure_level < 0 || measure_level > 30)
    throw ConfigError("holder constants: measure level outside [0, 30]");
  const double sup_f = f.range(0.0, 1.0).hi;
  HolderConstants out;
  double L_max = 0.0;
  for (const auto& p : profile.pieces()) {
    if (p.L < sup_f) {
      throw ConfigError("holder profile: L must dominate sup f (the local "
                        "Hoelder ball bounds the sup norm by L)");
    }
    out.c1 = std::max(out.c1, 6.0 * p.L * std::pow(2.0 / p.eta, p.t));
    L_max = std::max(L_max, p.L);
  }
  for (int j = 0; j <= measure_level; ++j) {
    const std::uint64_t bins = std::uint64_t{ 1 } << j;
    const double reach = std::ldexp(1.0, 1 - j);
    for (std::uint64_t k = 0; k < bins; ++k) {
      const auto pieces = profile.overlapping(left_end(j, k), right_end(j, k));
      double t = 1.0;
      double eta = std::numeric_limits<double>::infinity();
      for (const auto& p : pieces) {
        t = std::min(t, p.t);
        eta = std::min(eta, p.eta);
      }
      if (reach > eta)
        continue;
      out.c0 = std::max(out.c0, local_bias(f, j, k) * std::pow(2.0, j * t));
    }
  }
  out.c = std::max(out.c0, out.c1);
  out.c_prime = out.c * out.c * L_max / (f.delta() * f.delta());
  return out;
}

double
delta_daub(const HolderConstants& constants, double t, int level)
{
  if (!(t > 0.0 && t <= 1.0))
    throw std::domain_error("delta_daub: t must lie in (0, 1]");
  return constants.c_prime * std::exp2(-static_cast<double>(level) * (2.0 * t + 1.0));
}

double
delta_daub(const HolderProfile& profile, const HolderConstants& constants,
           int level, double x)
{
  return delta_daub(constants, profile.at(x).t, level);
}

std::vector<double>
monotonize(std::span<const double> deltas)
{
  std::vector<double> out(deltas.begin(), deltas.end());
  for (std::size_t i = out.size(); i-- > 1;)
    out[i - 1] = std::max(out[i - 1], out[i]);
  return out;
}

OracleLevel
oracle_level(std::span<const double> deltas, double Delta, std::size_t n, int j_max)
{
  if (!(Delta > 0.0))
    throw ConfigError("oracle_level: Delta must be positive");
  if (n < 2)
    throw ConfigError("oracle_level: n must exceed 1");
  if (j_max < 0 || deltas.size() < static_cast<std::size_t>(j_max) + 1)
    throw ConfigError("oracle_level: need Delta_{j,x} for j = 0..j_max");
  const double nn = static_cast<double>(n);
  const double budget = Delta * std::log(nn);
  for (int j = 0; j <= j_max; ++j) {
    if (nn * deltas[j] <= budget)
      return { j, true };
  }
  return { j_max, false };
}

namespace {

template<class DeltaAt>
OracleLevels
levels_from(DeltaAt&& delta_at, std::size_t n, int j_max, double Delta,
            DeltaVariant variant)
{
  if (j_max < 0 || j_max > 30)
    throw ConfigError("oracle levels: j_max outside [0, 30]");
  // Delta_{j,x} depends on the level-j interval only
  std::vector<std::vector<double>> table(j_max + 1);
  for (int j = 0; j <= j_max; ++j) {
    const std::uint64_t bins = std::uint64_t{ 1 } << j;
    table[j].resize(bins);
    for (std::uint64_t k = 0; k < bins; ++k)
      table[j][k] = delta_at(j, k);
  }
  OracleLevels out;
  out.Delta = Delta;
  out.variant = variant;
  out.n = n;
  out.j_max = j_max;
  const std::uint64_t finest = std::uint64_t{ 1 } << j_max;
  out.jstar.resize(finest);
  std::vector<double> chain(j_max + 1);
  for (std::uint64_t m = 0; m < finest; ++m) {
    for (int j = 0; j <= j_max; ++j)
      chain[j] = table[j][m >> (j_max - j)];
    const auto mono = monotonize(chain);
    const OracleLevel lvl = oracle_level(mono, Delta, n, j_max);
    out.jstar[m] = lvl.level;
    if (!lvl.qualified)
      ++out.unqualified;
  }
  return out;
}

} // namespace

OracleLevels
oracle_levels_conc(const PiecewiseDensity& f, std::size_t n, int j_max, double Delta)
{
  return levels_from([&](int j, std::uint64_t k) { return delta_conc(f, j, k); },
                     n, j_max, Delta, DeltaVariant::Concentration);
}

OracleLevels
oracle_levels_holder(const HolderProfile& profile, const HolderConstants& constants,
                     std::size_t n, int j_max, double Delta)
{
  return levels_from(
    [&](int j, std::uint64_t k) {
      const double t = profile.min_exponent(left_end(j, k), right_end(j, k));
      return delta_daub(constants, t, j);
    },
    n, j_max, Delta, DeltaVariant::Holder);
}

double
compute_U(const PiecewiseDensity& f, const OracleLevels& oracle)
{
  if (!(f.delta() > 0.0))
    throw ConfigError("compute_U requires a density bounded below by delta > 0");
  double U = 0.0;
  const int j_max = oracle.j_max;
  for (std::size_t m = 0; m < oracle.jstar.size(); ++m) {
    const int j = oracle.jstar[m];
    const std::uint64_t k = m >> (j_max - j);
    const double proj = local_projection(f, j, k);
    const ValueRange r = f.range(left_end(j, k), right_end(j, k));
    U = std::max({ U, std::fabs(std::log(r.hi / proj)),
                   std::fabs(std::log(r.lo / proj)) });
  }
  return U;
}

} // namespace dyadapt
