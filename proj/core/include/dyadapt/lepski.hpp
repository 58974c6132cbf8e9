#pragma once

#include "dyadapt/dyadic.hpp"
#include "dyadapt/parallel.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace dyadapt {

//! The threshold zeta_n of the local test. Non-negative; +inf allowed.
class Threshold
{
public:
  explicit Threshold(double zeta);
  double zeta() const noexcept { return zeta_; }

private:
  double zeta_;
};

//! 1 / s_n(j,x): 1/sqrt(f) for f > 0 and 0 otherwise.
inline double
inverse_scale(double f) noexcept
{
  return f > 0.0 ? 1.0 / std::sqrt(f) : 0.0;
}

//! One pairwise test of the selector:
//!   sqrt(n 2^-j') |f_n(j',x) - f_n(j,x)| <= zeta sqrt(f_n(j,x)),
//! with the coarse-level estimate on the right. When f_n(j,x) = 0 the
//! right-hand side is 0 (never inf * 0).
inline bool
pair_test_passes(double n, int fine_level, double fine, double coarse,
                 double zeta) noexcept
{
  const double lhs = std::sqrt(std::ldexp(n, -fine_level)) * std::fabs(fine - coarse);
  const double rhs = coarse > 0.0 ? zeta * std::sqrt(coarse) : 0.0;
  return lhs <= rhs;
}

//! sqrt(n 2^-j / log n) |f_hat - f_lin| / s_n(j,x). Requires n > 1.
inline double
normalized_deviation(double n, int level, double f_hat, double f_lin) noexcept
{
  return std::sqrt(std::ldexp(n, -level) / std::log(n)) *
         std::fabs(f_hat - f_lin) * inverse_scale(f_lin);
}

//! Linear estimates along one ancestor chain: values[i] is f_n at level
//! first_level + i, the last entry being level j_max.
struct ChainEstimates
{
  int first_level = 0;
  std::span<const double> values;

  int j_max() const noexcept
  {
    return first_level + static_cast<int>(values.size()) - 1;
  }
  double at(int level) const noexcept { return values[level - first_level]; }
};

//! Minimal j in [start, j_max] passing every test against finer levels of
//! the chain (j_max passes vacuously).
int select_on_chain(const ChainEstimates& chain, double n, int start, double zeta);

//! Chosen level j_hat_n(J, x) for every finest bin.
struct SelectionMap
{
  int start_level = 0;
  int j_max = 0;
  std::vector<int> jhat;

  int at(std::uint64_t m) const { return jhat.at(m); }
};

//! j_hat_n(J, x) for x in finest bin m. Throws ConfigError for n <= 1 or
//! J > j_max, std::out_of_range for a bad m.
int lepski_select(const CountsPyramid& p, int start, std::uint64_t m,
                  Threshold zeta);

SelectionMap select_all(const CountsPyramid& p, int start, Threshold zeta,
                        Parallelism par = { 1 });

//! The selected estimate f_n(j_hat[m], x) on each finest bin.
std::vector<double> selected_values(const CountsPyramid& p,
                                    const SelectionMap& selection);

//! f_hat_n(J, .) as a step function on the finest bins.
std::vector<double> adaptive_estimate(const CountsPyramid& p, int start,
                                      Threshold zeta, Parallelism par = { 1 });

//! Point query: f_hat_n(J, x) for 0 < x <= 1.
double adaptive_estimate_at(const CountsPyramid& p, int start, Threshold zeta,
                            double x);

} // namespace dyadapt
