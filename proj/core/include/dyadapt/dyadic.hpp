#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dyadapt {

//! Deepest level supported by the 64-bit bin index arithmetic.
inline constexpr int max_supported_level = 62;

//! The dyadic interval I_{j,k} = (k 2^-j, (k+1) 2^-j] of (0,1].
struct DyadicInterval
{
  int level = 0;
  std::uint64_t index = 0;

  double left() const noexcept;
  double right() const noexcept;
  double width() const noexcept;

  DyadicInterval parent() const;
  DyadicInterval left_child() const noexcept { return { level + 1, 2 * index }; }
  DyadicInterval right_child() const noexcept
  {
    return { level + 1, 2 * index + 1 };
  }
  //! The level-j interval containing this one (j <= level).
  DyadicInterval ancestor(int j) const;
  bool contains(const DyadicInterval& other) const noexcept;
  bool contains(double x) const noexcept;

  friend bool operator==(const DyadicInterval&, const DyadicInterval&) = default;
};

//! Index k of the unique level-j interval containing x; throws
//! std::domain_error unless 0 < x <= 1.
std::uint64_t bin_index(double x, int level);

//! Checks 2^-j_max >= d (log n)^2 / n. Always true for n < 2 or d <= 0.
bool resolution_admissible(std::size_t n, int j_max, double d) noexcept;

//! Largest j_max satisfying the resolution constraint; throws ConfigError
//! when n < 2 or when even level 0 is inadmissible.
int default_j_max(std::size_t n, double d = 1.0);

//! Per-level dyadic bin counts N_{j,k} of a sample on (0,1], j = 0..j_max.
//! Immutable after construction.
class CountsPyramid
{
public:
  //! Counts `sample` at every level. Points outside (0,1] (and NaN) are
  //! dropped and reported by dropped(); n() is still the full sample size.
  //! Throws ConfigError if j_max violates the resolution constraint for d.
  CountsPyramid(std::span<const double> sample, int j_max, double d = 1.0);

  //! Builds from finest-level counts; n must be at least their sum.
  static CountsPyramid from_finest_counts(std::size_t n,
                                          int j_max,
                                          std::span<const std::uint64_t> finest,
                                          double d = 1.0);

  std::size_t n() const noexcept { return n_; }
  int j_max() const noexcept { return j_max_; }
  double d() const noexcept { return d_; }
  std::size_t dropped() const noexcept { return dropped_; }
  std::size_t finest_bins() const noexcept { return std::size_t{ 1 } << j_max_; }

  std::uint64_t count(int level, std::uint64_t k) const;
  std::span<const std::uint64_t> level_counts(int level) const;

  //! Linear estimate f_n(j,x) = 2^j N_{j,k} / n for x in I_{j,k}.
  double estimate(int level, std::uint64_t k) const;

  //! f_n(j, x) for x in finest bin m, for j = 0..j_max (the ancestor chain).
  void chain_estimates(std::uint64_t m, std::span<double> out) const;

private:
  CountsPyramid(std::size_t n, int j_max, double d);
  void aggregate();
  static std::size_t offset(int level) noexcept
  {
    return (std::size_t{ 1 } << level) - 1;
  }

  std::size_t n_ = 0;
  int j_max_ = 0;
  double d_ = 1.0;
  std::size_t dropped_ = 0;
  // level j occupies [2^j - 1, 2^{j+1} - 1)
  std::vector<std::uint64_t> counts_;
};

inline CountsPyramid
build_pyramid(std::span<const double> sample, int j_max, double d = 1.0)
{
  return CountsPyramid(sample, j_max, d);
}

inline double
linear_estimate(const CountsPyramid& p, int level, std::uint64_t k)
{
  return p.estimate(level, k);
}

//! f_n(j,x) from a raw count: 2^j N / n (0 when N = 0).
inline double
histogram_value(std::uint64_t count, int level, double n) noexcept
{
  if (count == 0)
    return 0.0;
  return std::ldexp(static_cast<double>(count), level) / n;
}

} // namespace dyadapt
