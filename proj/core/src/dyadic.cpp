#include "dyadapt/dyadic.hpp"

#include "dyadapt/errors.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dyadapt {

namespace {

void
check_level(int level)
{
  if (level < 0 || level > max_supported_level) {
    throw ConfigError("dyadic level " + std::to_string(level) +
                      " outside [0, " + std::to_string(max_supported_level) +
                      "]");
  }
}

} // namespace

double
DyadicInterval::left() const noexcept
{
  return std::ldexp(static_cast<double>(index), -level);
}

double
DyadicInterval::right() const noexcept
{
  return std::ldexp(static_cast<double>(index + 1), -level);
}

double
DyadicInterval::width() const noexcept
{
  return std::ldexp(1.0, -level);
}

DyadicInterval
DyadicInterval::parent() const
{
  if (level == 0)
    throw std::domain_error("the level-0 interval has no parent");
  return { level - 1, index / 2 };
}

DyadicInterval
DyadicInterval::ancestor(int j) const
{
  if (j < 0 || j > level)
    throw std::domain_error("ancestor level must lie in [0, level]");
  return { j, index >> (level - j) };
}

bool
DyadicInterval::contains(const DyadicInterval& other) const noexcept
{
  return other.level >= level && (other.index >> (other.level - level)) == index;
}

bool
DyadicInterval::contains(double x) const noexcept
{
  return x > left() && x <= right();
}

std::uint64_t
bin_index(double x, int level)
{
  if (!(x > 0.0 && x <= 1.0))
    throw std::domain_error("bin_index: x must lie in (0, 1]");
  check_level(level);
  // scaling by 2^j is exact, so ceil() sees dyadic endpoints exactly and
  // they land in the interval on their left
  const double scaled = std::ldexp(x, level);
  const auto k = static_cast<std::uint64_t>(std::ceil(scaled));
  return k == 0 ? 0 : k - 1;
}

bool
resolution_admissible(std::size_t n, int j_max, double d) noexcept
{
  if (n < 2 || d <= 0.0)
    return true;
  const double nn = static_cast<double>(n);
  const double log_n = std::log(nn);
  return std::ldexp(1.0, -j_max) >= d * log_n * log_n / nn;
}

int
default_j_max(std::size_t n, double d)
{
  if (n < 2)
    throw ConfigError("default_j_max: sample size must exceed 1");
  if (!(d > 0.0))
    throw ConfigError("default_j_max: d must be positive");
  if (!resolution_admissible(n, 0, d)) {
    throw ConfigError("no admissible resolution level: d (log n)^2 / n > 1");
  }
  int j = 0;
  while (j < max_supported_level && resolution_admissible(n, j + 1, d))
    ++j;
  return j;
}

CountsPyramid::CountsPyramid(std::size_t n, int j_max, double d)
  : n_(n)
  , j_max_(j_max)
  , d_(d)
{
  check_level(j_max);
  if (!resolution_admissible(n, j_max, d)) {
    throw ConfigError("j_max = " + std::to_string(j_max) +
                      " violates 2^-j_max >= d (log n)^2 / n for n = " +
                      std::to_string(n) + ", d = " + std::to_string(d));
  }
  counts_.assign(offset(j_max + 1), 0);
}

CountsPyramid::CountsPyramid(std::span<const double> sample, int j_max, double d)
  : CountsPyramid(sample.size(), j_max, d)
{
  auto* finest = counts_.data() + offset(j_max_);
  for (double x : sample) {
    if (!(x > 0.0 && x <= 1.0)) {
      ++dropped_;
      continue;
    }
    ++finest[bin_index(x, j_max_)];
  }
  aggregate();
}

CountsPyramid
CountsPyramid::from_finest_counts(std::size_t n,
                                  int j_max,
                                  std::span<const std::uint64_t> finest,
                                  double d)
{
  CountsPyramid p(n, j_max, d);
  if (finest.size() != p.finest_bins())
    throw ConfigError("finest count array must have 2^j_max entries");
  std::uint64_t total = 0;
  for (std::size_t m = 0; m < finest.size(); ++m) {
    p.counts_[offset(j_max) + m] = finest[m];
    total += finest[m];
  }
  if (total > n)
    throw ConfigError("finest counts sum to more than n");
  p.dropped_ = n - total;
  p.aggregate();
  return p;
}

void
CountsPyramid::aggregate()
{
  for (int j = j_max_ - 1; j >= 0; --j) {
    auto* coarse = counts_.data() + offset(j);
    const auto* fine = counts_.data() + offset(j + 1);
    const std::size_t bins = std::size_t{ 1 } << j;
    for (std::size_t k = 0; k < bins; ++k)
      coarse[k] = fine[2 * k] + fine[2 * k + 1];
  }
}

std::uint64_t
CountsPyramid::count(int level, std::uint64_t k) const
{
  if (level < 0 || level > j_max_)
    throw std::out_of_range("pyramid level out of range");
  if (k >= (std::uint64_t{ 1 } << level))
    throw std::out_of_range("pyramid bin index out of range");
  return counts_[offset(level) + k];
}

std::span<const std::uint64_t>
CountsPyramid::level_counts(int level) const
{
  if (level < 0 || level > j_max_)
    throw std::out_of_range("pyramid level out of range");
  return { counts_.data() + offset(level), std::size_t{ 1 } << level };
}

double
CountsPyramid::estimate(int level, std::uint64_t k) const
{
  return histogram_value(count(level, k), level, static_cast<double>(n_));
}

void
CountsPyramid::chain_estimates(std::uint64_t m, std::span<double> out) const
{
  if (out.size() != static_cast<std::size_t>(j_max_) + 1)
    throw std::invalid_argument("chain buffer must hold j_max + 1 values");
  if (m >= finest_bins())
    throw std::out_of_range("finest bin index out of range");
  const double nn = static_cast<double>(n_);
  for (int j = 0; j <= j_max_; ++j) {
    out[j] = histogram_value(counts_[offset(j) + (m >> (j_max_ - j))], j, nn);
  }
}

} // namespace dyadapt
