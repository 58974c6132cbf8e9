#include "dyadapt/lepski.hpp"

#include "dyadapt/errors.hpp"

#include <stdexcept>
#include <string>

namespace dyadapt {

Threshold::Threshold(double zeta)
  : zeta_(zeta)
{
  if (!(zeta >= 0.0))
    throw ConfigError("threshold must be non-negative");
}

int
select_on_chain(const ChainEstimates& chain, double n, int start, double zeta)
{
  const int j_max = chain.j_max();
  for (int j = start; j < j_max; ++j) {
    const double coarse = chain.at(j);
    bool admissible = true;
    for (int jf = j + 1; jf <= j_max; ++jf) {
      if (!pair_test_passes(n, jf, chain.at(jf), coarse, zeta)) {
        admissible = false;
        break;
      }
    }
    if (admissible)
      return j;
  }
  return j_max;
}

namespace {

void
check_selector_args(const CountsPyramid& p, int start)
{
  if (p.n() <= 1)
    throw ConfigError("the selector needs a sample of size n > 1");
  if (start < 0 || start > p.j_max()) {
    throw ConfigError("start level " + std::to_string(start) +
                      " outside [0, j_max]");
  }
}

} // namespace

int
lepski_select(const CountsPyramid& p, int start, std::uint64_t m, Threshold zeta)
{
  check_selector_args(p, start);
  std::vector<double> chain(p.j_max() + 1);
  p.chain_estimates(m, chain);
  return select_on_chain({ 0, chain }, static_cast<double>(p.n()), start,
                         zeta.zeta());
}

SelectionMap
select_all(const CountsPyramid& p, int start, Threshold zeta, Parallelism par)
{
  check_selector_args(p, start);
  SelectionMap out{ start, p.j_max(), std::vector<int>(p.finest_bins()) };
  const double n = static_cast<double>(p.n());
  const std::size_t bins = p.finest_bins();
  constexpr std::size_t block = 1024;
  const std::size_t blocks = (bins + block - 1) / block;

  parallel_for(blocks, par, [&](std::size_t b) {
    std::vector<double> chain(p.j_max() + 1);
    const std::size_t end = std::min(bins, (b + 1) * block);
    for (std::size_t m = b * block; m < end; ++m) {
      p.chain_estimates(m, chain);
      out.jhat[m] = select_on_chain({ 0, chain }, n, start, zeta.zeta());
    }
  });
  return out;
}

std::vector<double>
selected_values(const CountsPyramid& p, const SelectionMap& selection)
{
  if (selection.jhat.size() != p.finest_bins())
    throw std::invalid_argument("selection map does not match the pyramid");
  std::vector<double> out(selection.jhat.size());
  for (std::size_t m = 0; m < out.size(); ++m) {
    const int j = selection.jhat[m];
    out[m] = p.estimate(j, m >> (p.j_max() - j));
  }
  return out;
}

std::vector<double>
adaptive_estimate(const CountsPyramid& p, int start, Threshold zeta,
                  Parallelism par)
{
  return selected_values(p, select_all(p, start, zeta, par));
}

double
adaptive_estimate_at(const CountsPyramid& p, int start, Threshold zeta, double x)
{
  const std::uint64_t m = bin_index(x, p.j_max());
  const int j = lepski_select(p, start, m, zeta);
  return p.estimate(j, m >> (p.j_max() - j));
}

} // namespace dyadapt
