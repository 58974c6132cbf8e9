#include "dyadapt/calibration.hpp"

#include "dyadapt/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>
#include <string>

namespace dyadapt {

namespace {

// Replicates are summed in fixed blocks so that aggregation order does not
// depend on the number of workers.
constexpr std::size_t replicate_block = 4096;

std::size_t
level_slot(const CalibrationConfig& config, int level)
{
  const auto it =
    std::find(config.level_grid.begin(), config.level_grid.end(), level);
  if (it == config.level_grid.end()) {
    throw ConfigError("level " + std::to_string(level) +
                      " is not on the calibration grid");
  }
  return static_cast<std::size_t>(it - config.level_grid.begin());
}

struct PartialSums
{
  std::vector<double> t2;
  std::vector<double> t4;
};

// Per-chain evaluation of T for every grid threshold. For each level j the
// pairwise tests pass for all thresholds from first_pass[j] on (the tests are
// monotone in zeta), so j_hat(j', zeta_i) = min{ j >= j' : first_pass[j] <= i }
// and T is piecewise constant in i with breakpoints among first_pass.
class ChainEvaluator
{
public:
  ChainEvaluator(std::size_t n, int base, int j_max,
                 std::span<const double> zeta_grid)
    : n_(static_cast<double>(n))
    , base_(base)
    , j_max_(j_max)
    , zetas_(zeta_grid)
    , f_(j_max - base + 1)
    , first_pass_(j_max - base + 1)
  {
  }

  // Adds T^2 and T^4 for every threshold index into the sums.
  void accumulate(const ChainCounts& chain, PartialSums& sums)
  {
    const std::size_t grid = zetas_.size();
    for (int j = base_; j <= j_max_; ++j)
      f_[j - base_] = histogram_value(chain.at(j), j, n_);
    const ChainEstimates est{ base_, f_ };

    std::size_t cutoff = 0;
    for (int j = base_; j <= j_max_; ++j) {
      first_pass_[j - base_] = first_passing_index(est, j);
      cutoff = std::max(cutoff, first_pass_[j - base_]);
    }
    cutoff = std::min(cutoff, grid);

    std::size_t i = 0;
    while (i < cutoff) {
      // next breakpoint after i
      std::size_t next = cutoff;
      for (auto fp : first_pass_) {
        if (fp > i && fp < next)
          next = fp;
      }
      const double t = statistic_at(est, i);
      if (t != 0.0) {
        const double t2 = t * t;
        for (std::size_t q = i; q < next; ++q) {
          sums.t2[q] += t2;
          sums.t4[q] += t2 * t2;
        }
      }
      i = next;
    }
  }

private:
  std::size_t first_passing_index(const ChainEstimates& est, int j) const
  {
    if (j == j_max_)
      return 0;
    auto passes = [&](double zeta) {
      const double coarse = est.at(j);
      for (int jf = j + 1; jf <= j_max_; ++jf) {
        if (!pair_test_passes(n_, jf, est.at(jf), coarse, zeta))
          return false;
      }
      return true;
    };
    std::size_t lo = 0;
    std::size_t hi = zetas_.size();
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (passes(zetas_[mid]))
        hi = mid;
      else
        lo = mid + 1;
    }
    return lo;
  }

  double statistic_at(const ChainEstimates& est, std::size_t i) const
  {
    double t = 0.0;
    for (int start = base_; start <= j_max_; ++start) {
      int sel = start;
      while (first_pass_[sel - base_] > i)
        ++sel;
      t = std::max(t, normalized_deviation(n_, start, est.at(sel), est.at(start)));
    }
    return t;
  }

  double n_;
  int base_;
  int j_max_;
  std::span<const double> zetas_;
  std::vector<double> f_;
  std::vector<std::size_t> first_pass_;
};

PartialSums
run_block(const CalibrationConfig& config, int level, std::size_t p_index,
          std::span<const double> zetas, std::size_t block)
{
  const double p = config.p_grid[level_slot(config, level)][p_index];
  PartialSums sums{ std::vector<double>(zetas.size(), 0.0),
                    std::vector<double>(zetas.size(), 0.0) };
  ChainEvaluator eval(config.n, level, config.j_max, zetas);
  const std::size_t end = std::min(config.reps, (block + 1) * replicate_block);
  for (std::size_t r = block * replicate_block; r < end; ++r) {
    Substream rng(config.seed, { static_cast<std::uint64_t>(level), p_index, r });
    const ChainCounts chain = simulate_chain(config.n, p, level, config.j_max, rng);
    eval.accumulate(chain, sums);
  }
  return sums;
}

std::vector<LhsEstimate>
finish(const std::vector<PartialSums>& blocks, std::size_t grid, std::size_t reps)
{
  std::vector<LhsEstimate> out(grid);
  const double r = static_cast<double>(reps);
  for (std::size_t q = 0; q < grid; ++q) {
    double s2 = 0.0;
    double s4 = 0.0;
    for (const auto& b : blocks) {
      s2 += b.t2[q];
      s4 += b.t4[q];
    }
    const double mean = s2 / r;
    double se = 0.0;
    if (reps > 1) {
      const double var = std::max(0.0, (s4 - r * mean * mean) / (r - 1.0));
      se = std::sqrt(var / r);
    }
    out[q] = { mean, se };
  }
  return out;
}

std::size_t
block_count(std::size_t reps)
{
  return (reps + replicate_block - 1) / replicate_block;
}

} // namespace

void
CalibrationConfig::validate() const
{
  if (n < 2)
    throw ConfigError("calibration: n must exceed 1");
  if (j_max < 0 || j_max > max_supported_level)
    throw ConfigError("calibration: j_max out of range");
  if (!resolution_admissible(n, j_max, d))
    throw ConfigError("calibration: j_max violates 2^-j_max >= d (log n)^2 / n");
  if (!(alpha > 0.0))
    throw ConfigError("calibration: alpha must be positive");
  if (!(delta > 0.0) || !(M >= delta))
    throw ConfigError("calibration: need 0 < delta <= M");
  if (reps < 1)
    throw ConfigError("calibration: reps must be at least 1");
  if (level_grid.empty() || level_grid.size() != p_grid.size())
    throw ConfigError("calibration: level and p grids must be non-empty and parallel");
  for (std::size_t i = 0; i < level_grid.size(); ++i) {
    if (level_grid[i] < 0 || level_grid[i] > j_max)
      throw ConfigError("calibration: grid level outside [0, j_max]");
    if (std::count(level_grid.begin(), level_grid.end(), level_grid[i]) > 1)
      throw ConfigError("calibration: duplicate grid level");
    if (p_grid[i].empty())
      throw ConfigError("calibration: empty p grid");
    for (double p : p_grid[i]) {
      if (!(p > 0.0 && p <= 1.0))
        throw ConfigError("calibration: every p must lie in (0, 1]");
    }
  }
  if (zeta_grid.empty())
    throw ConfigError("calibration: zeta grid is empty");
  for (std::size_t i = 0; i < zeta_grid.size(); ++i) {
    if (!(zeta_grid[i] >= 0.0))
      throw ConfigError("calibration: thresholds must be non-negative");
    if (i > 0 && !(zeta_grid[i] > zeta_grid[i - 1]))
      throw ConfigError("calibration: zeta grid must be strictly ascending");
  }
}

double
CalibrationConfig::bound() const
{
  return alpha / std::ldexp(static_cast<double>(n), 2 * j_max);
}

std::vector<double>
default_p_grid(int level, double delta, double M, std::size_t points)
{
  if (!(delta > 0.0) || !(M >= delta))
    throw ConfigError("p grid: need 0 < delta <= M");
  if (points == 0)
    throw ConfigError("p grid: need at least one point");
  const double lo = std::min(1.0, std::ldexp(delta, -level));
  const double hi = std::min(1.0, std::ldexp(M, -level));
  if (points == 1 || lo == hi)
    return { hi };
  std::vector<double> grid(points);
  const double ratio = std::log(hi / lo);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = lo * std::exp(ratio * static_cast<double>(i) /
                            static_cast<double>(points - 1));
  }
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

std::vector<double>
default_zeta_grid(std::size_t n, double kappa_min, double kappa_max,
                  std::size_t points)
{
  if (n < 2)
    throw ConfigError("zeta grid: n must exceed 1");
  if (points == 0 || !(kappa_min >= 0.0) || !(kappa_max >= kappa_min) ||
      (points > 1 && !(kappa_max > kappa_min))) {
    throw ConfigError("zeta grid: need 0 <= kappa_min < kappa_max and points >= 1");
  }
  const double scale = std::sqrt(std::log(static_cast<double>(n)));
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double t =
      points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
    grid[i] = (kappa_min + t * (kappa_max - kappa_min)) * scale;
  }
  return grid;
}

CalibrationConfig
make_calibration_config(std::size_t n, int j_max, const CalibrationDefaults& opts)
{
  CalibrationConfig c;
  c.n = n;
  c.j_max = j_max;
  c.alpha = opts.alpha;
  c.d = opts.d;
  c.delta = opts.delta;
  c.M = opts.M;
  c.reps = opts.reps;
  c.seed = opts.seed;
  for (int j = 0; j <= j_max; ++j) {
    c.level_grid.push_back(j);
    c.p_grid.push_back(default_p_grid(j, opts.delta, opts.M, opts.p_points));
  }
  c.zeta_grid =
    default_zeta_grid(n, opts.kappa_min, opts.kappa_max, opts.zeta_points);
  c.validate();
  return c;
}

ChainCounts
simulate_chain(std::size_t n, double p, int base_level, int j_max, Substream& rng)
{
  if (!(p >= 0.0 && p <= 1.0))
    throw ConfigError("simulate_chain: p must lie in [0, 1]");
  if (base_level < 0 || base_level > j_max)
    throw ConfigError("simulate_chain: need 0 <= base level <= j_max");
  ChainCounts chain{ base_level, std::vector<std::uint64_t>(j_max - base_level + 1) };
  using Binomial = std::binomial_distribution<std::int64_t>;
  std::int64_t v = Binomial(static_cast<std::int64_t>(n), p)(rng);
  chain.counts[0] = static_cast<std::uint64_t>(v);
  for (std::size_t i = 1; i < chain.counts.size(); ++i) {
    v = v == 0 ? 0 : Binomial(v, 0.5)(rng);
    chain.counts[i] = static_cast<std::uint64_t>(v);
  }
  return chain;
}

ChainCounts
chain_from_pyramid(const CountsPyramid& p, int base_level, std::uint64_t m)
{
  if (base_level < 0 || base_level > p.j_max())
    throw ConfigError("chain_from_pyramid: base level outside [0, j_max]");
  ChainCounts chain{ base_level, {} };
  for (int j = base_level; j <= p.j_max(); ++j)
    chain.counts.push_back(p.count(j, m >> (p.j_max() - j)));
  return chain;
}

double
propagation_statistic(const ChainCounts& chain, Threshold zeta, std::size_t n)
{
  if (n < 2)
    throw ConfigError("propagation_statistic: n must exceed 1");
  const double nn = static_cast<double>(n);
  const int base = chain.base_level;
  const int j_max = chain.j_max();
  std::vector<double> f(chain.counts.size());
  for (int j = base; j <= j_max; ++j)
    f[j - base] = histogram_value(chain.at(j), j, nn);
  const ChainEstimates est{ base, f };
  double t = 0.0;
  for (int start = base; start <= j_max; ++start) {
    const int sel = select_on_chain(est, nn, start, zeta.zeta());
    t = std::max(t, normalized_deviation(nn, start, est.at(sel), est.at(start)));
  }
  return t;
}

std::vector<LhsEstimate>
estimate_lhs_curve(const CalibrationConfig& config, int level, std::size_t p_index,
                   Parallelism par)
{
  config.validate();
  const std::size_t slot = level_slot(config, level);
  if (p_index >= config.p_grid[slot].size())
    throw ConfigError("estimate_lhs: p index outside the grid");
  const std::size_t blocks = block_count(config.reps);
  std::vector<PartialSums> partial(blocks);
  parallel_for(blocks, par, [&](std::size_t b) {
    partial[b] = run_block(config, level, p_index, config.zeta_grid, b);
  });
  return finish(partial, config.zeta_grid.size(), config.reps);
}

LhsEstimate
estimate_lhs(const CalibrationConfig& config, int level, std::size_t p_index,
             double zeta, Parallelism par)
{
  CalibrationConfig single = config;
  single.zeta_grid = { zeta };
  return estimate_lhs_curve(single, level, p_index, par).front();
}

ThresholdRecord
calibrate(const CalibrationConfig& config, Parallelism par)
{
  config.validate();
  struct Point
  {
    int level;
    std::size_t p_index;
    double p;
  };
  std::vector<Point> points;
  for (std::size_t s = 0; s < config.level_grid.size(); ++s) {
    for (std::size_t i = 0; i < config.p_grid[s].size(); ++i)
      points.push_back({ config.level_grid[s], i, config.p_grid[s][i] });
  }

  const std::size_t blocks = block_count(config.reps);
  const std::size_t grid = config.zeta_grid.size();
  std::vector<PartialSums> partial(points.size() * blocks);
  parallel_for(partial.size(), par, [&](std::size_t item) {
    const Point& pt = points[item / blocks];
    partial[item] =
      run_block(config, pt.level, pt.p_index, config.zeta_grid, item % blocks);
  });

  std::vector<std::vector<LhsEstimate>> curves;
  curves.reserve(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    std::vector<PartialSums> mine(partial.begin() + k * blocks,
                                  partial.begin() + (k + 1) * blocks);
    curves.push_back(finish(mine, grid, config.reps));
  }

  const double bound = config.bound();
  for (std::size_t q = 0; q < grid; ++q) {
    bool ok = true;
    for (const auto& curve : curves) {
      if (!(curve[q].mean + curve[q].std_error <= bound)) {
        ok = false;
        break;
      }
    }
    if (!ok)
      continue;
    ThresholdRecord rec;
    rec.zeta_n = config.zeta_grid[q];
    rec.zeta_index = q;
    rec.config = config;
    rec.bound = bound;
    for (std::size_t k = 0; k < points.size(); ++k) {
      rec.achieved.push_back(
        { points[k].level, points[k].p_index, points[k].p, curves[k][q] });
    }
    return rec;
  }

  double worst = 0.0;
  for (const auto& curve : curves)
    worst = std::max(worst, curve.back().mean + curve.back().std_error);
  std::ostringstream msg;
  msg << "calibration infeasible: at the largest threshold " << config.zeta_grid.back()
      << " the worst grid point has E[T^2] + se = " << worst << " > bound " << bound
      << " (enlarge the zeta grid or the replicate count)";
  throw CalibrationInfeasible(msg.str());
}

} // namespace dyadapt
