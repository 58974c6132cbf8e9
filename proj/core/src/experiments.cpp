#include "dyadapt/experiments.hpp"

#include "dyadapt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace dyadapt {

namespace {

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

double
sup_abs_deviation(double value, const ValueRange& r) noexcept
{
  return std::max(std::fabs(value - r.lo), std::fabs(value - r.hi));
}

double
oracle_weight(double n, int level) noexcept
{
  return std::sqrt(std::ldexp(n, -level) / std::log(n));
}

void
check_matching(const CountsPyramid& p, const SelectionMap& selection)
{
  if (selection.jhat.size() != p.finest_bins() || selection.j_max != p.j_max())
    throw ConfigError("selection map does not match the pyramid");
}

void
check_matching(const CountsPyramid& p, const OracleLevels& oracle)
{
  if (oracle.j_max != p.j_max() || oracle.jstar.size() != p.finest_bins())
    throw ConfigError("oracle levels do not match the pyramid resolution");
}

// One (t, range of f0) pair per profile piece meeting a finest bin.
struct HolderCell
{
  double weight;
  ValueRange range;
};

// Everything about a study that depends on n but not on the replicate.
struct StudyContext
{
  std::size_t n = 0;
  int j_max = 0;
  double zeta = 0.0;
  OracleLevels oracle;
  double U = 0.0;
  std::vector<ValueRange> bin_range;
  std::vector<std::vector<HolderCell>> holder_cells;
  std::vector<double> probe_values;
  std::vector<std::uint64_t> probe_bins;
};

StudyContext
make_context(const StudyConfig& config, std::size_t n)
{
  StudyContext ctx;
  ctx.n = n;
  ctx.j_max = default_j_max(n, config.d);
  ctx.zeta = config.thresholds.zeta_for(n);
  ctx.oracle = oracle_levels_conc(config.density, n, ctx.j_max, config.Delta);
  ctx.U = compute_U(config.density, ctx.oracle);
  const std::uint64_t bins = std::uint64_t{ 1 } << ctx.j_max;
  ctx.bin_range.resize(bins);
  for (std::uint64_t m = 0; m < bins; ++m)
    ctx.bin_range[m] = config.density.range(left_end(ctx.j_max, m),
                                            right_end(ctx.j_max, m));
  if (config.profile) {
    const double nn = static_cast<double>(n);
    const double base = nn / std::log(nn);
    ctx.holder_cells.resize(bins);
    for (std::uint64_t m = 0; m < bins; ++m) {
      for (const auto& piece : config.profile->overlapping(
             left_end(ctx.j_max, m), right_end(ctx.j_max, m))) {
        ctx.holder_cells[m].push_back(
          { std::pow(base, piece.t / (2.0 * piece.t + 1.0)),
            config.density.range(piece.a, piece.b) });
      }
    }
  }
  for (double x : config.probes) {
    ctx.probe_values.push_back(config.density.eval(x));
    ctx.probe_bins.push_back(bin_index(x, ctx.j_max));
  }
  return ctx;
}

double
sup_risk_from_ranges(const CountsPyramid& p, std::span<const double> fhat,
                     const OracleLevels& oracle, std::span<const ValueRange> ranges)
{
  const double n = static_cast<double>(p.n());
  double out = 0.0;
  for (std::size_t m = 0; m < fhat.size(); ++m) {
    out = std::max(out, oracle_weight(n, oracle.jstar[m]) *
                          sup_abs_deviation(fhat[m], ranges[m]));
  }
  return out;
}

double
holder_risk_from_cells(std::span<const double> fhat,
                       const std::vector<std::vector<HolderCell>>& cells)
{
  double out = 0.0;
  for (std::size_t m = 0; m < fhat.size(); ++m) {
    for (const auto& c : cells[m])
      out = std::max(out, c.weight * sup_abs_deviation(fhat[m], c.range));
  }
  return out;
}

} // namespace

OracleDiscrepancy
oracle_discrepancy(const CountsPyramid& p, const SelectionMap& selection,
                   const OracleLevels& oracle)
{
  check_matching(p, selection);
  check_matching(p, oracle);
  if (p.n() < 2)
    throw ConfigError("oracle_discrepancy: n must exceed 1");
  const double n = static_cast<double>(p.n());
  const int j_max = p.j_max();
  OracleDiscrepancy out;
  for (std::size_t m = 0; m < selection.jhat.size(); ++m) {
    const int jh = selection.jhat[m];
    const int js = oracle.jstar[m];
    const double f_hat = p.estimate(jh, m >> (j_max - jh));
    const double f_star = p.estimate(js, m >> (j_max - js));
    const double term = normalized_deviation(n, js, f_hat, f_star);
    if (jh < js) {
      ++out.bins_below_oracle;
      out.below_oracle = std::max(out.below_oracle, term);
    } else {
      out.at_or_above_oracle = std::max(out.at_or_above_oracle, term);
    }
  }
  out.value = std::max(out.below_oracle, out.at_or_above_oracle);
  return out;
}

OracleDiscrepancy
oracle_discrepancy(const CountsPyramid& p, Threshold zeta, const OracleLevels& oracle)
{
  return oracle_discrepancy(p, select_all(p, 0, zeta), oracle);
}

double
oracle_bound(double zeta, std::size_t n, double alpha, double Delta, double U)
{
  const double nn = static_cast<double>(n);
  return zeta / std::sqrt(std::log(nn)) +
         std::sqrt(alpha / nn) * std::pow(nn, Delta * std::exp(4.0 * U));
}

double
adaptive_sup_risk(const CountsPyramid& p, const SelectionMap& selection,
                  const OracleLevels& oracle, const PiecewiseDensity& f0)
{
  check_matching(p, selection);
  check_matching(p, oracle);
  const auto fhat = selected_values(p, selection);
  std::vector<ValueRange> ranges(fhat.size());
  for (std::uint64_t m = 0; m < ranges.size(); ++m)
    ranges[m] = f0.range(left_end(p.j_max(), m), right_end(p.j_max(), m));
  return sup_risk_from_ranges(p, fhat, oracle, ranges);
}

double
adaptive_sup_risk(const CountsPyramid& p, Threshold zeta, const OracleLevels& oracle,
                  const PiecewiseDensity& f0)
{
  return adaptive_sup_risk(p, select_all(p, 0, zeta), oracle, f0);
}

double
holder_sup_risk(const CountsPyramid& p, const SelectionMap& selection,
                const HolderProfile& profile, const PiecewiseDensity& f0)
{
  check_matching(p, selection);
  const double n = static_cast<double>(p.n());
  const double base = n / std::log(n);
  const auto fhat = selected_values(p, selection);
  double out = 0.0;
  for (std::uint64_t m = 0; m < fhat.size(); ++m) {
    for (const auto& piece :
         profile.overlapping(left_end(p.j_max(), m), right_end(p.j_max(), m))) {
      const double w = std::pow(base, piece.t / (2.0 * piece.t + 1.0));
      out = std::max(out, w * sup_abs_deviation(fhat[m], f0.range(piece.a, piece.b)));
    }
  }
  return out;
}

double
pointwise_error(const CountsPyramid& p, const SelectionMap& selection,
                const PiecewiseDensity& f0, double x)
{
  check_matching(p, selection);
  const std::uint64_t m = bin_index(x, p.j_max());
  const int j = selection.jhat[m];
  return std::fabs(p.estimate(j, m >> (p.j_max() - j)) - f0.eval(x));
}

double
uniform_deviation_statistic(const CountsPyramid& p, const PiecewiseDensity& f0,
                            const DyadicInterval& interval)
{
  if (interval.level < 0 || interval.level > p.j_max() ||
      interval.index >= (std::uint64_t{ 1 } << interval.level)) {
    throw ConfigError("uniform_deviation_statistic: interval outside the pyramid");
  }
  const double n = static_cast<double>(p.n());
  double out = 0.0;
  for (int j = interval.level; j <= p.j_max(); ++j) {
    const int shift = j - interval.level;
    const std::uint64_t first = interval.index << shift;
    const std::uint64_t last = (interval.index + 1) << shift;
    const double scale = std::sqrt(std::ldexp(n, -j));
    for (std::uint64_t k = first; k < last; ++k) {
      const double expected = std::ldexp(f0.mass(j, k), j);
      out = std::max(out, scale * std::fabs(p.estimate(j, k) - expected));
    }
  }
  return out;
}

PropagationReport
propagation_study(const PiecewiseDensity& f0, const PropagationStudyConfig& config,
                  Parallelism par)
{
  const auto& I = config.interval;
  if (config.n < 2)
    throw ConfigError("propagation_study: n must exceed 1");
  if (I.level < 0 || I.level > config.j_max ||
      I.index >= (std::uint64_t{ 1 } << I.level))
    throw ConfigError("propagation_study: interval outside [0, j_max]");
  if (!I.contains(DyadicInterval{ config.j_max, config.anchor }))
    throw ConfigError("propagation_study: anchor bin not inside the interval");
  const ValueRange r = f0.range(I.left(), I.right());
  if (r.lo != r.hi)
    throw ConfigError("propagation_study: f0 is not constant on the interval");
  if (config.reps < 1)
    throw ConfigError("propagation_study: reps must be at least 1");

  const int levels = config.j_max - I.level + 1;
  std::vector<double> t2(config.reps);
  std::vector<std::vector<char>> detected(config.reps);
  const double nn = static_cast<double>(config.n);
  const Threshold zeta(config.zeta);

  parallel_for(config.reps, par, [&](std::size_t rep) {
    Substream rng(config.seed, { rep });
    const auto xs = sample(f0, config.n, rng);
    const CountsPyramid p(xs, config.j_max, config.d);
    const ChainCounts chain = chain_from_pyramid(p, I.level, config.anchor);
    const double t = propagation_statistic(chain, zeta, config.n);
    t2[rep] = t * t;
    std::vector<double> f(levels);
    for (int j = I.level; j <= config.j_max; ++j)
      f[j - I.level] = histogram_value(chain.at(j), j, nn);
    const ChainEstimates est{ I.level, f };
    detected[rep].resize(levels);
    for (int j = I.level; j <= config.j_max; ++j)
      detected[rep][j - I.level] = select_on_chain(est, nn, j, config.zeta) == j;
  });

  PropagationReport out;
  out.bound = config.alpha / std::ldexp(nn, 2 * config.j_max);
  out.detection_frequency.assign(levels, 0.0);
  double s2 = 0.0;
  double s4 = 0.0;
  for (std::size_t rep = 0; rep < config.reps; ++rep) {
    s2 += t2[rep];
    s4 += t2[rep] * t2[rep];
    for (int i = 0; i < levels; ++i)
      out.detection_frequency[i] += detected[rep][i];
  }
  const double reps = static_cast<double>(config.reps);
  for (auto& fr : out.detection_frequency)
    fr /= reps;
  out.mean_t2 = s2 / reps;
  if (config.reps > 1) {
    const double var = std::max(0.0, (s4 - reps * out.mean_t2 * out.mean_t2) / (reps - 1.0));
    out.se_t2 = std::sqrt(var / reps);
  }
  return out;
}

ThresholdSource
ThresholdSource::from_kappa(double kappa)
{
  ThresholdSource s;
  s.kappa = kappa;
  return s;
}

double
ThresholdSource::zeta_for(std::size_t n) const
{
  if (const auto it = zeta_by_n.find(n); it != zeta_by_n.end())
    return it->second;
  if (kappa)
    return *kappa * std::sqrt(std::log(static_cast<double>(n)));
  throw ConfigError("no threshold available for n = " + std::to_string(n));
}

void
StudyConfig::validate() const
{
  if (n_list.empty())
    throw ConfigError("study: n list is empty");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (n_list[i] < 2)
      throw ConfigError("study: every n must exceed 1");
    if (i > 0 && !(n_list[i] > n_list[i - 1]))
      throw ConfigError("study: n list must be strictly ascending");
  }
  if (reps < 1)
    throw ConfigError("study: reps must be at least 1");
  if (!(Delta > 0.0))
    throw ConfigError("study: Delta must be positive");
  if (!(density.delta() > 0.0))
    throw ConfigError("study: the density must be bounded below by delta > 0");
  if (start_level < 0)
    throw ConfigError("study: start level must be non-negative");
  for (double x : probes) {
    if (!(x > 0.0 && x <= 1.0))
      throw ConfigError("study: probe points must lie in (0, 1]");
  }
  for (std::size_t n : n_list)
    (void)thresholds.zeta_for(n);
}

std::vector<std::string>
study_metric_names(const StudyConfig& config)
{
  std::vector<std::string> names{ "oracle_discrepancy", "oracle_below",
                                  "oracle_above",       "adaptive_sup_risk",
                                  "uniform_deviation" };
  if (config.profile)
    names.emplace_back("holder_sup_risk");
  for (std::size_t i = 0; i < config.probes.size(); ++i)
    names.push_back("probe_error_" + std::to_string(i));
  return names;
}

RiskReport
run_study(const StudyConfig& config, Parallelism par)
{
  config.validate();
  RiskReport report;
  report.metric_names = study_metric_names(config);
  const std::size_t metrics = report.metric_names.size();

  for (std::size_t n : config.n_list) {
    const StudyContext ctx = make_context(config, n);
    if (config.start_level > ctx.j_max)
      throw ConfigError("study: start level exceeds j_max at n = " + std::to_string(n));
    report.levels.push_back({ n, ctx.j_max, ctx.zeta, ctx.U,
                              oracle_bound(ctx.zeta, n, config.alpha, config.Delta, ctx.U),
                              ctx.oracle.unqualified });

    std::vector<std::vector<double>> values(config.reps);
    parallel_for(config.reps, par, [&](std::size_t rep) {
      Substream rng(config.seed, { static_cast<std::uint64_t>(n), rep });
      const auto xs = sample(config.density, n, rng);
      const CountsPyramid p(xs, ctx.j_max, config.d);
      const SelectionMap sel = select_all(p, config.start_level, Threshold(ctx.zeta));
      const auto fhat = selected_values(p, sel);

      auto& v = values[rep];
      v.reserve(metrics);
      const OracleDiscrepancy od = oracle_discrepancy(p, sel, ctx.oracle);
      v.push_back(od.value);
      v.push_back(od.below_oracle);
      v.push_back(od.at_or_above_oracle);
      v.push_back(sup_risk_from_ranges(p, fhat, ctx.oracle, ctx.bin_range));
      v.push_back(uniform_deviation_statistic(p, config.density, { 0, 0 }));
      if (config.profile)
        v.push_back(holder_risk_from_cells(fhat, ctx.holder_cells));
      for (std::size_t i = 0; i < ctx.probe_bins.size(); ++i)
        v.push_back(std::fabs(fhat[ctx.probe_bins[i]] - ctx.probe_values[i]));
      for (double x : v) {
        if (!std::isfinite(x))
          throw NumericError("study produced a non-finite metric at n = " +
                             std::to_string(n));
      }
    });

    for (std::size_t rep = 0; rep < config.reps; ++rep) {
      for (std::size_t q = 0; q < metrics; ++q)
        report.records.push_back({ n, rep, report.metric_names[q], values[rep][q] });
    }
  }
  return report;
}

double
percentile(std::vector<double> values, double q)
{
  if (values.empty())
    throw std::invalid_argument("percentile of an empty set");
  if (!(q >= 0.0 && q <= 1.0))
    throw std::invalid_argument("percentile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return values[lo] + w * (values[hi] - values[lo]);
}

double
log_log_slope(std::span<const std::size_t> n, std::span<const double> y)
{
  if (n.size() != y.size())
    throw std::invalid_argument("log_log_slope: size mismatch");
  if (n.size() < 2)
    return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!(y[i] > 0.0) || n[i] < 2)
      return std::numeric_limits<double>::quiet_NaN();
    const double nn = static_cast<double>(n[i]);
    xs.push_back(std::log(nn / std::log(nn)));
    ys.push_back(std::log(y[i]));
  }
  const double k = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / k;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / k;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

std::vector<MetricSummary>
summarize(std::span<const MetricRecord> records)
{
  // metrics kept in order of first appearance, n ascending within a metric
  std::vector<std::string> order;
  std::map<std::string, std::map<std::size_t, std::vector<double>>> groups;
  for (const auto& r : records) {
    if (!groups.contains(r.metric))
      order.push_back(r.metric);
    groups[r.metric][r.n].push_back(r.value);
  }
  std::vector<MetricSummary> out;
  for (const auto& metric : order) {
    std::vector<std::size_t> ns;
    std::vector<double> means;
    const std::size_t first = out.size();
    for (const auto& [n, vals] : groups[metric]) {
      MetricSummary s;
      s.metric = metric;
      s.n = n;
      s.reps = vals.size();
      const double k = static_cast<double>(vals.size());
      s.mean = std::accumulate(vals.begin(), vals.end(), 0.0) / k;
      if (vals.size() > 1) {
        double ss = 0.0;
        for (double v : vals)
          ss += (v - s.mean) * (v - s.mean);
        s.std_error = std::sqrt(ss / (k - 1.0) / k);
      }
      s.p50 = percentile(vals, 0.5);
      s.p95 = percentile(vals, 0.95);
      s.max = *std::max_element(vals.begin(), vals.end());
      ns.push_back(n);
      means.push_back(s.mean);
      out.push_back(s);
    }
    const double slope = log_log_slope(ns, means);
    for (std::size_t i = first; i < out.size(); ++i)
      out[i].slope = slope;
  }
  return out;
}

HolderRateResult
holder_rate_study(const StudyConfig& config, Parallelism par)
{
  HolderRateResult out;
  out.report = run_study(config, par);
  out.summary = summarize(out.report.records);
  for (std::size_t i = 0; i < config.probes.size(); ++i) {
    const std::string name = "probe_error_" + std::to_string(i);
    double slope = std::numeric_limits<double>::quiet_NaN();
    for (const auto& s : out.summary) {
      if (s.metric == name) {
        slope = s.slope;
        break;
      }
    }
    out.probe_slopes.push_back(slope);
  }
  return out;
}

} // namespace dyadapt
