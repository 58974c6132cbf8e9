#pragma once

#include "dyadapt/calibration.hpp"
#include "dyadapt/density.hpp"
#include "dyadapt/dyadic.hpp"
#include "dyadapt/lepski.hpp"
#include "dyadapt/oracle.hpp"
#include "dyadapt/parallel.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dyadapt {

//! sup over x of sqrt(n 2^{-j*(x)}/log n) |f_hat(x) - f_n(j*(x),x)| / s_n(j*(x),x),
//! split by whether the selector stopped below the oracle level.
struct OracleDiscrepancy
{
  double value = 0.0;
  //! Largest contribution of bins with j_hat < j* (0 if there are none).
  double below_oracle = 0.0;
  //! Largest contribution of bins with j_hat >= j*.
  double at_or_above_oracle = 0.0;
  std::size_t bins_below_oracle = 0;
};

OracleDiscrepancy oracle_discrepancy(const CountsPyramid& p,
                                     const SelectionMap& selection,
                                     const OracleLevels& oracle);

OracleDiscrepancy oracle_discrepancy(const CountsPyramid& p, Threshold zeta,
                                     const OracleLevels& oracle);

//! zeta_n / sqrt(log n) + sqrt(alpha / n) n^{Delta e^{4U}}.
double oracle_bound(double zeta, std::size_t n, double alpha, double Delta,
                    double U);

//! sup over x of sqrt(n 2^{-j*(x)}/log n) |f_hat(x) - f0(x)|, the inner sup
//! over each finest bin taken from the exact extrema of f0.
double adaptive_sup_risk(const CountsPyramid& p, const SelectionMap& selection,
                         const OracleLevels& oracle, const PiecewiseDensity& f0);

double adaptive_sup_risk(const CountsPyramid& p, Threshold zeta,
                         const OracleLevels& oracle, const PiecewiseDensity& f0);

//! sup over x of (n/log n)^{t(x)/(2t(x)+1)} |f_hat(x) - f0(x)|.
double holder_sup_risk(const CountsPyramid& p, const SelectionMap& selection,
                       const HolderProfile& profile, const PiecewiseDensity& f0);

//! |f_hat(x) - f0(x)| at one point.
double pointwise_error(const CountsPyramid& p, const SelectionMap& selection,
                       const PiecewiseDensity& f0, double x);

//! sup over finest bins in I and j' in [I.level, j_max] of
//! sqrt(n 2^-j') |f_n(j',x) - 2^j' P_f0(I_{j',k(x)})|.
double uniform_deviation_statistic(const CountsPyramid& p,
                                   const PiecewiseDensity& f0,
                                   const DyadicInterval& interval);

//! Propagation behaviour under a density constant on one dyadic interval.
struct PropagationStudyConfig
{
  std::size_t n = 0;
  int j_max = 0;
  double d = 1.0;
  //! f0 must be constant on this interval.
  DyadicInterval interval;
  //! Finest bin (inside `interval`) anchoring the chain.
  std::uint64_t anchor = 0;
  double zeta = 0.0;
  double alpha = 1.0;
  std::size_t reps = 1000;
  std::uint64_t seed = 0;
};

struct PropagationReport
{
  //! Frequency of j_hat(j', x) == j' for j' = interval.level..j_max.
  std::vector<double> detection_frequency;
  double mean_t2 = 0.0;
  double se_t2 = 0.0;
  double bound = 0.0;
};

PropagationReport propagation_study(const PiecewiseDensity& f0,
                                    const PropagationStudyConfig& config,
                                    Parallelism par = {});

//! Either the rule zeta_n = kappa sqrt(log n), or calibrated values by n.
struct ThresholdSource
{
  std::optional<double> kappa;
  std::map<std::size_t, double> zeta_by_n;

  static ThresholdSource from_kappa(double kappa);
  double zeta_for(std::size_t n) const;
};

struct StudyConfig
{
  PiecewiseDensity density = PiecewiseDensity::uniform();
  std::optional<HolderProfile> profile;
  std::vector<double> probes;
  std::vector<std::size_t> n_list;
  std::size_t reps = 100;
  ThresholdSource thresholds;
  double Delta = 0.4;
  double d = 1.0;
  double alpha = 1.0;
  int start_level = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

//! Per-n constants of a study.
struct StudyLevel
{
  std::size_t n = 0;
  int j_max = 0;
  double zeta = 0.0;
  double U = 0.0;
  //! Right-hand side of the oracle inequality at this n.
  double oracle_rhs = 0.0;
  std::size_t unqualified_bins = 0;
};

struct MetricRecord
{
  std::size_t n = 0;
  std::size_t replicate = 0;
  std::string metric;
  double value = 0.0;
};

struct RiskReport
{
  std::vector<std::string> metric_names;
  std::vector<StudyLevel> levels;
  //! Ordered by n, then replicate, then metric_names order.
  std::vector<MetricRecord> records;
};

//! Metric names emitted by run_study for this configuration, in order.
std::vector<std::string> study_metric_names(const StudyConfig& config);

//! Monte-Carlo study; replicate (n, r) samples from Substream(seed, {n, r}).
RiskReport run_study(const StudyConfig& config, Parallelism par = {});

struct MetricSummary
{
  std::string metric;
  std::size_t n = 0;
  std::size_t reps = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double max = 0.0;
  //! Log-log slope of the mean against n / log n over all n (NaN if fewer
  //! than two n or a non-positive mean).
  double slope = 0.0;
};

//! Linear-interpolation percentile, q in [0, 1].
double percentile(std::vector<double> values, double q);

//! Least-squares slope of log(y) against log(n / log n).
double log_log_slope(std::span<const std::size_t> n, std::span<const double> y);

std::vector<MetricSummary> summarize(std::span<const MetricRecord> records);

struct HolderRateResult
{
  RiskReport report;
  std::vector<MetricSummary> summary;
  //! Fitted slope per probe point, aligned with config.probes.
  std::vector<double> probe_slopes;
};

//! run_study + slopes of the mean pointwise probe errors.
HolderRateResult holder_rate_study(const StudyConfig& config, Parallelism par = {});

} // namespace dyadapt
