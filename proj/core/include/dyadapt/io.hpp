#pragma once

#include "dyadapt/calibration.hpp"
#include "dyadapt/density.hpp"
#include "dyadapt/dyadic.hpp"
#include "dyadapt/experiments.hpp"
#include "dyadapt/lepski.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dyadapt::io {

//! Shortest decimal form that parses back to the same double.
std::string format_double(double x);

//! Newline-separated decimal reals; blank lines are skipped. Any other
//! malformed line throws ConfigError naming the source and line number.
std::vector<double> parse_sample(std::istream& in, const std::string& source);
std::vector<double> read_sample_file(const std::string& path);

//! Density spec: delta, M, segments and optional Hoelder profile and probes.
//!
//!   # comment
//!   delta 0.4
//!   M 1.5
//!   normalize                        (optional: rescale to unit mass)
//!   segment a b c0 c1 x0 gamma       (one line per segment, in order)
//!   holder a b t L eta               (optional profile pieces, in order)
//!   probe x                          (optional probe points)
struct DensitySpec
{
  PiecewiseDensity density = PiecewiseDensity::uniform();
  std::optional<HolderProfile> profile;
  std::vector<double> probes;
};

DensitySpec parse_density_spec(std::istream& in, const std::string& source);
DensitySpec read_density_spec(const std::string& path);

//! Key/value header followed by an [achieved] table; every double is written
//! in round-trip form.
void write_threshold_record(std::ostream& out, const ThresholdRecord& record);
ThresholdRecord parse_threshold_record(std::istream& in, const std::string& source);
ThresholdRecord read_threshold_record(const std::string& path);

//! bin_index,x_left,x_right,jhat,fhat -- one row per finest bin.
void write_estimate_csv(std::ostream& out, const SelectionMap& selection,
                        const std::vector<double>& fhat);

//! n,replicate,metric,value
void write_metric_csv(std::ostream& out, const std::vector<MetricRecord>& records);
std::vector<MetricRecord> parse_metric_csv(std::istream& in, const std::string& source);

//! metric,n,reps,mean,std_error,p50,p95,max,slope
void write_summary_csv(std::ostream& out, const std::vector<MetricSummary>& rows);

//! Writes to a sibling temporary file, then renames it over `path`.
void atomic_write(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

} // namespace dyadapt::io
