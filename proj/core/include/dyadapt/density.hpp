#pragma once

#include "dyadapt/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace dyadapt {

//! c0 + c1 |x - x0|^gamma on [a, b), 0 < gamma <= 1.
struct PowerSegment
{
  double a = 0.0;
  double b = 1.0;
  double c0 = 1.0;
  double c1 = 0.0;
  double x0 = 0.0;
  double gamma = 1.0;

  double eval(double x) const noexcept;
  //! Integral over [u, v] (u <= v, both within the segment).
  double integral(double u, double v) const noexcept;
};

//! Infimum and supremum of a function over an interval.
struct ValueRange
{
  double lo = 0.0;
  double hi = 0.0;
};

//! Density on (0,1] made of power segments, with closed-form masses, CDF and
//! exact extrema. delta and M are declared bounds, validated on creation.
class PiecewiseDensity
{
public:
  //! Validates contiguity, coverage of (0,1], unit mass (to 1e-12) and
  //! delta <= f <= M; throws ConfigError with the offending item otherwise.
  static PiecewiseDensity create(std::vector<PowerSegment> segments,
                                 double delta, double M);

  //! Rescales every segment so the total mass is one, then validates.
  static PiecewiseDensity normalized(std::vector<PowerSegment> segments,
                                     double delta, double M);

  static PiecewiseDensity uniform();

  //! f(x); throws std::domain_error unless 0 < x <= 1.
  double eval(double x) const;
  //! Integral of f over (u, v], 0 <= u <= v <= 1.
  double mass(double u, double v) const;
  //! Integral of f over I_{j,k}.
  double mass(int level, std::uint64_t k) const;
  double cdf(double x) const;
  //! Inverse CDF for u in (0, 1): per-segment bracketed root solve.
  double quantile(double u) const;
  //! Exact inf/sup of f over (u, v]; extrema sit at segment ends, the
  //! interval ends, or a segment's x0.
  ValueRange range(double u, double v) const;

  const std::vector<PowerSegment>& segments() const noexcept { return segments_; }
  double delta() const noexcept { return delta_; }
  double upper() const noexcept { return M_; }
  double total_mass() const noexcept { return cumulative_.back(); }

private:
  PiecewiseDensity() = default;
  std::size_t segment_of(double x) const noexcept;

  std::vector<PowerSegment> segments_;
  std::vector<double> cumulative_;
  double delta_ = 0.0;
  double M_ = 0.0;
};

//! i.i.d. draws by exact inverse-CDF sampling; deterministic per seed.
std::vector<double> sample(const PiecewiseDensity& f, std::size_t n,
                           std::uint64_t seed);

//! Same, drawing from an existing stream.
std::vector<double> sample(const PiecewiseDensity& f, std::size_t n,
                           Substream& rng);

//! One piece (a, b] of a piecewise-constant local Hoelder profile.
struct HolderPiece
{
  double a = 0.0;
  double b = 1.0;
  double t = 1.0;
  double L = 1.0;
  double eta = 1.0;
};

//! Piecewise-constant t(x), L(x), eta(x) on a partition of (0,1].
class HolderProfile
{
public:
  explicit HolderProfile(std::vector<HolderPiece> pieces);

  const std::vector<HolderPiece>& pieces() const noexcept { return pieces_; }
  const HolderPiece& at(double x) const;
  //! Pieces overlapping (u, v] with positive length, clipped to (u, v].
  std::vector<HolderPiece> overlapping(double u, double v) const;
  //! Smallest exponent over (u, v].
  double min_exponent(double u, double v) const;

private:
  std::vector<HolderPiece> pieces_;
};

} // namespace dyadapt
