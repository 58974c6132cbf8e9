#include "dyadapt/density.hpp"

#include "dyadapt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dyadapt {

namespace {

constexpr double mass_tolerance = 1e-12;
constexpr double bound_slack = 1e-12;
constexpr double root_tolerance = 1e-14;

// antiderivative of |x - x0|^gamma
double
power_antiderivative(double x, double x0, double gamma) noexcept
{
  const double r = x - x0;
  const double v = std::pow(std::fabs(r), gamma + 1.0) / (gamma + 1.0);
  return r < 0.0 ? -v : v;
}

std::string
describe(std::size_t i, const PowerSegment& s)
{
  std::ostringstream os;
  os << "segment " << i << " (a=" << s.a << ", b=" << s.b << ", c0=" << s.c0
     << ", c1=" << s.c1 << ", x0=" << s.x0 << ", gamma=" << s.gamma << ")";
  return os.str();
}

} // namespace

double
PowerSegment::eval(double x) const noexcept
{
  if (c1 == 0.0)
    return c0;
  return c0 + c1 * std::pow(std::fabs(x - x0), gamma);
}

double
PowerSegment::integral(double u, double v) const noexcept
{
  double out = c0 * (v - u);
  if (c1 != 0.0) {
    out += c1 * (power_antiderivative(v, x0, gamma) -
                 power_antiderivative(u, x0, gamma));
  }
  return out;
}

PiecewiseDensity
PiecewiseDensity::create(std::vector<PowerSegment> segments, double delta, double M)
{
  if (segments.empty())
    throw ConfigError("density: no segments");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (!std::isfinite(s.a) || !std::isfinite(s.b) || !std::isfinite(s.c0) ||
        !std::isfinite(s.c1) || !std::isfinite(s.x0) || !std::isfinite(s.gamma)) {
      throw ConfigError("density: non-finite parameter in " + describe(i, s));
    }
    if (!(s.a < s.b))
      throw ConfigError("density: empty " + describe(i, s));
    if (!(s.gamma > 0.0 && s.gamma <= 1.0))
      throw ConfigError("density: gamma must lie in (0, 1] in " + describe(i, s));
    if (i > 0 && segments[i - 1].b != s.a) {
      throw ConfigError("density: " + describe(i, s) +
                        " does not start where the previous segment ends");
    }
  }
  if (segments.front().a != 0.0 || segments.back().b != 1.0)
    throw ConfigError("density: segments must cover (0, 1] exactly");
  if (!(delta >= 0.0) || !(M >= delta) || !std::isfinite(M))
    throw ConfigError("density: need 0 <= delta <= M < inf");

  PiecewiseDensity f;
  f.segments_ = std::move(segments);
  f.delta_ = delta;
  f.M_ = M;
  f.cumulative_.assign(1, 0.0);
  for (const auto& s : f.segments_)
    f.cumulative_.push_back(f.cumulative_.back() + s.integral(s.a, s.b));

  if (std::fabs(f.total_mass() - 1.0) > mass_tolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "density: total mass " << f.total_mass() << " differs from 1 by more than "
       << mass_tolerance << " (use 'normalize' to rescale)";
    throw ConfigError(os.str());
  }
  for (std::size_t i = 0; i < f.segments_.size(); ++i) {
    const auto& s = f.segments_[i];
    const ValueRange r = f.range(s.a, s.b);
    if (r.lo < delta - bound_slack) {
      std::ostringstream os;
      os << "density: inf f = " << r.lo << " on " << describe(i, s)
         << " is below delta = " << delta;
      throw ConfigError(os.str());
    }
    if (r.hi > M + bound_slack) {
      std::ostringstream os;
      os << "density: sup f = " << r.hi << " on " << describe(i, s)
         << " exceeds M = " << M;
      throw ConfigError(os.str());
    }
  }
  return f;
}

PiecewiseDensity
PiecewiseDensity::normalized(std::vector<PowerSegment> segments, double delta,
                             double M)
{
  double total = 0.0;
  for (const auto& s : segments)
    total += s.integral(s.a, s.b);
  if (!(total > 0.0) || !std::isfinite(total))
    throw ConfigError("density: cannot normalize a segment list with mass <= 0");
  for (auto& s : segments) {
    s.c0 /= total;
    s.c1 /= total;
  }
  return create(std::move(segments), delta, M);
}

PiecewiseDensity
PiecewiseDensity::uniform()
{
  return create({ PowerSegment{ 0.0, 1.0, 1.0, 0.0, 0.0, 1.0 } }, 1.0, 1.0);
}

std::size_t
PiecewiseDensity::segment_of(double x) const noexcept
{
  // first segment whose right end exceeds x; x = 1 maps to the last one
  const auto it = std::upper_bound(
    segments_.begin(), segments_.end(), x,
    [](double value, const PowerSegment& s) { return value < s.b; });
  if (it == segments_.end())
    return segments_.size() - 1;
  return static_cast<std::size_t>(it - segments_.begin());
}

double
PiecewiseDensity::eval(double x) const
{
  if (!(x > 0.0 && x <= 1.0))
    throw std::domain_error("density evaluated outside (0, 1]");
  return segments_[segment_of(x)].eval(x);
}

double
PiecewiseDensity::mass(double u, double v) const
{
  if (!(u >= 0.0 && u <= v && v <= 1.0))
    throw std::domain_error("mass: need 0 <= u <= v <= 1");
  double out = 0.0;
  for (const auto& s : segments_) {
    const double lo = std::max(u, s.a);
    const double hi = std::min(v, s.b);
    if (lo < hi)
      out += s.integral(lo, hi);
  }
  return out;
}

double
PiecewiseDensity::mass(int level, std::uint64_t k) const
{
  if (level < 0 || k >= (std::uint64_t{ 1 } << level))
    throw std::domain_error("mass: dyadic interval out of range");
  return mass(std::ldexp(static_cast<double>(k), -level),
              std::ldexp(static_cast<double>(k + 1), -level));
}

double
PiecewiseDensity::cdf(double x) const
{
  if (x <= 0.0)
    return 0.0;
  if (x >= 1.0)
    return total_mass();
  const std::size_t i = segment_of(x);
  return cumulative_[i] + segments_[i].integral(segments_[i].a, x);
}

double
PiecewiseDensity::quantile(double u) const
{
  if (!(u > 0.0 && u < 1.0))
    throw std::domain_error("quantile: u must lie in (0, 1)");
  const double target = u * total_mass();
  auto it = std::upper_bound(cumulative_.begin() + 1, cumulative_.end(), target);
  if (it == cumulative_.end())
    --it;
  const std::size_t i = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  const PowerSegment& s = segments_[i];
  const double residual = target - cumulative_[i];

  if (s.c1 == 0.0)
    return std::clamp(s.a + residual / s.c0, s.a, s.b);

  // bracketed Newton iteration; falls back to bisection outside the bracket
  double lo = s.a;
  double hi = s.b;
  double x = s.a + (s.b - s.a) * std::clamp(residual / (cumulative_[i + 1] - cumulative_[i]), 0.0, 1.0);
  for (int iter = 0; iter < 200; ++iter) {
    const double g = s.integral(s.a, x) - residual;
    if (g == 0.0)
      return x;
    if (g < 0.0)
      lo = x;
    else
      hi = x;
    if (hi - lo <= root_tolerance)
      break;
    const double slope = s.eval(x);
    double next = slope > 0.0 ? x - g / slope : lo - 1.0;
    if (!(next > lo && next < hi))
      next = 0.5 * (lo + hi);
    if (std::fabs(next - x) <= root_tolerance * 0.5) {
      x = next;
      break;
    }
    x = next;
  }
  return std::clamp(x, s.a, s.b);
}

ValueRange
PiecewiseDensity::range(double u, double v) const
{
  if (!(u >= 0.0 && u < v && v <= 1.0))
    throw std::domain_error("range: need 0 <= u < v <= 1");
  ValueRange out{ std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity() };
  auto consider = [&](const PowerSegment& s, double x) {
    const double y = s.eval(x);
    out.lo = std::min(out.lo, y);
    out.hi = std::max(out.hi, y);
  };
  for (const auto& s : segments_) {
    const double lo = std::max(u, s.a);
    const double hi = std::min(v, s.b);
    if (!(lo < hi))
      continue;
    consider(s, lo);
    consider(s, hi);
    if (s.c1 != 0.0 && s.x0 > lo && s.x0 < hi)
      consider(s, s.x0);
  }
  return out;
}

std::vector<double>
sample(const PiecewiseDensity& f, std::size_t n, Substream& rng)
{
  std::vector<double> out(n);
  constexpr double tiny = std::numeric_limits<double>::denorm_min();
  for (auto& x : out)
    x = std::clamp(f.quantile(rng.uniform_open()), tiny, 1.0);
  return out;
}

std::vector<double>
sample(const PiecewiseDensity& f, std::size_t n, std::uint64_t seed)
{
  Substream rng(seed);
  return sample(f, n, rng);
}

HolderProfile::HolderProfile(std::vector<HolderPiece> pieces)
  : pieces_(std::move(pieces))
{
  if (pieces_.empty())
    throw ConfigError("holder profile: no pieces");
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const auto& p = pieces_[i];
    if (!(p.a < p.b))
      throw ConfigError("holder profile: empty piece " + std::to_string(i));
    if (!(p.t > 0.0 && p.t <= 1.0))
      throw ConfigError("holder profile: t must lie in (0, 1] (piece " +
                        std::to_string(i) + ")");
    if (!(p.L > 0.0) || !(p.eta > 0.0) || !std::isfinite(p.L) ||
        !std::isfinite(p.eta)) {
      throw ConfigError("holder profile: L and eta must be positive and finite (piece " +
                        std::to_string(i) + ")");
    }
    if (i > 0 && pieces_[i - 1].b != p.a)
      throw ConfigError("holder profile: gap or overlap before piece " +
                        std::to_string(i));
  }
  if (pieces_.front().a != 0.0 || pieces_.back().b != 1.0)
    throw ConfigError("holder profile: pieces must cover (0, 1] exactly");
}

const HolderPiece&
HolderProfile::at(double x) const
{
  if (!(x > 0.0 && x <= 1.0))
    throw std::domain_error("holder profile evaluated outside (0, 1]");
  // pieces are (a, b]
  const auto it = std::lower_bound(
    pieces_.begin(), pieces_.end(), x,
    [](const HolderPiece& p, double value) { return p.b < value; });
  return it == pieces_.end() ? pieces_.back() : *it;
}

std::vector<HolderPiece>
HolderProfile::overlapping(double u, double v) const
{
  std::vector<HolderPiece> out;
  for (const auto& p : pieces_) {
    const double lo = std::max(u, p.a);
    const double hi = std::min(v, p.b);
    if (lo < hi)
      out.push_back({ lo, hi, p.t, p.L, p.eta });
  }
  return out;
}

double
HolderProfile::min_exponent(double u, double v) const
{
  double t = std::numeric_limits<double>::infinity();
  for (const auto& p : overlapping(u, v))
    t = std::min(t, p.t);
  if (!std::isfinite(t))
    throw std::domain_error("holder profile: empty query interval");
  return t;
}

} // namespace dyadapt
