#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace dyadapt {

namespace detail {

constexpr std::uint64_t splitmix_gamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t
mix64(std::uint64_t z) noexcept
{
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace detail

//! Counter-based random stream. The state is a pure function of a key
//! (seed plus work-item coordinates), so every replicate owns an
//! independent substream and results never depend on scheduling.
//! Satisfies UniformRandomBitGenerator (SplitMix64 output function).
class Substream
{
public:
  using result_type = std::uint64_t;

  explicit Substream(std::uint64_t seed,
                     std::initializer_list<std::uint64_t> coords = {}) noexcept
  {
    std::uint64_t h = detail::mix64(seed + detail::splitmix_gamma);
    for (auto c : coords) {
      h = detail::mix64(h ^ detail::mix64(c + detail::splitmix_gamma));
    }
    state_ = h;
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept
  {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept
  {
    state_ += detail::splitmix_gamma;
    return detail::mix64(state_);
  }

  //! Uniform draw on the open interval (0, 1).
  double uniform_open() noexcept
  {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

private:
  std::uint64_t state_;
};

} // namespace dyadapt
