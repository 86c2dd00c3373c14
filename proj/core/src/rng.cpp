#include "nnlsgd/rng.hpp"

#include <cmath>
#include <numbers>

namespace nnlsgd {

namespace {

__extension__ using uint128 = unsigned __int128;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t make_key(std::uint64_t seed,
                                 std::uint64_t stream) noexcept {
  return mix64(mix64(seed + 0x9e3779b97f4a7c15ULL) ^
               (stream * 0xd1b54a32d192ed03ULL));
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream,
                       std::uint64_t counter) noexcept
    : key_(make_key(seed, stream)), counter_(counter) {}

std::uint64_t CounterRng::word(std::uint64_t seed, std::uint64_t stream,
                               std::uint64_t counter) noexcept {
  return mix64(make_key(seed, stream) + counter * 0x9e3779b97f4a7c15ULL);
}

std::uint64_t CounterRng::next_u64() noexcept {
  return mix64(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL);
}

double CounterRng::next_uniform() noexcept {
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double CounterRng::next_normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

std::uint64_t CounterRng::next_below(std::uint64_t bound) noexcept {
  // Lemire's multiply-shift with rejection of the biased low range.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const uint128 m = static_cast<uint128>(next_u64()) * bound;
    if (static_cast<std::uint64_t>(m) >= threshold) {
      return static_cast<std::uint64_t>(m >> 64);
    }
  }
}

}  // namespace nnlsgd
