#pragma once

#include <cstdint>

namespace nnlsgd {

// Counter-based generator: every output word is a pure function of
// (seed, stream, counter), so independent streams can be drawn in any
// order or in parallel. Reproducible within this implementation; the
// normal transform is Box-Muller, not a bit-exact match to other libraries.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream,
             std::uint64_t counter = 0) noexcept;

  static std::uint64_t word(std::uint64_t seed, std::uint64_t stream,
                            std::uint64_t counter) noexcept;

  std::uint64_t next_u64() noexcept;
  // Uniform in (0, 1], 53-bit resolution.
  double next_uniform() noexcept;
  double next_normal() noexcept;
  // Uniform integer in [0, bound), bound > 0.
  std::uint64_t next_below(std::uint64_t bound) noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Named stream indices so generators never share a stream by accident.
namespace streams {
inline constexpr std::uint64_t kMatrix = 1;
inline constexpr std::uint64_t kSupport = 2;
inline constexpr std::uint64_t kValues = 3;
inline constexpr std::uint64_t kNegativePart = 4;
inline constexpr std::uint64_t kBatches = 5;
inline constexpr std::uint64_t kSmoothSignal = 6;
inline constexpr std::uint64_t kNoise = 7;
}  // namespace streams

}  // namespace nnlsgd
