#pragma once

#include <cstdint>

namespace crossworld {

// Counter-based uniform streams. Every draw is a pure function of
// (master seed, stream key), so simulation is order-independent and
// embarrassingly parallel across units: no generator state is shared.

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

}  // namespace detail

enum class NoiseKind : std::uint64_t { Covariate = 1, Treatment = 2, Outcome = 3, Aux = 4 };

// Uniform in [0, 1), keyed by (seed, unit, kind, time, component).
inline double unit_uniform(std::uint64_t seed, std::uint64_t unit, NoiseKind kind,
                           std::uint64_t time, std::uint64_t component = 0) {
  std::uint64_t h = detail::splitmix64(seed);
  h = detail::mix(h, unit);
  h = detail::mix(h, static_cast<std::uint64_t>(kind));
  h = detail::mix(h, time);
  h = detail::mix(h, component);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// General-purpose keyed stream for non-simulation uses (fold shuffles,
// synthetic test data). Successive calls step the counter.
class KeyedRng {
 public:
  explicit KeyedRng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(detail::mix(detail::splitmix64(seed), stream)) {}

  std::uint64_t next_u64() {
    state_ = detail::splitmix64(state_ + 0x9e3779b97f4a7c15ULL);
    return state_;
  }

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

}  // namespace crossworld
