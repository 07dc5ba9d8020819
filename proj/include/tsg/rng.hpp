#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace tsg {

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) { return mix64(a ^ mix64(b)); }

// FNV-1a, used to derive per-name seeds.
constexpr std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based generator: every draw is a pure function of
/// (key, stream, counter), so the order in which values are requested never
/// changes what they are.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) : key_(key) {}

  constexpr std::uint64_t bits(std::uint64_t stream, std::uint64_t counter) const {
    return mix64(hash_combine(hash_combine(key_, stream), counter));
  }

  // [0, 1)
  double uniform(std::uint64_t stream, std::uint64_t counter) const {
    return static_cast<double>(bits(stream, counter) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t stream, std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(stream, counter);
  }

  // Integer in [lo, hi].
  std::int64_t integer(std::uint64_t stream, std::uint64_t counter, std::int64_t lo, std::int64_t hi) const {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<std::int64_t>(bits(stream, counter) % span);
  }

  // Standard normal via Box-Muller on counters 2c and 2c+1.
  double normal(std::uint64_t stream, std::uint64_t counter) const {
    const double u1 = 1.0 - uniform(stream, 2 * counter);
    const double u2 = uniform(stream, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  constexpr std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

/// Sequential cursor over one stream of a CounterRng.
class RngStream {
 public:
  RngStream(CounterRng rng, std::uint64_t stream) : rng_(rng), stream_(stream) {}

  double uniform() { return rng_.uniform(stream_, counter_++); }
  double uniform(double lo, double hi) { return rng_.uniform(stream_, counter_++, lo, hi); }
  std::int64_t integer(std::int64_t lo, std::int64_t hi) { return rng_.integer(stream_, counter_++, lo, hi); }
  double normal() { return rng_.normal(stream_, counter_++); }

 private:
  CounterRng rng_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace tsg
