#pragma once

#include <cstdint>
#include <string>

#include "ds3/common.hpp"

namespace ds3 {

// Counter-based generator: draw i of stream s under seed q is a pure hash
// of (q, s, i), so any draw is reproducible without replaying the sequence
// and independent sub-streams are cheap. The mixer is the splitmix64
// finalizer applied twice.
class CounterRng {
 public:
  CounterRng() = default;
  CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  static std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t value_at(std::uint64_t counter) const {
    return mix64(mix64(seed_ ^ mix64(stream_)) + counter);
  }

  std::uint64_t next_u64() { return value_at(counter_++); }

  // uniform in [0, 1) with 53 random bits
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Box-Muller; always consumes exactly two draws so parallel substreams
  // stay aligned
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
  }

  // derived stream with its own counter; label hashing is FNV-1a
  CounterRng substream(const std::string& label) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return CounterRng(seed_, mix64(stream_) ^ h);
  }
  CounterRng substream(std::uint64_t id) const {
    return CounterRng(seed_, mix64(stream_) ^ mix64(id));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace ds3
