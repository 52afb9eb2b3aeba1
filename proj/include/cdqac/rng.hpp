#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace cdqac {

// Seeded random source. Wraps mt19937_64 (whose output sequence is fixed by the
// standard) and implements its own bounded draws so results do not depend on the
// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  // Index drawn from a discrete distribution given by non-negative weights.
  std::size_t categorical(const std::vector<double>& weights);

  // Independent child stream; the same (seed, stream) pair always gives the same child.
  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// 64-bit FNV-1a, used for content hashes.
class Fnv1a {
 public:
  void add_bytes(const void* data, std::size_t n);
  void add(std::int64_t v) { add_bytes(&v, sizeof v); }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace cdqac
