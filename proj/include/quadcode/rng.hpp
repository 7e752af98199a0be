#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace quadcode {

// Counter-based, splittable generator. Each stream is a key; draws hash
// (key, counter) with the SplitMix64 finalizer. Child streams derived with
// split() are independent of how many values the parent has drawn, so a
// dropout mask or shuffle depends only on its (seed, tag path), never on
// thread scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  Rng split(std::uint64_t tag) const {
    return Rng(Key{mix(key_ ^ mix(tag + kGolden))});
  }

  // Value at a fixed position of this stream. Does not advance the counter.
  std::uint64_t at(std::uint64_t index) const {
    return mix(key_ + kGolden * (index + 1));
  }

  std::uint64_t next_u64() { return at(counter_++); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return to_unit(next_u64()); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= limit) return r % n;
    }
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  static double to_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

 private:
  struct Key {
    std::uint64_t value;
  };
  explicit Rng(Key key) : key_(key.value) {}

  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace quadcode
