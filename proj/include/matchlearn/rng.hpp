#pragma once

// Counter-based random streams. A stream is identified by (seed, purpose,
// index...) and yields splitmix64 outputs of key + counter, so draws from one
// stream never shift the draws of another.

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string_view>

namespace matchlearn {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t hash_purpose(std::string_view purpose) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : purpose) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Satisfies UniformRandomBitGenerator, so it plugs into <random> distributions.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    return splitmix64(key_ ^ splitmix64(counter_++));
  }

  /// Uniform double in [0, 1) from the top 53 bits.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Stream for (seed, purpose, indices...).
inline constexpr CounterRng make_stream(std::uint64_t seed, std::string_view purpose,
                                        std::initializer_list<std::uint64_t> indices = {}) noexcept {
  std::uint64_t key = splitmix64(seed ^ hash_purpose(purpose));
  for (std::uint64_t i : indices) key = splitmix64(key ^ splitmix64(i + 0x632be59bd9b4e019ULL));
  return CounterRng(key);
}

}  // namespace matchlearn
