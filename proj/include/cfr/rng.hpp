#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace cfr {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t hash_name(std::string_view s);

inline std::uint64_t derive_key(std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(a) ^ (b * 0xD1B54A32D192ED03ull + 0x8CB92BA72F3D8DD7ull));
}

// Counter-based stream: the k-th draw depends only on (key, k), so a record's
// randomness is reproducible regardless of how work is partitioned.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t key) : key_(key) {}
  Stream(std::uint64_t seed, std::uint64_t index, std::string_view node)
      : key_(derive_key(derive_key(seed, index), hash_name(node))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return mix64(key_ ^ mix64(++counter_)); }

  // Uniform on (0, 1).
  double uniform() { return ((*this)() >> 11) * 0x1.0p-53 + 0x1.0p-54; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double gamma(double shape);
  double beta(double a, double b);
  int poisson(double lambda);
  int uniform_int(int n);  // [0, n)

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace cfr
