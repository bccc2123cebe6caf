#include "cfr/rng.hpp"

#include <cmath>

namespace cfr {

std::uint64_t hash_name(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

double Stream::normal() {
  // Box-Muller without caching: exactly two draws per normal.
  double u1 = uniform(), u2 = uniform();
  return std::sqrt(-2 * std::log(u1)) * std::cos(2 * M_PI * u2);
}

double Stream::gamma(double shape) {
  if (shape < 1) {
    double u = uniform();
    return gamma(shape + 1) * std::pow(u, 1 / shape);
  }
  // Marsaglia-Tsang.
  double d = shape - 1.0 / 3, c = 1 / std::sqrt(9 * d);
  for (;;) {
    double x = normal(), v = 1 + c * x;
    if (v <= 0) continue;
    v = v * v * v;
    double u = uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

double Stream::beta(double a, double b) {
  double x = gamma(a), y = gamma(b);
  return x / (x + y);
}

int Stream::poisson(double lambda) {
  if (lambda <= 0) return 0;
  double l = std::exp(-lambda), p = 1;
  int k = 0;
  do {
    ++k;
    p *= uniform();
  } while (p > l);
  return k - 1;
}

int Stream::uniform_int(int n) {
  return static_cast<int>(std::floor(uniform() * n)) % n;
}

}  // namespace cfr
