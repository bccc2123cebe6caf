#include "cfr/parallel.hpp"

#include <omp.h>

#include <cmath>

namespace cfr {

namespace {
int g_threads = 0;
constexpr std::size_t kBlock = 1024;

double leaf_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  std::size_t h = n / 2;
  return leaf_sum(x, h) + leaf_sum(x + h, n - h);
}

double tree(const double* b, std::size_t n) {
  if (n == 1) return b[0];
  std::size_t h = n / 2;
  return tree(b, h) + tree(b + h, n - h);
}

std::size_t nblocks(std::size_t n) { return (n + kBlock - 1) / kBlock; }
}  // namespace

void set_threads(int n) { g_threads = n; }

int threads() { return g_threads > 0 ? g_threads : omp_get_max_threads(); }

double pairwise_sum(std::span<const double> x) {
  if (x.empty()) return 0.0;
  std::size_t nb = nblocks(x.size());
  std::vector<double> b(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    std::size_t lo = k * kBlock;
    b[k] = leaf_sum(x.data() + lo, std::min(kBlock, x.size() - lo));
  }
  return tree(b.data(), nb);
}

double parallel_sum(std::span<const double> x) {
  if (x.empty()) return 0.0;
  std::ptrdiff_t nb = static_cast<std::ptrdiff_t>(nblocks(x.size()));
  std::vector<double> b(nb);
#pragma omp parallel for schedule(static) num_threads(threads())
  for (std::ptrdiff_t k = 0; k < nb; ++k) {
    std::size_t lo = k * kBlock;
    b[k] = leaf_sum(x.data() + lo, std::min(kBlock, x.size() - lo));
  }
  return tree(b.data(), nb);
}

double mean(std::span<const double> x) {
  return x.empty() ? 0.0 : parallel_sum(x) / x.size();
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  double m = mean(x);
  std::vector<double> d(x.size());
#pragma omp parallel for schedule(static) num_threads(threads())
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(x.size()); ++i) {
    double e = x[i] - m;
    d[i] = e * e;
  }
  return parallel_sum(d) / (x.size() - 1);
}

}  // namespace cfr
