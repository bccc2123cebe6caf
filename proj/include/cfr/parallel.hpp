#pragma once

#include <cstddef>
#include <exception>
#include <span>
#include <vector>

namespace cfr {

// Worker cap for OpenMP regions; 0 means library default.
void set_threads(int n);
int threads();

// Fixed-order pairwise summation; the result depends only on the input order.
double pairwise_sum(std::span<const double> x);

// Same tree as pairwise_sum, with leaf blocks reduced in parallel.
double parallel_sum(std::span<const double> x);

// Runs f(i) for i in [0, n) in parallel. Exceptions are caught per index and
// the one with the smallest index is rethrown, independent of scheduling.
template <class F>
void parallel_for(std::size_t n, F&& f, std::size_t chunk = 256) {
  std::exception_ptr err;
  std::size_t at = n;
  const long c = static_cast<long>(chunk);
#pragma omp parallel for schedule(dynamic, c) num_threads(threads())
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(cfr_parallel_for)
      if (static_cast<std::size_t>(i) < at) {
        at = static_cast<std::size_t>(i);
        err = std::current_exception();
      }
    }
  }
  if (err) std::rethrow_exception(err);
}

double mean(std::span<const double> x);
// Unbiased sample variance, two-pass around the pairwise mean.
double sample_variance(std::span<const double> x);

// Parallel sum of f(0..n-1) with the parallel_sum tree.
template <class F>
double parallel_sum_of(std::size_t n, F&& f) {
  std::vector<double> v(n);
  parallel_for(n, [&](std::size_t i) { v[i] = f(i); });
  return parallel_sum(v);
}

}  // namespace cfr
