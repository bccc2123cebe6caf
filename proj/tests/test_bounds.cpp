#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "cfr/bounds.hpp"
#include "cfr/error.hpp"
#include "cfr/parallel.hpp"
#include "cfr/rng.hpp"

using namespace cfr;

TEST_CASE("Bernstein width on constant samples is the range term alone") {
  std::vector<double> x(100, 0.25);
  BoundRequest req{x, 0, 2, 0.05, BoundMethod::Bernstein};
  auto h = bernstein_halfwidth(req);
  double expected = 2 * 7 * std::log(2 / 0.05) / (3 * 99.0);
  CHECK(std::abs(h.eps - expected) <= 1e-12 * expected);
  CHECK(h.degenerate_variance);
}

TEST_CASE("CLT width") {
  std::vector<double> x = {0, 1, 0, 1};  // unbiased variance 1/3
  auto h = clt_halfwidth({x, 0, 1, 0.05});
  CHECK(h.eps == doctest::Approx(1.959963984540054 * std::sqrt(1.0 / 3 / 4)).epsilon(1e-12));
  auto c = clt_halfwidth({x, 0, 1, 0.05, BoundMethod::CLT, true});
  CHECK(c.eps > h.eps);
}

TEST_CASE("bound errors") {
  std::vector<double> one = {1};
  CHECK_THROWS_AS(clt_halfwidth({one}), Error);
  std::vector<double> x = {0.1, 3};
  try {
    bernstein_halfwidth({x, 0, 1, 0.05, BoundMethod::Bernstein});
    FAIL("expected RangeViolation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RangeViolation);
  }
  CHECK_THROWS_AS(clt_halfwidth({x, 0, 1, 0.0}), Error);
}

TEST_CASE("inner bounds bracket the clipped residual") {
  std::vector<double> w = {1, 0, 1, 0.5, 1, 1, 0, 1};
  std::vector<double> lo(8, 0), hi(8, 2), ell = {1, 2, 0, 1, 1, 2, 1, 0};
  auto b = upsilon_inner_bounds(w, lo, hi, 1, 0.05, ell);
  CHECK(b.b_lo == 0);
  CHECK(b.b_hi == doctest::Approx(2 * 2.5 / 8));
  CHECK(b.lo == 0);  // zero lower envelope has no slack
  CHECK(b.hi > b.b_hi);
  std::vector<double> bad = {1, 3, 0, 1, 1, 2, 1, 0};
  CHECK_THROWS_AS(upsilon_inner_bounds(w, lo, hi, 1, 0.05, bad), Error);
}

TEST_CASE("uniform widths grow with the grid") {
  Stream s(3);
  std::vector<double> f(500), g(500);
  for (std::size_t i = 0; i < f.size(); ++i) {
    g[i] = s.uniform(0, 2);
    f[i] = g[i] * s.uniform();
  }
  UniformFamily one{UniformFamily::Mode::FiniteGrid, 1, {}}, many{UniformFamily::Mode::FiniteGrid, 100, {}};
  auto a = uniform_halfwidths(one, f, 2, g, 2, 0.05), b = uniform_halfwidths(many, f, 2, g, 2, 0.05);
  CHECK(b.eps > a.eps);
  CHECK(b.xi > a.xi);
  CHECK(a.eps == doctest::Approx(bernstein_eps(sample_variance(f), 500, 2, 0.025)));
  UniformFamily cov{UniformFamily::Mode::CoveringNumber, 0, {3}};
  CHECK(covering_log_term(cov, 500, 0.05) == doctest::Approx(std::log(600.0)));
  std::vector<double> few(10);
  CHECK_THROWS_AS(uniform_halfwidths(one, few, 1, few, 1, 0.05), Error);
}

TEST_CASE("coverage on bounded variables") {
  // Beta(0.5, 2) draws with known mean 0.2.
  const int reps = 300, n = 200;
  int clt = 0, bern = 0;
  for (int r = 0; r < reps; ++r) {
    Stream s(1000 + r);
    std::vector<double> x(n);
    for (auto& v : x) v = s.beta(0.5, 2);
    double m = mean(x);
    BoundRequest req{x, 0, 1, 0.025, BoundMethod::CLT};
    if (std::abs(m - 0.2) <= clt_halfwidth(req).eps) ++clt;
    req.method = BoundMethod::Bernstein;
    if (std::abs(m - 0.2) <= bernstein_halfwidth(req).eps) ++bern;
  }
  CHECK(clt >= 0.93 * reps);
  CHECK(bern >= 0.95 * reps);
}

TEST_CASE("pairwise sums are order-fixed") {
  std::vector<double> x(10001);
  Stream s(5);
  for (auto& v : x) v = s.normal() * 1e6;
  double a = pairwise_sum(x);
  set_threads(1);
  double b = parallel_sum(x);
  set_threads(0);
  double c = parallel_sum(x);
  CHECK(a == b);
  CHECK(a == c);
}
