#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cfr/error.hpp"
#include "cfr/tuner.hpp"
#include "testkit.hpp"

using namespace cfr;

namespace {
std::size_t lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

struct Fixture {
  Policy pol = [] {
    Policy p;
    p.alpha_sigma = 0.1;
    return p;
  }();
  std::vector<LogRecord> log = testkit::standard_log(30000, 23, pol);
  Columns cols = columns_of(log);
  std::vector<double> clicks = metric_column(log, Metric::Clicks);
  std::vector<double> mainline = metric_column(log, Metric::MainlineAds);
  std::vector<double> revenue = metric_column(log, Metric::Revenue);
};
const Fixture& fx() {
  static const Fixture f;
  return f;
}
}  // namespace

TEST_CASE("grid syntax") {
  auto g = parse_grid("0.7:1.5:0.05");
  CHECK(g.size() == 17);
  CHECK(g.front() == 0.7);
  CHECK(g.back() == 1.5);
  CHECK(parse_grid("1.2") == std::vector<double>{1.2});
  CHECK(parse_grid("0:1:0.3").size() == 4);
  CHECK_THROWS_AS(parse_grid("1:0:0.1"), Error);
  CHECK_THROWS_AS(parse_grid("0:1:0"), Error);
  CHECK_THROWS_AS(parse_grid("0:1"), Error);
  CHECK_THROWS_AS(parse_grid("a:b:c"), Error);
}

TEST_CASE("sweep rows and CSV") {
  const auto& f = fx();
  EstimateOptions opt;
  opt.M = metric_range(WorldConfig::standard(), Metric::Clicks);
  auto rows = sweep(f.cols, f.clicks, f.pol, rho_grid(f.pol, parse_grid("0.7:1.5:0.05")), ReweightPoint::SlateLevel, opt);
  CHECK(rows.size() == 17);
  auto csv = sweep_csv(rows);
  CHECK(lines(csv) == 18);
  CHECK(csv.rfind("rho,alpha,Y_hat,W_hat,R,eps,xi,outer_lo,outer_hi,inner_lo,inner_hi,final_lo,final_hi,clamped\n", 0) == 0);
  for (const auto& r : rows) {
    auto single = estimate(f.clicks, weights(f.cols, f.pol, r.cf, ReweightPoint::SlateLevel), opt);
    CHECK(single.Y_hat == r.est.Y_hat);
    CHECK(single.final_.hi == r.est.final_.hi);
  }
  CHECK(sweep_json(rows).size() == 17);
}

TEST_CASE("tune selects the best feasible lower bound") {
  const auto& f = fx();
  TuneProblem pb;
  pb.grid = rho_grid(f.pol, parse_grid("0.8:1.3:0.05"));
  pb.objective_range = metric_range(WorldConfig::standard(), Metric::Revenue);
  pb.max_mainline = 0.9;
  auto res = tune(f.cols, f.revenue, f.mainline, f.pol, pb);
  REQUIRE(res.rows.size() == pb.grid.size());
  const auto& best = res.rows[res.best];
  CHECK(best.feasible);
  for (const auto& r : res.rows) {
    CHECK(r.lower <= r.y_hat);
    CHECK(r.upper >= r.y_hat);
    if (r.feasible) CHECK(r.lower <= best.lower);
    if (r.feasible) CHECK(r.mainline_upper <= 0.9);
  }
  CHECK(res.slack >= 0);
  CHECK(res.lower_bound == best.lower);

  pb.max_mainline = 1e-4;
  try {
    tune(f.cols, f.revenue, f.mainline, f.pol, pb);
    FAIL("expected NoFeasiblePoint");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoFeasiblePoint);
  }
}

TEST_CASE("uniform bounds are wider than pointwise ones") {
  const auto& f = fx();
  TuneProblem small, large;
  small.grid = rho_grid(f.pol, {1.1});
  large.grid = rho_grid(f.pol, parse_grid("0.6:1.6:0.01"));
  small.objective_range = large.objective_range = 4;
  auto a = tune(f.cols, f.clicks, {}, f.pol, small);
  auto b = tune(f.cols, f.clicks, {}, f.pol, large);
  auto it = std::find_if(b.rows.begin(), b.rows.end(), [](const TuneRow& r) { return std::abs(r.cf.rho[0] - 1.1) < 1e-9; });
  REQUIRE(it != b.rows.end());
  CHECK(it->y_hat == a.rows[0].y_hat);
  CHECK(it->lower < a.rows[0].lower);
  CHECK(!a.boundary);
}

TEST_CASE("boundary flag and ties") {
  const auto& f = fx();
  // A constant objective gives identical bounds only if the weights agree; use
  // the identity grid point twice at different positions.
  TuneProblem pb;
  pb.grid = {CounterfactualPolicy::shifted(f.pol, 1.0), CounterfactualPolicy::shifted(f.pol, 1.0)};
  pb.objective_range = 4;
  auto r = tune(f.cols, f.clicks, {}, f.pol, pb);
  CHECK(r.best == 0);
  pb.grid = rho_grid(f.pol, {0.5, 0.6});
  auto e = tune(f.cols, f.clicks, {}, f.pol, pb);
  CHECK(e.boundary);
}

TEST_CASE("level curves") {
  const auto& f = fx();
  EstimateOptions opt;
  auto rhos = parse_grid("0.8:1.2:0.04"), alphas = parse_grid("0.8:1.2:0.04");
  auto cells = level_curves(f.cols, f.clicks, 4, f.mainline, 2, f.pol, rhos, alphas, opt);
  CHECK(cells.size() == 121);
  CHECK(cells[0].rho == 0.8);
  CHECK(cells[1].alpha == doctest::Approx(0.84));
  for (const auto& c : cells) {
    CHECK(c.q1_inner >= 0);
    CHECK(c.q2_inner >= 0);
  }
  CHECK(lines(level_curves_csv(cells)) == 122);
  Policy fixed;
  auto log = testkit::standard_log(100, 1, fixed);
  CHECK_THROWS_AS(level_curves(columns_of(log), metric_column(log, Metric::Clicks), 4,
                               metric_column(log, Metric::MainlineAds), 2, fixed, rhos, alphas, opt),
                  Error);
}
