#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cfr/equilibrium.hpp"
#include "cfr/error.hpp"
#include "cfr/special.hpp"
#include "testkit.hpp"

using namespace cfr;

namespace {
WorldConfig market_world() {
  WorldConfig c = WorldConfig::standard();
  c.advertisers = {{0, 1.0, 1.5, 0.8, 0.02, 0.2}, {1, 1.5, 3.0, 0.8, 0.02, 0.2}, {2, 2.5, 5.0, 0.8, 0.02, 0.2}};
  return c;
}

Policy market_policy() {
  Policy p;
  p.bid_sigma = 0.5;
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}
}  // namespace

TEST_CASE("value from the first-order condition") {
  BidDerivatives d;
  d.advertiser = 4;
  d.bid = 2;
  d.impressions = 5000;
  d.dY = 0.2;
  d.dY_se = 0.01;
  d.dZ = 0.5;
  d.dZ_se = 0.02;
  auto m = estimate_values({d}, 20);
  REQUIRE(m.size() == 1);
  CHECK(m[0].value == doctest::Approx(2.5));
  CHECK(m[0].status == AdvertiserStatus::Interior);
  CHECK(m[0].active);
  double r = std::sqrt(0.04 * 0.04 + 0.05 * 0.05);
  CHECK(m[0].value_se == doctest::Approx(2.5 * r));

  d.bid = 20;
  CHECK(estimate_values({d}, 20)[0].status == AdvertiserStatus::AtCap);
  d.bid = 0;
  CHECK(estimate_values({d}, 20)[0].status == AdvertiserStatus::AtZero);
  d.bid = 2;
  d.dY = 0.005;
  CHECK(estimate_values({d}, 20)[0].status == AdvertiserStatus::Insufficient);
  CHECK(!estimate_values({d}, 20)[0].active);
}

TEST_CASE("response system") {
  Eigen::MatrixXd A(2, 2);
  A << -2, 0.5, 0.3, -1;
  Eigen::VectorXd r(2);
  r << 0.4, -0.2;
  auto resp = solve_response(A, r, {0, 1});
  Eigen::VectorXd expected = -A.inverse() * r;
  CHECK((resp.xi - expected).norm() < 1e-12);
  CHECK(resp.condition > 1);
  Eigen::MatrixXd S(2, 2);
  S << 1, 2, 2, 4 + 1e-12;
  CHECK(code_of([&] { solve_response(S, r, {0, 1}); }) == ErrorCode::SingularSystem);
}

TEST_CASE("exposure floor") {
  auto cfg = market_world();
  auto log = collect_log(market_policy(), cfg, 500, 3);
  CHECK(code_of([&] { bid_derivative_estimates(log, market_policy(), 0); }) == ErrorCode::InsufficientExposure);
  CHECK(advertisers_in(log) == std::vector<int>{0, 1, 2});
  Policy fixed;
  auto flog = collect_log(fixed, cfg, 3000, 3);
  CHECK_THROWS_AS(bid_derivative_estimates(flog, fixed, 0), Error);
}

TEST_CASE("oracle curves match direct integration over the own multiplier") {
  auto cfg = market_world();
  Policy pol = market_policy();
  const std::size_t pages = 300;
  OracleMarket market(cfg, pol, pages, 19);
  auto recs = collect_log(pol, cfg, pages, 19);
  World w(cfg);
  const int K = 2000;
  for (int k = 0; k < 3; ++k) {
    for (double b : {0.7, 2.0}) {
      double clicks = 0, cost = 0;
      for (const auto& r : recs) {
        int own = -1;
        std::vector<Bidder> bidders;
        for (std::size_t c = 0; c < r.candidates.size(); ++c) {
          const auto& cd = r.candidates[c];
          double bid = cd.advertiser == k ? b : cfg.advertisers[cd.advertiser].bid;
          if (cd.advertiser == k) own = static_cast<int>(c);
          bidders.push_back({cd.ad, cd.advertiser, bid * cd.bid_mult * std::pow(cd.beta, r.alpha)});
        }
        if (own < 0) continue;
        const auto& setup = w.setup(r.cluster);
        double q = std::pow(r.candidates[own].beta, r.alpha);
        for (int t = 0; t < K; ++t) {
          double mult = LogNormal{1.0, pol.bid_sigma}.sample(normal_quantile((t + 0.5) / K));
          bidders[own].score = b * mult * q;
          Slate s = greedy_placement(bidders, setup, r.m);
          for (std::size_t j = 0; j < s.placed.size(); ++j) {
            if (s.placed[j].bidder != own) continue;
            double crit = gsp_critical_scores(s, bidders, setup, r.m)[j];
            double p = std::min(1.0, setup.positions[s.placed[j].position].gamma * r.candidates[own].beta *
                                         intent_gain(r.intent));
            clicks += p / K;
            cost += p * crit / (q * mult) / K;
          }
        }
      }
      clicks /= pages;
      cost /= pages;
      auto c = market.curve(k, b);
      INFO("advertiser ", k, " bid ", b);
      CHECK(c.clicks == doctest::Approx(clicks).epsilon(0.01));
      CHECK(c.cost == doctest::Approx(cost).epsilon(0.01));
      CHECK(market.utility(k, b) == doctest::Approx(cfg.advertisers[k].value * c.clicks - c.cost));
    }
  }
}

TEST_CASE("Nash bids are mutual best responses") {
  auto cfg = market_world();
  Policy pol = market_policy();
  NashOptions opt;
  opt.pages = 1500;
  auto res = nash_oracle(cfg, pol, opt);
  REQUIRE(res.bids.size() == 3);
  OracleMarket market(cfg, pol, opt.pages, opt.seed);
  market.set_bids(res.bids);
  for (int k = 0; k < 3; ++k) {
    double u = market.utility(k, res.bids[k]);
    for (double f : {0.8, 0.95, 1.05, 1.25}) CHECK(market.utility(k, res.bids[k] * f) <= u + 1e-4 * std::abs(u) + 1e-9);
  }
  // Higher value, higher bid.
  CHECK(res.bids[0] < res.bids[1]);
  CHECK(res.bids[1] < res.bids[2]);
  auto bad = cfg;
  bad.click_competition = 1;
  CHECK_THROWS_AS(OracleMarket(bad, pol, 10, 1), Error);
}

TEST_CASE("value recovery on a moderate log") {
  auto cfg = market_world();
  Policy pol = market_policy();
  NashOptions opt;
  opt.pages = 3000;
  auto nash = nash_oracle(cfg, pol, opt);
  for (std::size_t k = 0; k < 3; ++k) cfg.advertisers[k].bid = nash.bids[k];
  auto log = collect_log(pol, cfg, 200000, 41);
  std::vector<BidDerivatives> table;
  for (int a : advertisers_in(log)) table.push_back(bid_derivative_estimates(log, pol, a));
  auto models = estimate_values(table, cfg.bid_max);
  const double truth[3] = {1.5, 3.0, 5.0};
  for (std::size_t k = 0; k < 3; ++k) {
    INFO("advertiser ", k, " estimate ", models[k].value, " se ", models[k].value_se);
    CHECK(std::abs(models[k].value - truth[k]) < std::max(4 * models[k].value_se, 0.3 * truth[k]));
  }
  SecondDerivatives sd = second_derivative_estimates(log, pol, {0, 1, 2});
  auto resp = solve_response(sd, {models[0].value, models[1].value, models[2].value});
  CHECK(resp.condition < kSingularCondition);
  auto td = total_derivative(log, pol, resp, Metric::Clicks);
  CHECK(std::isfinite(td.value));
  CHECK(td.se > 0);
  auto j = resp.to_json();
  CHECK(j.contains("xi"));
}
