#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "cfr/counterfactual.hpp"
#include "cfr/error.hpp"
#include "cfr/parallel.hpp"
#include "testkit.hpp"

using namespace cfr;

namespace {
const std::vector<LogRecord>& base_log() {
  static const auto log = testkit::standard_log(40000, 11);
  return log;
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

TEST_CASE("weights follow the density and interval-mass ratios") {
  const auto& log = base_log();
  Policy pol;
  auto cols = columns_of(log);
  auto cf = CounterfactualPolicy::shifted(pol, 1.2);
  auto ws = weights(cols, pol, cf, ReweightPoint::ScoreLevel);
  auto wl = weights(cols, pol, cf, ReweightPoint::SlateLevel);
  LogNormal a{1.0, 0.3}, b{1.2, 0.3};
  for (std::size_t i = 0; i < 200; ++i) {
    CHECK(ws[i] == doctest::Approx(b.pdf(log[i].m) / a.pdf(log[i].m)).epsilon(1e-12));
    double num = b.mass(log[i].m_min, log[i].m_max), den = a.mass(log[i].m_min, log[i].m_max);
    CHECK(wl[i] == doctest::Approx(num / den).epsilon(1e-12));
  }
  // Both weights have unit mean under the logging law.
  double ms = mean(ws), ml = mean(wl);
  CHECK(std::abs(ms - 1) < 5 * std::sqrt(sample_variance(ws) / ws.size()));
  CHECK(std::abs(ml - 1) < 5 * std::sqrt(sample_variance(wl) / wl.size()));
  // The slate weight is the conditional mean of the score weight, so its spread is smaller.
  CHECK(sample_variance(wl) < sample_variance(ws));
  auto serial = weights(cols, pol, cf, ReweightPoint::SlateLevel, {true});
  CHECK(serial == wl);
}

TEST_CASE("identity counterfactual reproduces the on-policy mean") {
  const auto& log = base_log();
  Policy pol;
  auto cols = columns_of(log);
  auto ell = metric_column(log, Metric::Clicks);
  auto w = weights(cols, pol, CounterfactualPolicy::from(pol), ReweightPoint::ScoreLevel);
  for (double x : w) REQUIRE(x == 1.0);
  EstimateOptions opt;
  opt.M = metric_range(WorldConfig::standard(), Metric::Clicks);
  auto e = estimate(ell, w, opt);
  CHECK(e.Y_hat == doctest::Approx(mean(ell)).epsilon(1e-14));
  CHECK(e.W_hat == 1.0);
  CHECK(e.R > 1);
  CHECK(e.final_.lo <= e.Y_hat);
  CHECK(e.final_.hi >= e.inner.hi);
}

TEST_CASE("final interval contains the re-simulated truth") {
  const auto& log = base_log();
  Policy pol;
  World w(WorldConfig::standard());
  auto cols = columns_of(log);
  auto pages = testkit::standard_log(20000, 901);
  for (Metric m : {Metric::Clicks, Metric::MainlineAds, Metric::Revenue}) {
    auto ell = metric_column(log, m);
    EstimateOptions opt;
    opt.M = metric_range(w.config(), m);
    for (double rho : {0.85, 1.15}) {
      auto cf = CounterfactualPolicy::shifted(pol, rho);
      double truth = testkit::true_metric(pages, w, cf, m);
      for (auto point : {ReweightPoint::ScoreLevel, ReweightPoint::SlateLevel}) {
        auto e = estimate(ell, weights(cols, pol, cf, point), opt);
        INFO(to_string(m), " rho ", rho, " ", to_string(point), " truth ", truth, " est ", e.Y_hat);
        // The truth itself carries sampling error from the page sample.
        double slack = 4 * std::sqrt(opt.M * truth / pages.size());
        CHECK(e.final_.lo - slack <= truth);
        CHECK(e.final_.hi + slack >= truth);
      }
    }
  }
}

TEST_CASE("slate-and-prices weights") {
  Policy pol;
  World w(WorldConfig::standard());
  std::vector<LogRecord> log(base_log().begin(), base_log().begin() + 10000);
  auto cf = CounterfactualPolicy::shifted(pol, 1.1);
  auto wp = weights_slate_prices(log, w, pol, cf);
  auto ws = weights(columns_of(log), pol, cf, ReweightPoint::ScoreLevel);
  CHECK(std::abs(mean(wp) - 1) < 5 * std::sqrt(sample_variance(wp) / wp.size()));
  // Pages without clicks carry the plain slate weight.
  auto wl = weights(columns_of(log), pol, cf, ReweightPoint::SlateLevel);
  for (std::size_t i = 0; i < log.size(); ++i)
    if (log[i].clicks == 0) CHECK(wp[i] == doctest::Approx(wl[i]).epsilon(1e-12));
  CHECK(sample_variance(wp) <= sample_variance(ws));
}

TEST_CASE("clipping") {
  std::vector<double> w = {0.1, 5, 3, 9, 2, 7, 1, 4};
  CHECK(resolve_clip(w, ClipRule::fifth_largest()) == 3);
  auto c = clip(w, ClipRule::fifth_largest());
  CHECK(c.w == std::vector<double>{0.1, 0, 0, 0, 2, 0, 1, 0});
  CHECK(clip(w, ClipRule::explicit_cap(100)).w == w);
  std::vector<double> small = {0.5, 0.9, 1.0, 0.2, 0.3, 0.7};
  double R = resolve_clip(small, ClipRule::fifth_largest());
  CHECK(R > 1.0);
  CHECK(clip(small, ClipRule::fifth_largest()).w == small);
  CHECK(code_of([&] { resolve_clip(std::vector<double>{1, 2}, ClipRule::fifth_largest()); }) ==
        ErrorCode::TooFewSamples);
}

TEST_CASE("estimator errors") {
  std::vector<double> ell(10, 0.5), w(10, 1.0);
  EstimateOptions opt;
  opt.method = BoundMethod::Bernstein;
  CHECK(code_of([&] { estimate(ell, w, opt); }) == ErrorCode::TooFewSamples);
  opt.method = BoundMethod::CLT;
  ell[3] = 2;
  CHECK(code_of([&] { estimate(ell, w, opt); }) == ErrorCode::RangeViolation);

  Policy fixed;
  fixed.sigma = 0;
  auto log = testkit::standard_log(100, 3, fixed);
  auto cols = columns_of(log);
  auto cf = CounterfactualPolicy::shifted(fixed, 1.1);
  cf.sigma = 0.3;
  CHECK(code_of([&] { weights(cols, fixed, cf, ReweightPoint::ScoreLevel); }) == ErrorCode::ZeroDenominator);
  Columns nointerval = columns_of(base_log());
  nointerval.has_interval = false;
  CHECK(code_of([&] {
          weights(nointerval, Policy{}, CounterfactualPolicy::shifted(Policy{}, 1.1), ReweightPoint::SlateLevel);
        }) == ErrorCode::MissingSlateInterval);
  auto alpha_cf = CounterfactualPolicy::from(Policy{});
  alpha_cf.alpha = 1.1;
  CHECK(code_of([&] { weights(columns_of(base_log()), Policy{}, alpha_cf, ReweightPoint::SlateLevel); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("predictors may only read invariant fields") {
  Predictor bad{{"commercialness", "m"}, [](const InvariantView&) { return 0.0; }};
  CHECK(code_of([&] { check_predictor(bad); }) == ErrorCode::InvalidPredictor);
  Predictor good{{"cluster"}, [](const InvariantView& v) { return std::isnan(v.intent) ? v.cluster : -1.0; }};
  std::vector<LogRecord> recs(base_log().begin(), base_log().begin() + 50);
  auto z = predict(good, recs);
  for (std::size_t i = 0; i < recs.size(); ++i) CHECK(z[i] == recs[i].cluster);
}

TEST_CASE("difference and doubly robust estimates") {
  const auto& log = base_log();
  Policy pol;
  World w(WorldConfig::standard());
  auto cols = columns_of(log);
  auto ell = metric_column(log, Metric::Clicks);
  EstimateOptions opt;
  opt.M = metric_range(w.config(), Metric::Clicks);
  auto cf_a = CounterfactualPolicy::shifted(pol, 1.1), cf_b = CounterfactualPolicy::shifted(pol, 0.9);
  auto wa = weights(cols, pol, cf_a, ReweightPoint::SlateLevel);
  auto wb = weights(cols, pol, cf_b, ReweightPoint::SlateLevel);

  // Per-cluster mean clicks as an invariant predictor.
  std::vector<double> sum(3, 0), cnt(3, 0);
  for (const auto& r : log) {
    sum[r.cluster] += r.clicks;
    cnt[r.cluster] += 1;
  }
  Predictor p{{"cluster"}, [&](const InvariantView& v) {
                int k = static_cast<int>(v.cluster);
                return sum[k] / cnt[k];
              }};
  auto zeta = predict(p, log);
  auto d = estimate_difference(ell, zeta, wa, wb, opt);
  double direct = estimate(ell, wa, opt).Y_hat - estimate(ell, wb, opt).Y_hat;
  CHECK(d.final_.lo <= d.D_hat);
  CHECK(d.final_.hi >= d.D_hat);
  CHECK(std::abs(d.D_hat - direct) < 4 * d.eps);

  auto pages = testkit::standard_log(20000, 77);
  double truth = testkit::true_metric(pages, w, cf_a, Metric::Clicks) - testkit::true_metric(pages, w, cf_b, Metric::Clicks);
  CHECK(d.final_.lo - 0.01 <= truth);
  CHECK(d.final_.hi + 0.01 >= truth);

  // With the predictor replayed unchanged, DR differs from plain IPS only by centering.
  auto dr = doubly_robust(ell, zeta, zeta, wa, opt);
  auto plain = estimate(ell, wa, opt);
  CHECK(std::abs(dr.value - plain.Y_hat) < 3 * (dr.eps + plain.eps));
  std::vector<double> zero(ell.size(), 0.0);
  auto dr0 = doubly_robust(ell, zero, zero, wa, opt);
  CHECK(dr0.value == doctest::Approx(plain.Y_hat).epsilon(1e-12));
  CHECK(dr0.W_hat == plain.W_hat);

  auto nu = estimate(ell, weights(cols, pol, CounterfactualPolicy::shifted(pol, 1.05), ReweightPoint::SlateLevel), opt);
  auto x = pointwise_extrapolate(nu, plain);
  CHECK(x.value == doctest::Approx(2 * nu.Y_hat - plain.Y_hat));
  CHECK(x.interval.lo <= x.value);
  CHECK(x.interval.hi >= x.value);
}

TEST_CASE("expected metric agrees with sampling the multiplier") {
  World w(WorldConfig::standard());
  Policy pol;
  LogNormal law{1.1, 0.3};
  const auto& log = base_log();
  for (std::size_t i = 0; i < 30; ++i) {
    const auto& r = log[i];
    double exact_ml = expected_metric(r, w, law, r.alpha, Metric::MainlineAds);
    double exact_ck = expected_metric(r, w, law, r.alpha, Metric::Clicks);
    auto bidders = bidders_of(r, r.alpha);
    const auto& setup = w.setup(r.cluster);
    double ml = 0, ck = 0;
    const int n = 4000;
    for (int k = 0; k < n; ++k) {
      double m = sample_multiplier(law, 1234, k);
      Slate s = greedy_placement(bidders, setup, m);
      for (const auto& p : s.placed) ml += p.position < w.n_mainline();
      ck += expected_clicks(s, r.candidates, setup, intent_gain(r.intent));
    }
    CHECK(std::abs(ml / n - exact_ml) < 5 * std::sqrt(2.0 / n) + 1e-12);
    CHECK(std::abs(ck / n - exact_ck) < 5 * std::sqrt(1.0 / n) * 0.5 + 1e-12);
  }
}

TEST_CASE("revenue expectation matches replayed charges") {
  World w(WorldConfig::standard());
  Policy pol;
  LogNormal law{1.0, 0.3};
  const auto& log = base_log();
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& r = log[i];
    double exact = expected_metric(r, w, law, r.alpha, Metric::Revenue);
    double acc = 0;
    const int n = 4000;
    for (int k = 0; k < n; ++k) {
      auto rr = replay(r, w, pol, sample_multiplier(law, 99, k));
      auto probs = slate_click_probabilities(
          [&] {
            Slate s;
            s.layout = rr.layout;
            for (const auto& p : rr.placed) s.placed.push_back({p.candidate, p.position, p.rank_score});
            return s;
          }(),
          rr.candidates, w.setup(r.cluster), intent_gain(r.intent));
      for (std::size_t j = 0; j < rr.placed.size(); ++j) acc += probs[j] * rr.placed[j].charged;
    }
    CHECK(acc / n == doctest::Approx(exact).epsilon(0.05).scale(0.01));
  }
}

TEST_CASE("column loading matches in-memory columns") {
  auto recs = std::vector<LogRecord>(base_log().begin(), base_log().begin() + 2000);
  auto path = testkit::scratch_file("cols.jsonl");
  write_log(path, make_header(WorldConfig::standard(), Policy{}, recs.size(), 11), recs);
  auto lc = load_columns(path, {Metric::Clicks, Metric::Revenue});
  auto mem = columns_of(recs);
  CHECK(lc.cols.m == mem.m);
  CHECK(lc.cols.m_min == mem.m_min);
  CHECK(lc.cols.m_max == mem.m_max);
  CHECK(lc.cols.cluster == mem.cluster);
  CHECK(lc.metrics[0] == metric_column(recs, Metric::Clicks));
  CHECK(lc.metrics[1] == metric_column(recs, Metric::Revenue));
}
