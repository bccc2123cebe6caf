#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "cfr/counterfactual.hpp"
#include "cfr/error.hpp"
#include "cfr/scm.hpp"
#include "cfr/special.hpp"
#include "cfr/world_graph.hpp"

using namespace cfr;
using namespace cfr::scm;
using nlohmann::json;

namespace {
ScmGraph toy() {
  auto reg = FactorRegistry::builtin();
  ScmGraph g;
  g.add("u", reg.make("normal", {}, {{"mean", 0.0}, {"sd", 1.0}}));
  g.add("q", reg.make("lognormal_multiplier", {}, {{"rho", 1.0}, {"sigma", 0.3}}));
  g.add("y", reg.make("linear", {"u", "q"}, {{"intercept", 1.0}, {"weights", {2.0, 3.0}}}));
  return g;
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

TEST_CASE("simulation is keyed by seed, index and node") {
  auto g = toy();
  auto a = simulate(g, 11, 5), b = simulate(g, 11, 5), c = simulate(g, 11, 6);
  CHECK(a == b);
  CHECK(!(a == c));
  CHECK(a.at("y").scalar() == doctest::Approx(1 + 2 * a.at("u").scalar() + 3 * a.at("q").scalar()));
}

TEST_CASE("structural errors") {
  auto reg = FactorRegistry::builtin();
  ScmGraph g;
  g.add("a", reg.make("linear", {"b"}, {{"weights", {1.0}}}));
  g.add("b", reg.make("linear", {"a"}, {{"weights", {1.0}}}));
  CHECK(code_of([&] { validate(g); }) == ErrorCode::CycleDetected);

  ScmGraph h;
  h.add("a", reg.make("linear", {"zz"}, {{"weights", {1.0}}}));
  CHECK(code_of([&] { validate(h); }) == ErrorCode::UndeclaredParent);

  auto t = toy();
  CHECK(code_of([&] { t.add("u", reg.make("constant", {}, {{"value", 1.0}})); }) == ErrorCode::DuplicateFactor);
  CHECK(code_of([&] { intervene(t, Intervention::clamp("nope", 1.0)); }) == ErrorCode::UndeclaredParent);
}

TEST_CASE("clamping cuts the upstream draw and shifts the effect") {
  auto g = toy();
  auto cg = intervene(g, Intervention::clamp("q", 2.0));
  auto a = simulate(g, 3, 1), b = simulate(cg, 3, 1);
  CHECK(a.at("u") == b.at("u"));
  CHECK(b.at("q").scalar() == 2.0);
  CHECK(b.at("y").scalar() == doctest::Approx(1 + 2 * b.at("u").scalar() + 6));
  auto order = cg.topological_order();
  CHECK(order.back() == "y");
}

TEST_CASE("density ratio uses only the replaced factor") {
  auto reg = FactorRegistry::builtin();
  auto g = toy();
  Intervention iv;
  iv.replace("q", reg.make("lognormal_multiplier", {}, {{"rho", 1.2}, {"sigma", 0.3}}));
  auto cg = intervene(g, iv);
  auto w = simulate(g, 9, 2);
  double m = w.at("q").scalar();
  double expected = LogNormal{1.2, 0.3}.pdf(m) / LogNormal{1.0, 0.3}.pdf(m);
  CHECK(density_ratio(g, cg, w) == doctest::Approx(expected).epsilon(1e-13));
  CHECK(density_ratio(g, g, w) == 1.0);

  auto clamped = intervene(g, Intervention::clamp("q", 1.0));
  CHECK(code_of([&] { density_ratio(g, clamped, w); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("graph JSON round trip") {
  auto g = toy();
  json j = to_json(g);
  auto back = graph_from_json(j, FactorRegistry::builtin());
  CHECK(simulate(back, 4, 4) == simulate(g, 4, 4));
  CHECK(to_json(back) == j);
  j["schema_version"] = 99;
  CHECK(code_of([&] { graph_from_json(j, FactorRegistry::builtin()); }) == ErrorCode::VersionUnsupported);
  json k = to_json(g);
  k["nodes"][0]["kind"] = "mystery";
  CHECK(code_of([&] { graph_from_json(k, FactorRegistry::builtin()); }) == ErrorCode::SchemaMismatch);
}

TEST_CASE("ad world graph reproduces simulate_page") {
  auto cfg = WorldConfig::standard();
  Policy pol;
  pol.bid_sigma = 0.2;
  auto g = ad_world_graph(cfg, pol);
  World w(cfg);
  for (std::uint64_t i = 0; i < 40; ++i) {
    auto a = simulate(g, 21, i);
    auto r = record_from_assignment(a, 21, i);
    auto ref = simulate_page(w, pol, 21, i);
    CHECK(r.candidates == ref.candidates);
    CHECK(r.m == ref.m);
    CHECK(r.placed == ref.placed);
    CHECK(r.m_min == ref.m_min);
    CHECK(r.m_max == ref.m_max);
    CHECK(r.revenue == doctest::Approx(ref.revenue).epsilon(1e-14));
  }
  auto desc = g.descendants("q");
  CHECK(std::find(desc.begin(), desc.end(), "y") != desc.end());
  CHECK(std::find(desc.begin(), desc.end(), "x") == desc.end());
}

TEST_CASE("score intervention ratio equals the score-level weight") {
  auto cfg = WorldConfig::standard();
  Policy pol;
  Policy star = pol;
  star.rho = 1.15;
  auto g = ad_world_graph(cfg, pol);
  auto cg = intervene(g, score_intervention(cfg, star));
  std::vector<LogRecord> recs;
  std::vector<double> ratio;
  for (std::uint64_t i = 0; i < 50; ++i) {
    auto a = simulate(g, 8, i);
    ratio.push_back(density_ratio(g, cg, a));
    recs.push_back(record_from_assignment(a, 8, i));
  }
  auto w = weights(columns_of(recs), pol, CounterfactualPolicy::shifted(pol, 1.15), ReweightPoint::ScoreLevel);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i] == doctest::Approx(ratio[i]).epsilon(1e-12));
}

TEST_CASE("ad world graph serializes through the registry") {
  auto cfg = WorldConfig::standard();
  auto g = ad_world_graph(cfg, Policy{});
  auto back = graph_from_json(to_json(g), ad_world_registry());
  CHECK(simulate(back, 2, 17) == simulate(g, 2, 17));
}
