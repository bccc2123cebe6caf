#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cfr/auction.hpp"
#include "cfr/error.hpp"
#include "cfr/special.hpp"
#include "testkit.hpp"

using namespace cfr;

namespace {
AuctionSetup two_mainline() {
  AuctionSetup s;
  s.positions = {{1.0, 0.1, true}, {0.7, 0.07, true}, {0.1, 0.0, false}};
  s.layouts = {{{}}, {{2}}, {{0}}, {{0, 2}}, {{0, 1}}, {{0, 1, 2}}};
  return s;
}
}  // namespace

TEST_CASE("hand-computed placement and prices") {
  AuctionSetup s;
  s.positions = {{1.0, 0.0, false}, {0.5, 0.0, false}};
  s.layouts = {{{}}, {{0}}, {{0, 1}}};
  std::vector<Bidder> b = {{0, 0, 3.0}, {1, 1, 2.0}, {2, 2, 1.0}};
  auto slate = greedy_placement(b, s, 1.0);
  REQUIRE(slate.layout == 2);
  CHECK(slate.placed[0].bidder == 0);
  CHECK(slate.placed[1].bidder == 1);
  CHECK(slate.value == doctest::Approx(4.0));
  auto crit = gsp_critical_scores(slate, b, s, 1.0);
  CHECK(crit[0] == doctest::Approx(2.0));
  CHECK(crit[1] == doctest::Approx(1.0));
}

TEST_CASE("uncontested last ad without reserve pays exactly zero") {
  AuctionSetup s;
  s.positions = {{1.0, 0.0, false}, {0.7, 0.0, false}};
  s.layouts = {{{}}, {{0}}, {{0, 1}}};
  std::vector<Bidder> b = {{0, 0, 0.083077725325438861}, {1, 1, 0.0071397622085991432}};
  auto slate = greedy_placement(b, s, 0.65689050721223419);
  REQUIRE(slate.placed.size() == 2);
  CHECK(gsp_critical_scores(slate, b, s, 0.65689050721223419)[1] == 0.0);
}

TEST_CASE("one ad per advertiser") {
  AuctionSetup s;
  s.positions = {{1.0, 0.0, false}, {0.5, 0.0, false}};
  s.layouts = {{{}}, {{0}}, {{0, 1}}};
  std::vector<Bidder> b = {{0, 7, 3.0}, {1, 7, 2.5}, {2, 2, 1.0}};
  auto slate = greedy_placement(b, s, 1.0);
  CHECK(slate.placed.size() == 2);
  CHECK(slate.placed[1].bidder == 2);
  auto crit = gsp_critical_scores(slate, b, s, 1.0);
  // The sibling ad from the same advertiser bounds the winner's price.
  CHECK(crit[0] == doctest::Approx(2.5));
}

TEST_CASE("greedy placement equals brute force") {
  Stream s(2024);
  for (int k = 0; k < 400; ++k) {
    auto a = testkit::random_auction(s);
    auto slate = greedy_placement(a.bidders, a.setup, a.m);
    CHECK(slate.value == doctest::Approx(testkit::brute_force_value(a)).epsilon(1e-12));
    CHECK(testkit::gsp_minimal(a.bidders, a.setup, a.m));
  }
}

TEST_CASE("slate intervals partition the multiplier axis") {
  auto setup = two_mainline();
  std::vector<Bidder> b = {{0, 0, 0.5}, {1, 1, 0.3}, {2, 2, 0.12}, {3, 3, 0.05}};
  PreparedAuction pa(b, setup);
  auto iv = pa.intervals();
  REQUIRE(!iv.empty());
  CHECK(iv.front().lo == 0);
  CHECK(std::isinf(iv.back().hi));
  for (std::size_t k = 1; k < iv.size(); ++k) CHECK(iv[k].lo == iv[k - 1].hi);
  for (const auto& I : iv) {
    double mid = std::isinf(I.hi) ? I.lo * 2 + 1 : 0.5 * (I.lo + I.hi);
    CHECK(pa.choose(mid) == I.layout);
    CHECK(pa.choose(I.hi == kInf ? 1e9 : I.hi) == I.layout);
    auto si = slate_interval(b, setup, mid);
    CHECK(si.m_min == I.lo);
    CHECK(si.m_max == I.hi);
  }
  // Fewer mainline ads as the reserve grows.
  CHECK(pa.slate(0.1).placed.size() >= pa.slate(100).placed.size());
}

TEST_CASE("auction errors") {
  auto setup = two_mainline();
  std::vector<Bidder> b = {{0, 0, 0.5}, {1, 1, 0.3}};
  Slate wrong = greedy_placement(b, setup, 1.0);
  std::swap(wrong.placed[0].bidder, wrong.placed[1].bidder);
  try {
    gsp_critical_scores(wrong, b, setup, 1.0);
    FAIL("expected InconsistentSlate");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InconsistentSlate);
  }
  AuctionSetup bad = setup;
  bad.positions[1].reserve = 0.2;  // threshold rises along the layout
  CHECK_THROWS_AS(greedy_placement(b, bad, 1.0), Error);
  AuctionSetup no_empty;
  no_empty.positions = {{1.0, 0, false}};
  no_empty.layouts = {{{0}}};
  CHECK_THROWS_AS(no_empty.validate(), Error);
}
