#include "cfr/slate_mc.hpp"

#include <cmath>
#include <vector>

#include "cfr/error.hpp"

namespace cfr {

ScoreLaw ScoreLaw::point_mass() {
  return {[](Stream&, std::span<double> out) {
    for (auto& x : out) x = 1.0;
  }};
}

ScoreLaw ScoreLaw::lognormal(double sigma) {
  LogNormal law{1.0, sigma};
  return {[law](Stream& s, std::span<double> out) {
    for (auto& x : out) x = law.sample(s.normal());
  }};
}

SlateProbability slate_probability_mc(std::span<const Bidder> base, const AuctionSetup& setup, double m,
                                      const Slate& target, const ScoreLaw& law, std::size_t n_mc,
                                      std::uint64_t seed) {
  std::vector<Bidder> b(base.begin(), base.end());
  std::vector<double> mult(b.size());
  SlateProbability out;
  out.n = n_mc;
  for (std::size_t k = 0; k < n_mc; ++k) {
    Stream s(derive_key(seed, k));
    law.draw(s, mult);
    for (std::size_t i = 0; i < b.size(); ++i) b[i].score = base[i].score * mult[i];
    if (PreparedAuction(b, setup).slate(m).same_allocation(target)) ++out.hits;
  }
  if (out.hits == 0) throw Error(ErrorCode::DegenerateSlate, "slate never reproduced in " + std::to_string(n_mc) + " draws");
  out.p = static_cast<double>(out.hits) / n_mc;
  out.se = std::sqrt(out.p * (1 - out.p) / n_mc);
  return out;
}

SlateProbability slate_probability_mc(const LogRecord& r, const World& w, const ScoreLaw& law, std::size_t n_mc,
                                      std::uint64_t seed) {
  auto b = bidders_of(r, r.alpha);
  Slate target;
  target.layout = r.layout;
  for (const auto& p : r.placed) target.placed.push_back({p.candidate, p.position, p.rank_score});
  return slate_probability_mc(b, w.setup(r.cluster), r.m, target, law, n_mc, seed);
}

}  // namespace cfr
