#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "cfr/auction.hpp"
#include "cfr/world.hpp"

namespace cfr {

// Law of per-score multipliers: fills one multiplier per bidder.
struct ScoreLaw {
  std::function<void(Stream&, std::span<double>)> draw;

  static ScoreLaw point_mass();
  static ScoreLaw lognormal(double sigma);  // independent mean-one multipliers
};

struct SlateProbability {
  double p = 0, se = 0;
  std::size_t hits = 0, n = 0;
};

SlateProbability slate_probability_mc(std::span<const Bidder> base, const AuctionSetup& setup, double m,
                                      const Slate& target, const ScoreLaw& law, std::size_t n_mc,
                                      std::uint64_t seed);
SlateProbability slate_probability_mc(const LogRecord& r, const World& w, const ScoreLaw& law, std::size_t n_mc,
                                      std::uint64_t seed);

}  // namespace cfr
