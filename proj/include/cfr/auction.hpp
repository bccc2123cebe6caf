#pragma once

#include <span>
#include <vector>

namespace cfr {

struct Position {
  double gamma = 1;
  double reserve = 0;       // minimum rank-score gamma * s for this position
  bool randomized = false;  // reserve is multiplied by the realized multiplier m
};

// A layout is an ordered list of position indices with nonincreasing gamma.
struct Layout {
  std::vector<int> positions;
};

struct AuctionSetup {
  std::vector<Position> positions;
  std::vector<Layout> layouts;  // index order is the tie-break priority

  void validate() const;
  // Threshold on the ad term s for position p at multiplier m.
  double threshold(int p, double m) const;
};

// One eligible ad. score = b * beta^alpha * mu is the ad term s; the rank-score
// at position p is gamma_p * score.
struct Bidder {
  int ad = 0;
  int advertiser = 0;
  double score = 0;
};

struct Placement {
  int bidder = 0;  // index into the bidder list
  int position = 0;
  double rank_score = 0;
};

struct Slate {
  int layout = 0;
  std::vector<Placement> placed;
  double value = 0;

  bool same_allocation(const Slate& o) const;
};

// Ranking and per-layout totals that do not depend on m; reused to replay the
// auction across multipliers.
class PreparedAuction {
 public:
  PreparedAuction(std::span<const Bidder> bidders, const AuctionSetup& setup);

  int choose(double m) const;  // layout index chosen at multiplier m
  Slate slate(double m) const;
  Slate slate_for_layout(int layout) const;
  // Largest m at which the layout is feasible (0 if never, +inf if always).
  double cap(int layout) const { return cap_[layout]; }
  double layout_value(int layout) const { return value_[layout]; }
  // Layouts sorted by preference (value desc, then index).
  const std::vector<int>& preference() const { return pref_; }
  const std::vector<int>& ranking() const { return rank_; }  // best ad per advertiser, sorted

  struct Interval {
    double lo, hi;  // chosen layout is constant for m in (lo, hi]
    int layout;
  };
  // Partition of (0, inf) into intervals with constant slate.
  std::vector<Interval> intervals() const;
  Interval interval_at(double m) const;

  std::span<const Bidder> bidders() const { return bidders_; }
  const AuctionSetup& setup() const { return setup_; }

 private:
  std::span<const Bidder> bidders_;
  const AuctionSetup& setup_;
  std::vector<int> rank_;
  std::vector<double> value_, cap_;
  std::vector<char> usable_;
  std::vector<int> pref_;
};

// Placement maximizing total rank-score subject to reserves and one ad per
// advertiser. Requires per-position thresholds nonincreasing along each layout.
Slate greedy_placement(std::span<const Bidder> bidders, const AuctionSetup& setup, double m);

// Critical ad terms: for each placed ad, the infimum of its score keeping the
// allocation identical. Prices follow by dividing by the non-bid part of the score.
std::vector<double> gsp_critical_scores(const Slate& slate, std::span<const Bidder> bidders,
                                        const AuctionSetup& setup, double m);
std::vector<double> gsp_critical_scores(const Slate& slate, const PreparedAuction& pa, double m);

struct SlateInterval {
  double m_min = 0, m_max = 0;
};
SlateInterval slate_interval(std::span<const Bidder> bidders, const AuctionSetup& setup, double m);

}  // namespace cfr
