#include "cfr/auction.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "cfr/error.hpp"
#include "cfr/special.hpp"

namespace cfr {

void AuctionSetup::validate() const {
  bool has_empty = false;
  for (const auto& l : layouts) {
    if (l.positions.empty()) has_empty = true;
    for (std::size_t j = 0; j < l.positions.size(); ++j) {
      int p = l.positions[j];
      if (p < 0 || p >= static_cast<int>(positions.size()))
        throw Error(ErrorCode::InvalidArgument, "layout references unknown position");
      if (!(positions[p].gamma > 0)) throw Error(ErrorCode::InvalidArgument, "gamma must be positive");
      if (j > 0 && positions[p].gamma > positions[l.positions[j - 1]].gamma)
        throw Error(ErrorCode::InvalidArgument, "gamma must be nonincreasing within a layout");
    }
  }
  if (!has_empty) throw Error(ErrorCode::InvalidArgument, "layouts must include the empty layout");
}

double AuctionSetup::threshold(int p, double m) const {
  const auto& pos = positions[p];
  return pos.reserve * (pos.randomized ? m : 1.0) / pos.gamma;
}

bool Slate::same_allocation(const Slate& o) const {
  if (layout != o.layout || placed.size() != o.placed.size()) return false;
  for (std::size_t j = 0; j < placed.size(); ++j)
    if (placed[j].bidder != o.placed[j].bidder || placed[j].position != o.placed[j].position) return false;
  return true;
}

PreparedAuction::PreparedAuction(std::span<const Bidder> bidders, const AuctionSetup& setup)
    : bidders_(bidders), setup_(setup) {
  // Best ad per advertiser.
  std::map<int, int> best;
  for (int i = 0; i < static_cast<int>(bidders.size()); ++i) {
    const auto& b = bidders[i];
    if (!(b.score > 0)) continue;
    auto it = best.find(b.advertiser);
    if (it == best.end()) {
      best.emplace(b.advertiser, i);
    } else {
      const auto& c = bidders[it->second];
      if (b.score > c.score || (b.score == c.score && b.ad < c.ad)) it->second = i;
    }
  }
  for (auto& [a, i] : best) rank_.push_back(i);
  std::sort(rank_.begin(), rank_.end(), [&](int x, int y) {
    if (bidders[x].score != bidders[y].score) return bidders[x].score > bidders[y].score;
    return bidders[x].ad < bidders[y].ad;
  });

  std::size_t nl = setup.layouts.size();
  value_.assign(nl, 0.0);
  cap_.assign(nl, 0.0);
  usable_.assign(nl, 0);
  for (std::size_t l = 0; l < nl; ++l) {
    const auto& pos = setup.layouts[l].positions;
    if (pos.size() > rank_.size()) continue;
    double v = 0, cap = kInf;
    bool ok = true;
    for (std::size_t j = 0; j < pos.size(); ++j) {
      const auto& p = setup.positions[pos[j]];
      double r = p.gamma * bidders[rank_[j]].score;
      v += r;
      if (p.reserve > 0) {
        if (p.randomized)
          cap = std::min(cap, r / p.reserve);
        else if (r < p.reserve)
          ok = false;
      }
    }
    if (!ok) continue;
    usable_[l] = 1;
    value_[l] = v;
    cap_[l] = cap;
    pref_.push_back(static_cast<int>(l));
  }
  std::stable_sort(pref_.begin(), pref_.end(), [&](int a, int b) { return value_[a] > value_[b]; });
}

int PreparedAuction::choose(double m) const {
  for (int l : pref_)
    if (m <= cap_[l]) return l;
  throw Error(ErrorCode::InvalidArgument, "no feasible layout (missing empty layout?)");
}

Slate PreparedAuction::slate_for_layout(int layout) const {
  Slate s;
  s.layout = layout;
  const auto& pos = setup_.layouts[layout].positions;
  for (std::size_t j = 0; j < pos.size(); ++j) {
    double r = setup_.positions[pos[j]].gamma * bidders_[rank_[j]].score;
    s.placed.push_back({rank_[j], pos[j], r});
  }
  s.value = value_[layout];
  return s;
}

Slate PreparedAuction::slate(double m) const { return slate_for_layout(choose(m)); }

std::vector<PreparedAuction::Interval> PreparedAuction::intervals() const {
  std::vector<Interval> out;
  double lo = 0;
  for (int l : pref_) {
    if (cap_[l] > lo) {
      out.push_back({lo, cap_[l], l});
      lo = cap_[l];
      if (lo == kInf) break;
    }
  }
  return out;
}

PreparedAuction::Interval PreparedAuction::interval_at(double m) const {
  double lo = 0;
  for (int l : pref_) {
    if (cap_[l] > lo) {
      if (m <= cap_[l]) return {lo, cap_[l], l};
      lo = cap_[l];
    }
  }
  throw Error(ErrorCode::InvalidArgument, "no feasible layout (missing empty layout?)");
}

namespace {
void check_thresholds(const AuctionSetup& setup, double m) {
  for (const auto& l : setup.layouts)
    for (std::size_t j = 1; j < l.positions.size(); ++j)
      if (setup.threshold(l.positions[j], m) > setup.threshold(l.positions[j - 1], m) * (1 + 1e-12))
        throw Error(ErrorCode::InvalidArgument,
                    "reserve thresholds must be nonincreasing along a layout for greedy placement");
}
}  // namespace

Slate greedy_placement(std::span<const Bidder> bidders, const AuctionSetup& setup, double m) {
  check_thresholds(setup, m);
  return PreparedAuction(bidders, setup).slate(m);
}

std::vector<double> gsp_critical_scores(const Slate& slate, const PreparedAuction& pa, double m) {
  const auto& setup = pa.setup();
  auto bidders = pa.bidders();
  Slate check = pa.slate(m);
  if (!check.same_allocation(slate))
    throw Error(ErrorCode::InconsistentSlate, "slate does not match greedy placement");
  const auto& rank = pa.ranking();
  int lstar = slate.layout;
  const auto& pstar = setup.layouts[lstar].positions;

  std::vector<double> crit(slate.placed.size(), 0.0);
  for (std::size_t j = 0; j < slate.placed.size(); ++j) {
    int i = rank[j];
    double s = bidders[i].score;
    double c = 0;
    if (j + 1 < rank.size()) c = std::max(c, bidders[rank[j + 1]].score);
    for (std::size_t k = 0; k < bidders.size(); ++k)
      if (static_cast<int>(k) != i && bidders[k].advertiser == bidders[i].advertiser)
        c = std::max(c, bidders[k].score);
    c = std::max(c, setup.threshold(pstar[j], m));

    double gstar = setup.positions[pstar[j]].gamma;
    for (std::size_t l = 0; l < setup.layouts.size(); ++l) {
      if (static_cast<int>(l) == lstar) continue;
      // Only layouts feasible now can overtake; lowering s never helps others.
      bool feasible = false;
      for (int q : pa.preference())
        if (q == static_cast<int>(l)) feasible = m <= pa.cap(q);
      if (!feasible) continue;
      const auto& pl = setup.layouts[l].positions;
      double g = j < pl.size() ? setup.positions[pl[j]].gamma : 0.0;
      double dg = gstar - g;
      if (dg <= 0) continue;
      // Break-even score: dg * s' equals the difference of the other
      // positions' terms (summed directly to avoid cancellation).
      double rest = 0;
      for (std::size_t k = 0; k < std::max(pstar.size(), pl.size()); ++k) {
        if (k == j) continue;
        double sk = k < rank.size() ? bidders[rank[k]].score : 0.0;
        if (k < pl.size()) rest += setup.positions[pl[k]].gamma * sk;
        if (k < pstar.size()) rest -= setup.positions[pstar[k]].gamma * sk;
      }
      double sc = rest / dg;
      if (j < pl.size() && sc < setup.threshold(pl[j], m)) continue;
      c = std::max(c, sc);
    }
    crit[j] = std::min(c, s);
  }
  return crit;
}

std::vector<double> gsp_critical_scores(const Slate& slate, std::span<const Bidder> bidders,
                                        const AuctionSetup& setup, double m) {
  return gsp_critical_scores(slate, PreparedAuction(bidders, setup), m);
}

SlateInterval slate_interval(std::span<const Bidder> bidders, const AuctionSetup& setup, double m) {
  auto iv = PreparedAuction(bidders, setup).interval_at(m);
  return {iv.lo, iv.hi};
}

}  // namespace cfr
