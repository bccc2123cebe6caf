#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfr/auction.hpp"
#include "cfr/rng.hpp"
#include "cfr/special.hpp"
#include "json.hpp"

namespace cfr {

struct ClusterConfig {
  double weight = 1;          // traffic share
  double commercialness = 0.5;
  double ad_rate = 3;         // mean number of candidate ads
  double reserve = 0.05;      // mainline threshold on b * beta^alpha at m = 1
};

// Advertiser with a fixed bid and value, used by the equilibrium world.
struct FixedAdvertiser {
  int id = 0;
  double bid = 1;
  double value = 2;
  double eligibility = 1;  // probability of having an ad on a page
  double beta_lo = 0.02, beta_hi = 0.2;
};

struct WorldConfig {
  std::vector<ClusterConfig> clusters;
  int advertiser_pool = 40;
  int max_candidates = 8;
  double beta_lo = 0.005, beta_hi = 0.3;
  double bid_min = 0.25, bid_shape = 1.5, bid_max = 20;
  double value_markup_lo = 1.0, value_markup_hi = 2.0;
  std::vector<double> gamma_mainline{1.0, 0.7};
  std::vector<double> gamma_sidebar{0.08, 0.05};
  double intent_a = 2, intent_b = 2;
  double commercial_noise = 0.1;
  // Intent shifts commercialness (slope) and commercialness scales beta
  // (quality_slope): together they plant a common cause of scores and clicks.
  double intent_commercial_slope = 0;
  double quality_slope = 0;
  // Mainline ads below the top one lose clicks to it: their click probability
  // is scaled by max(0, 1 - click_competition * p_top).
  double click_competition = 0;
  std::vector<FixedAdvertiser> advertisers;

  static WorldConfig standard();
  void validate() const;
  AuctionSetup auction_setup(int cluster) const;
  int n_positions() const { return static_cast<int>(gamma_mainline.size() + gamma_sidebar.size()); }
  double max_clicks() const { return n_positions(); }
  double max_bid() const;
  double max_value() const;
};

nlohmann::json to_json(const WorldConfig& c);
WorldConfig world_config_from_json(const nlohmann::json& j);

// The randomized factors under the system's control.
struct Policy {
  double rho = 1, sigma = 0.3;            // reserve multiplier law
  double alpha = 1, alpha_sigma = 0;      // squashing exponent law (normal)
  double bid_sigma = 0;                   // per-ad log-normal bid multipliers
  // With bid multipliers: charge as if the multiplier scaled the click
  // probability estimate (score interpretation), not the bid.
  bool score_interpretation = true;

  LogNormal reserve_law() const { return {rho, sigma}; }
  void validate() const;
  bool operator==(const Policy&) const = default;
};

nlohmann::json to_json(const Policy& p);
Policy policy_from_json(const nlohmann::json& j);

struct CandidateRec {
  int ad = 0, advertiser = 0;
  double bid = 0, beta = 0, value = 0;
  double bid_mult = 1;
  bool operator==(const CandidateRec&) const = default;
};

struct PlacedRec {
  int candidate = 0;  // index into candidates
  int position = 0;
  double rank_score = 0;
  double price = 0;    // bid interpretation: critical score / beta^alpha
  double charged = 0;  // price actually charged per click
  bool clicked = false;
  bool operator==(const PlacedRec&) const = default;
};

struct LogRecord {
  std::uint64_t seed = 0, index = 0;
  int cluster = 0;
  double commercialness = 0, intent = 0;
  int inventory = 0;
  std::vector<CandidateRec> candidates;
  double eps = 0, m = 1, alpha = 1;
  int layout = 0;
  std::vector<PlacedRec> placed;
  std::vector<double> clicked_prices;  // per position, 0 when not clicked
  int clicks = 0, mainline_ads = 0;
  double revenue = 0, ad_value = 0;
  double m_min = 0, m_max = kInf;

  bool operator==(const LogRecord&) const = default;
};

double intent_gain(double u);

std::vector<Bidder> bidders_of(const LogRecord& r, double alpha);

// Config plus the per-cluster auction setups derived from it.
class World {
 public:
  explicit World(WorldConfig cfg);
  const WorldConfig& config() const { return cfg_; }
  const AuctionSetup& setup(int cluster) const { return setups_.at(cluster); }
  int n_mainline() const { return static_cast<int>(cfg_.gamma_mainline.size()); }

 private:
  WorldConfig cfg_;
  std::vector<AuctionSetup> setups_;
};

struct SimulationOptions {
  bool serial = false;  // reference kernel without OpenMP
};

// Per-node draws of the page model; each takes the node's own substream.
namespace nodes {
double intent(const WorldConfig& cfg, Stream& s);
void context(const WorldConfig& cfg, LogRecord& r, Stream& s);
int inventory(Stream& s);
void candidates(const WorldConfig& cfg, LogRecord& r, Stream& s);
void bids(const WorldConfig& cfg, const Policy& pol, LogRecord& r, Stream& s);
void scores(const Policy& pol, LogRecord& r, Stream& s);
}  // namespace nodes

// Pages are independent; page i draws from substreams keyed by (seed, i, node).
LogRecord simulate_page(const World& w, const Policy& pol, std::uint64_t seed, std::uint64_t index);
std::vector<LogRecord> collect_log(const Policy& pol, const World& w, std::size_t n, std::uint64_t seed,
                                   SimulationOptions opt = {});
std::vector<LogRecord> collect_log(const Policy& pol, const WorldConfig& cfg, std::size_t n, std::uint64_t seed,
                                   SimulationOptions opt = {});

double sample_multiplier(const LogNormal& law, std::uint64_t seed, std::uint64_t index = 0);

// Clicks for a placed slate: one uniform per position in the position table,
// drawn whether or not the position is filled.
std::vector<char> user_clicks(const std::vector<PlacedRec>& placed, const std::vector<CandidateRec>& cands,
                              const AuctionSetup& setup, double gain, Stream& s, double competition = 0,
                              int n_mainline = 0);

// Click probability of each placed ad given positions and click-quality terms.
std::vector<double> click_probabilities(std::span<const int> positions, std::span<const double> betas,
                                        const AuctionSetup& setup, double gain, double competition = 0,
                                        int n_mainline = 0);

// Fill slate, prices, clicks and outcome fields of a record whose context,
// candidates and multipliers are set. Click noise comes from the page's
// substream, so replays at other multipliers are noise-coupled.
void run_auction(LogRecord& r, const World& w, const Policy& pol);

// Recompute the page at multiplier m, keeping every other draw fixed.
LogRecord replay(const LogRecord& r, const World& w, const Policy& pol, double m);

// Expected clicks per position of a slate given the page's intent.
double expected_clicks(const Slate& s, const std::vector<CandidateRec>& cands, const AuctionSetup& setup,
                       double gain, double competition = 0, int n_mainline = 0);
// Click probabilities of a slate's placements, in placement order.
std::vector<double> slate_click_probabilities(const Slate& s, const std::vector<CandidateRec>& cands,
                                              const AuctionSetup& setup, double gain, double competition = 0,
                                              int n_mainline = 0);

}  // namespace cfr
