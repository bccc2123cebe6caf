#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfr/counterfactual.hpp"
#include "cfr/world.hpp"
#include "json.hpp"

namespace cfr {

// On-policy derivatives of an advertiser's expected clicks Y_a and cost Z_a per
// page with respect to its bid, from logs with per-ad bid multipliers.
struct BidDerivatives {
  int advertiser = 0;
  double bid = 0;
  std::size_t impressions = 0;
  double dY = 0, dY_se = 0, dZ = 0, dZ_se = 0, cov = 0;  // cov of the two means
  bool score_interpretation = true;  // cost ledger the Z derivative was taken on
};

inline constexpr std::size_t kMinImpressions = 1000;

// Throws InsufficientExposure below the impression floor.
BidDerivatives bid_derivative_estimates(std::span<const LogRecord> records, const Policy& pol, int advertiser,
                                        std::size_t min_impressions = kMinImpressions);
std::vector<int> advertisers_in(std::span<const LogRecord> records);

enum class AdvertiserStatus { Interior, AtZero, AtCap, Insufficient };
const char* to_string(AdvertiserStatus s);

struct AdvertiserModel {
  int advertiser = 0;
  double bid = 0, bid_max = 0;
  double value = 0, value_se = 0;  // a lower bound only when AtCap
  AdvertiserStatus status = AdvertiserStatus::Insufficient;
  std::size_t impressions = 0;
  bool active = false;  // usable in the response system
};

// V = (dZ/db) / (dY/db), the ratio implied by the first-order condition
// V dY/db - dZ/db = 0.
std::vector<AdvertiserModel> estimate_values(const std::vector<BidDerivatives>& table, double bid_max,
                                             std::size_t min_impressions = kMinImpressions);

// Second derivatives for the response system, theta = reserve location rho.
// Row a' and column a hold d2(.)_{a'} / db_{a'} db_a.
struct SecondDerivatives {
  std::vector<int> advertisers;
  Eigen::MatrixXd d2Y, d2Z;
  Eigen::VectorXd d2Y_theta, d2Z_theta;
};
SecondDerivatives second_derivative_estimates(std::span<const LogRecord> records, const Policy& pol,
                                              const std::vector<int>& advertisers);

struct EquilibriumResponse {
  std::vector<int> advertisers;
  Eigen::MatrixXd A;
  Eigen::VectorXd r, xi;  // db_a = xi_a dtheta
  double condition = 0;
  bool singular = false;
  nlohmann::json to_json() const;
};

inline constexpr double kSingularCondition = 1e6;

// Solves A xi = -r after scaling rows to unit max-norm; throws SingularSystem
// when the condition number exceeds the threshold.
EquilibriumResponse solve_response(const SecondDerivatives& d, const std::vector<double>& values,
                                   double max_condition = kSingularCondition);
EquilibriumResponse solve_response(const Eigen::MatrixXd& A, const Eigen::VectorXd& r,
                                   std::vector<int> advertisers, double max_condition = kSingularCondition);

struct TotalDerivative {
  double partial_theta = 0, partial_theta_se = 0;
  std::vector<double> partial_bid, partial_bid_se;
  double value = 0, se = 0;  // errors combined ignoring correlations
  nlohmann::json to_json() const;
};

TotalDerivative total_derivative(std::span<const LogRecord> records, const Policy& pol,
                                 const EquilibriumResponse& response, Metric metric);

// Best-response iteration on expected utilities over a fixed sample of pages
// (common random numbers). Each advertiser's own bid multiplier is integrated
// exactly; the allocation is piecewise constant in its effective bid.
struct NashOptions {
  std::size_t pages = 20000;
  std::uint64_t seed = 7;
  double tolerance = 1e-3;
  int max_iterations = 200;
  int grid = 200;  // coarse bid grid per best response
};

struct NashResult {
  std::vector<double> bids;
  int iterations = 0;
  bool quasiconcave = true;
};

// Advertisers, values and starting bids come from cfg.advertisers.
NashResult nash_oracle(const WorldConfig& cfg, const Policy& pol, const NashOptions& opt = {});

// Exact per-page expectations of one advertiser's clicks, cost and utility
// under the oracle's page sample, with the other bids held fixed.
class OracleMarket {
 public:
  OracleMarket(const WorldConfig& cfg, const Policy& pol, std::size_t pages, std::uint64_t seed);
  void set_bids(const std::vector<double>& bids);
  const std::vector<double>& bids() const { return bids_; }

  struct Curve {
    double clicks = 0, cost = 0;
  };
  // Expected clicks and cost of advertiser slot k at bid b, others fixed.
  Curve curve(int k, double b) const;
  double utility(int k, double b) const;
  double best_response(int k, int grid, bool* quasiconcave = nullptr) const;
  // Expected metric per page at the current bids, multiplier integrated over
  // the reserve law; remaining draws from the page sample.
  double expected_metric(Metric metric) const;

  const WorldConfig& config() const { return world_.config(); }

 private:
  struct Piece {
    double lo, hi;  // effective-bid interval
    double click;   // click probability
    double price;   // critical score over beta^alpha
  };
  void rebuild(int k) const;

  World world_;
  Policy pol_;
  std::vector<LogRecord> pages_;
  std::vector<double> bids_;
  mutable int built_ = -1;
  mutable std::vector<Piece> pieces_;
};

}  // namespace cfr
