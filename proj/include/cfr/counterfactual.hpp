#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cfr/bounds.hpp"
#include "cfr/logstore.hpp"
#include "cfr/world.hpp"
#include "json.hpp"

namespace cfr {

enum class ReweightPoint { ScoreLevel, SlateLevel, SlateAndClickedPrices };
const char* to_string(ReweightPoint p);
ReweightPoint reweight_point_from_string(const std::string& s);

enum class Metric { Clicks, MainlineAds, Revenue, AdValue };
const char* to_string(Metric m);
Metric metric_from_string(const std::string& s);
double metric_value(const LogRecord& r, Metric m);
// Upper end M of the range [0, M] of the metric.
double metric_range(const WorldConfig& cfg, Metric m);
const char* metric_field(Metric m);

struct ClipRule {
  enum class Kind { FifthLargest, Explicit };
  Kind kind = Kind::FifthLargest;
  double R = 0;
  static ClipRule fifth_largest() { return {}; }
  static ClipRule explicit_cap(double R) { return {Kind::Explicit, R}; }
};

// Counterfactual law of the controlled factors. rho holds either one value or
// one value per cluster (query-dependent reserves); alpha_by_cluster likewise
// overrides alpha when nonempty.
struct CounterfactualPolicy {
  std::vector<double> rho{1.0};
  double sigma = 0.3;
  double alpha = 1, alpha_sigma = 0;
  std::vector<double> alpha_by_cluster;

  static CounterfactualPolicy from(const Policy& p);
  static CounterfactualPolicy shifted(const Policy& p, double rho_star);
  double rho_for(int cluster) const;
  double alpha_for(int cluster) const;
  LogNormal reserve_law(int cluster) const { return {rho_for(cluster), sigma}; }
  nlohmann::json to_json() const;
};

// Columns needed to reweight; m_min/m_max may be absent.
struct Columns {
  std::vector<double> m, m_min, m_max, alpha;
  std::vector<int> cluster;
  bool has_interval = true;
  std::size_t size() const { return m.size(); }
};

Columns columns_of(std::span<const LogRecord> records);
std::vector<double> metric_column(std::span<const LogRecord> records, Metric m);

struct LoadedColumns {
  LogHeader header;
  Columns cols;
  std::vector<std::vector<double>> metrics;  // one column per requested metric
};
// Streams the log keeping only reweighting columns and the requested metrics.
LoadedColumns load_columns(const std::string& path, const std::vector<Metric>& metrics);

struct WeightOptions {
  bool serial = false;
};

std::vector<double> weights(const Columns& cols, const Policy& actual, const CounterfactualPolicy& cf,
                            ReweightPoint point, WeightOptions opt = {});
// Joint (slate, clicked prices) weights; needs full records.
std::vector<double> weights_slate_prices(std::span<const LogRecord> records, const World& w, const Policy& actual,
                                         const CounterfactualPolicy& cf);

struct Clipped {
  std::vector<double> w;
  double R = 0;
};
double resolve_clip(std::span<const double> w, const ClipRule& rule);
Clipped clip(std::span<const double> w, const ClipRule& rule);

struct Interval {
  double lo = 0, hi = 0;
};

struct CounterfactualEstimate {
  double Y_hat = 0, W_hat = 0;
  double R = 0, M = 0, delta = 0;
  double eps = 0, xi = 0;
  Interval outer, inner, final_;
  double inner_bias = 0;  // M (1 - W_hat + xi), clamped at 0 in the intervals
  bool clamped = false;
  std::size_t n = 0;
  BoundMethod method = BoundMethod::CLT;
  double confidence() const;  // 1 - 2 delta (CLT) or 1 - 3 delta (Bernstein)
  nlohmann::json to_json() const;
};

struct EstimateOptions {
  double M = 1;
  double delta = 0.025;
  BoundMethod method = BoundMethod::CLT;
  ClipRule clip;
};

CounterfactualEstimate estimate(std::span<const double> ell, std::span<const double> w, const EstimateOptions& opt);

// Predictor over invariant variables. Only declared fields are visible to fn.
struct InvariantView {
  double cluster = 0, commercialness = 0, intent = 0, inventory = 0;
  const std::vector<CandidateRec>* candidates = nullptr;
};

struct Predictor {
  std::vector<std::string> fields;
  std::function<double(const InvariantView&)> fn;

  static Predictor constant(double c);
};

// Throws InvalidPredictor unless every declared field is a non-descendant of
// the intervened score node.
void check_predictor(const Predictor& p);
std::vector<double> predict(const Predictor& p, std::span<const LogRecord> records);

struct DifferenceEstimate {
  double D_hat = 0;
  double eps = 0;
  double R_plus = 0, R_star = 0, M = 0, delta = 0;
  Interval outer, inner_offset, final_;
  std::size_t n = 0;
  BoundMethod method = BoundMethod::CLT;
  nlohmann::json to_json() const;
};

DifferenceEstimate estimate_difference(std::span<const double> ell, std::span<const double> zeta,
                                       std::span<const double> w_plus, std::span<const double> w_star,
                                       const EstimateOptions& opt);

struct DoublyRobustEstimate {
  double value = 0, eps = 0;
  Interval outer, final_;
  double W_hat = 0, R = 0, xi = 0;
  std::size_t n = 0;
};

// zeta: predictor on logged samples; zeta_star: its replay under the
// counterfactual (expected over the counterfactual law).
DoublyRobustEstimate doubly_robust(std::span<const double> ell, std::span<const double> zeta,
                                   std::span<const double> zeta_star, std::span<const double> w,
                                   const EstimateOptions& opt);

struct Extrapolation {
  double value = 0;
  Interval interval;
};
Extrapolation pointwise_extrapolate(const CounterfactualEstimate& nu, const CounterfactualEstimate& two_nu);

// Expectation over the reserve multiplier m ~ law of f(page replayed at m),
// by summing over the slate intervals of the page.
double expected_over_multiplier(const LogRecord& r, const World& w, const LogNormal& law, double alpha,
                                const std::function<double(const Slate&)>& f);

// Exact expectation of a slate-determined metric (clicks via click
// probabilities, mainline count, ad value) over m ~ law for the page's
// exogenous draws.
double expected_metric(const LogRecord& r, const World& w, const LogNormal& law, double alpha, Metric m);

}  // namespace cfr
