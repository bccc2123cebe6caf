#include "cfr/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cfr/error.hpp"
#include "cfr/parallel.hpp"
#include "cfr/special.hpp"

namespace cfr {

using nlohmann::json;

const char* to_string(ReweightPoint p) {
  switch (p) {
    case ReweightPoint::ScoreLevel: return "score";
    case ReweightPoint::SlateLevel: return "slate";
    case ReweightPoint::SlateAndClickedPrices: return "slate-prices";
  }
  return "?";
}

ReweightPoint reweight_point_from_string(const std::string& s) {
  if (s == "score") return ReweightPoint::ScoreLevel;
  if (s == "slate") return ReweightPoint::SlateLevel;
  if (s == "slate-prices") return ReweightPoint::SlateAndClickedPrices;
  throw Error(ErrorCode::InvalidArgument, "unknown reweighting point '" + s + "'");
}

const char* to_string(Metric m) {
  switch (m) {
    case Metric::Clicks: return "clicks";
    case Metric::MainlineAds: return "mainline";
    case Metric::Revenue: return "revenue";
    case Metric::AdValue: return "value";
  }
  return "?";
}

Metric metric_from_string(const std::string& s) {
  if (s == "clicks") return Metric::Clicks;
  if (s == "mainline") return Metric::MainlineAds;
  if (s == "revenue") return Metric::Revenue;
  if (s == "value") return Metric::AdValue;
  throw Error(ErrorCode::InvalidArgument, "unknown metric '" + s + "'");
}

const char* metric_field(Metric m) {
  switch (m) {
    case Metric::Clicks: return "clicks";
    case Metric::MainlineAds: return "mainline_ads";
    case Metric::Revenue: return "revenue";
    case Metric::AdValue: return "ad_value";
  }
  return "?";
}

double metric_value(const LogRecord& r, Metric m) {
  switch (m) {
    case Metric::Clicks: return r.clicks;
    case Metric::MainlineAds: return r.mainline_ads;
    case Metric::Revenue: return r.revenue;
    case Metric::AdValue: return r.ad_value;
  }
  return 0;
}

double metric_range(const WorldConfig& cfg, Metric m) {
  switch (m) {
    case Metric::Clicks: return cfg.n_positions();
    case Metric::MainlineAds: return static_cast<double>(cfg.gamma_mainline.size());
    case Metric::Revenue: return cfg.n_positions() * cfg.max_bid();
    case Metric::AdValue: return cfg.n_positions() * cfg.max_value();
  }
  return 0;
}

CounterfactualPolicy CounterfactualPolicy::from(const Policy& p) {
  return {{p.rho}, p.sigma, p.alpha, p.alpha_sigma, {}};
}

CounterfactualPolicy CounterfactualPolicy::shifted(const Policy& p, double rho_star) {
  auto c = from(p);
  c.rho = {rho_star};
  return c;
}

double CounterfactualPolicy::rho_for(int cluster) const {
  if (rho.size() == 1) return rho[0];
  if (cluster < 0 || cluster >= static_cast<int>(rho.size()))
    throw Error(ErrorCode::InvalidArgument, "no counterfactual reserve for cluster " + std::to_string(cluster));
  return rho[cluster];
}

double CounterfactualPolicy::alpha_for(int cluster) const {
  if (alpha_by_cluster.empty()) return alpha;
  if (cluster < 0 || cluster >= static_cast<int>(alpha_by_cluster.size()))
    throw Error(ErrorCode::InvalidArgument, "no counterfactual exponent for cluster " + std::to_string(cluster));
  return alpha_by_cluster[cluster];
}

json CounterfactualPolicy::to_json() const {
  json j = {{"rho", rho}, {"sigma", sigma}, {"alpha", alpha}, {"alpha_sigma", alpha_sigma}};
  if (!alpha_by_cluster.empty()) j["alpha_by_cluster"] = alpha_by_cluster;
  return j;
}

Columns columns_of(std::span<const LogRecord> records) {
  Columns c;
  std::size_t n = records.size();
  c.m.resize(n);
  c.m_min.resize(n);
  c.m_max.resize(n);
  c.alpha.resize(n);
  c.cluster.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[i];
    c.m[i] = r.m;
    c.m_min[i] = r.m_min;
    c.m_max[i] = r.m_max;
    c.alpha[i] = r.alpha;
    c.cluster[i] = r.cluster;
  }
  return c;
}

std::vector<double> metric_column(std::span<const LogRecord> records, Metric m) {
  std::vector<double> v(records.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = metric_value(records[i], m);
  return v;
}

LoadedColumns load_columns(const std::string& path, const std::vector<Metric>& metrics) {
  std::set<std::string> proj = {"m", "m_min", "m_max", "alpha", "cluster"};
  for (auto m : metrics) proj.insert(metric_field(m));
  LogReader rd(path, proj);
  LoadedColumns out;
  out.header = rd.header();
  auto& c = out.cols;
  std::size_t n = out.header.n;
  c.m.reserve(n);
  c.m_min.reserve(n);
  c.m_max.reserve(n);
  c.alpha.reserve(n);
  c.cluster.reserve(n);
  out.metrics.assign(metrics.size(), {});
  for (auto& v : out.metrics) v.reserve(n);
  LogRecord r;
  while (rd.next(r)) {
    c.m.push_back(r.m);
    c.m_min.push_back(r.m_min);
    c.m_max.push_back(r.m_max);
    c.alpha.push_back(r.alpha);
    c.cluster.push_back(r.cluster);
    for (std::size_t k = 0; k < metrics.size(); ++k) out.metrics[k].push_back(metric_value(r, metrics[k]));
  }
  return out;
}

namespace {

double normal_logpdf(double x, double mu, double sd) {
  double z = (x - mu) / sd;
  return -0.5 * z * z - std::log(sd);
}

struct WeightFn {
  const Columns& cols;
  Policy actual;
  CounterfactualPolicy cf;
  ReweightPoint point;
  bool reserve_changes = false, alpha_changes = false;

  WeightFn(const Columns& c, const Policy& a, const CounterfactualPolicy& f, ReweightPoint p)
      : cols(c), actual(a), cf(f), point(p) {
    for (double r : cf.rho) reserve_changes |= r != actual.rho;
    reserve_changes |= cf.sigma != actual.sigma;
    alpha_changes = cf.alpha != actual.alpha || cf.alpha_sigma != actual.alpha_sigma;
    for (double a : cf.alpha_by_cluster) alpha_changes |= a != actual.alpha;
    if (!(cf.sigma >= 0)) throw Error(ErrorCode::InvalidArgument, "counterfactual sigma must be >= 0");
    for (double r : cf.rho)
      if (!(r > 0)) throw Error(ErrorCode::InvalidArgument, "counterfactual rho must be > 0");
    if (point == ReweightPoint::ScoreLevel) {
      if (reserve_changes && (actual.sigma == 0 || cf.sigma == 0))
        throw Error(ErrorCode::ZeroDenominator, "score-level reweighting needs randomized reserve multipliers");
      if (alpha_changes && (actual.alpha_sigma == 0 || cf.alpha_sigma == 0))
        throw Error(ErrorCode::ZeroDenominator, "score-level reweighting of alpha needs randomized exponents");
    } else if (point == ReweightPoint::SlateLevel) {
      if (alpha_changes)
        throw Error(ErrorCode::InvalidArgument, "slate intervals only cover reserve changes; use the score level");
      if (!cols.has_interval) throw Error(ErrorCode::MissingSlateInterval, "records lack [m_min, m_max]");
    } else {
      throw Error(ErrorCode::InvalidArgument, "slate-and-prices weights need full records");
    }
  }

  double operator()(std::size_t i) const {
    double w = 1;
    int k = cols.cluster[i];
    if (point == ReweightPoint::ScoreLevel) {
      if (reserve_changes) {
        double m = cols.m[i];
        w *= std::exp(cf.reserve_law(k).log_pdf(m) - actual.reserve_law().log_pdf(m));
      }
      if (alpha_changes) {
        double a = cols.alpha[i];
        w *= std::exp(normal_logpdf(a, cf.alpha_for(k), cf.alpha_sigma) - normal_logpdf(a, actual.alpha, actual.alpha_sigma));
      }
      return w;
    }
    if (!reserve_changes) return 1.0;
    double lo = cols.m_min[i], hi = cols.m_max[i];
    if (std::isnan(lo) || std::isnan(hi)) throw Error(ErrorCode::MissingSlateInterval, "record " + std::to_string(i));
    if (lo == 0 && std::isinf(hi)) return 1.0;
    double den = actual.reserve_law().mass(lo, hi);
    double num = cf.reserve_law(k).mass(lo, hi);
    if (!(den > 0)) {
      if (num > 0) throw Error(ErrorCode::ZeroDenominator, "record " + std::to_string(i) + " has zero logged mass");
      return 0.0;
    }
    return num / den;
  }
};

}  // namespace

std::vector<double> weights(const Columns& cols, const Policy& actual, const CounterfactualPolicy& cf,
                            ReweightPoint point, WeightOptions opt) {
  WeightFn f(cols, actual, cf, point);
  std::size_t n = cols.size();
  std::vector<double> w(n);
  if (opt.serial) {
    for (std::size_t i = 0; i < n; ++i) w[i] = f(i);
  } else {
    parallel_for(n, [&](std::size_t i) { w[i] = f(i); }, 4096);
  }
  return w;
}

namespace {

// Clicked prices of the page replayed at m, as critical scores.
std::vector<double> clicked_crit(const LogRecord& r, const PreparedAuction& pa, int layout, double m) {
  Slate s = pa.slate_for_layout(layout);
  auto crit = gsp_critical_scores(s, pa, m);
  std::vector<double> out;
  for (std::size_t j = 0; j < s.placed.size(); ++j)
    if (r.placed[j].clicked) out.push_back(crit[j]);
  return out;
}

bool same_prices(const std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t j = 0; j < a.size(); ++j)
    if (std::abs(a[j] - b[j]) > 1e-12 * std::max(1.0, std::abs(b[j]))) return false;
  return true;
}

}  // namespace

std::vector<double> weights_slate_prices(std::span<const LogRecord> records, const World& w, const Policy& actual,
                                         const CounterfactualPolicy& cf) {
  if (cf.alpha != actual.alpha || cf.alpha_sigma != actual.alpha_sigma || !cf.alpha_by_cluster.empty())
    throw Error(ErrorCode::InvalidArgument, "slate-and-prices point only covers reserve changes");
  std::vector<double> out(records.size(), 1.0);
  LogNormal act = actual.reserve_law();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    LogNormal q = cf.reserve_law(r.cluster);
    if (q == act) continue;
    if (r.m_min == 0 && std::isinf(r.m_max)) continue;
    auto bidders = bidders_of(r, r.alpha);
    PreparedAuction pa(bidders, w.setup(r.cluster));
    auto obs = clicked_crit(r, pa, r.layout, r.m);
    // Clicked prices are monotone in m within a slate interval; find the
    // sub-interval on which they stay at their observed values.
    auto same_at = [&](double m) { return same_prices(clicked_crit(r, pa, r.layout, m), obs); };
    double lo = r.m_min, hi = r.m_max;
    bool pinned = false;
    {
      double step = r.m * 1e-7;
      bool below = r.m - step > lo && same_at(r.m - step);
      bool above = r.m + step <= hi && same_at(std::min(hi, r.m + step));
      pinned = !below && !above && !obs.empty();
    }
    if (pinned) {
      if (!(actual.sigma > 0)) throw Error(ErrorCode::ZeroDenominator, "reserve-bound price needs a multiplier density");
      out[i] = q.sigma > 0 ? std::exp(q.log_pdf(r.m) - act.log_pdf(r.m)) : 0.0;
      continue;
    }
    if (!obs.empty()) {
      double a = r.m, b = lo;  // a keeps prices, b does not (or is the boundary)
      if (lo > 0 && !same_at(lo * (1 + 1e-12))) {
        for (int it = 0; it < 100 && (a - b) > 1e-13 * a; ++it) {
          double c = 0.5 * (a + b);
          (same_at(c) ? a : b) = c;
        }
        lo = b;
      }
      a = r.m;
      if (std::isinf(hi)) {
        double probe = r.m;
        while (same_at(probe * 2) && probe < 1e12) probe *= 2;
        b = probe * 2;
        if (probe < 1e12) {
          a = probe;
          for (int it = 0; it < 100 && (b - a) > 1e-13 * b; ++it) {
            double c = 0.5 * (a + b);
            (same_at(c) ? a : b) = c;
          }
          hi = a;
        }
      } else if (!same_at(hi)) {
        b = hi;
        for (int it = 0; it < 100 && (b - a) > 1e-13 * b; ++it) {
          double c = 0.5 * (a + b);
          (same_at(c) ? a : b) = c;
        }
        hi = a;
      }
    }
    double den = act.mass(lo, hi);
    double num = q.mass(lo, hi);
    if (!(den > 0)) throw Error(ErrorCode::ZeroDenominator, "record " + std::to_string(i));
    out[i] = num / den;
  }
  return out;
}

double resolve_clip(std::span<const double> w, const ClipRule& rule) {
  if (rule.kind == ClipRule::Kind::Explicit) {
    if (!(rule.R > 0)) throw Error(ErrorCode::InvalidArgument, "clip level must be positive");
    return rule.R;
  }
  if (w.size() < 5) throw Error(ErrorCode::TooFewSamples, "fifth-largest clipping needs at least 5 weights");
  std::vector<double> c(w.begin(), w.end());
  std::nth_element(c.begin(), c.begin() + 4, c.end(), std::greater<double>());
  double R = c[4];
  if (R <= 1) {
    double mx = *std::max_element(w.begin(), w.end());
    R = std::nextafter(std::max(mx, 1.0), kInf);
  }
  return R;
}

Clipped clip(std::span<const double> w, const ClipRule& rule) {
  Clipped out;
  out.R = resolve_clip(w, rule);
  out.w.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out.w[i] = w[i] < out.R ? w[i] : 0.0;
  return out;
}

double CounterfactualEstimate::confidence() const {
  return method == BoundMethod::CLT ? 1 - 2 * delta : 1 - 3 * delta;
}

namespace {
json interval_json(const Interval& i) { return json::array({i.lo, i.hi}); }
}  // namespace

json CounterfactualEstimate::to_json() const {
  return {{"Y_hat", Y_hat},
          {"W_hat", W_hat},
          {"R", R},
          {"M", M},
          {"delta", delta},
          {"eps_R", eps},
          {"xi_R", xi},
          {"outer", interval_json(outer)},
          {"inner", interval_json(inner)},
          {"final", interval_json(final_)},
          {"inner_bias", inner_bias},
          {"clamped", clamped},
          {"n", n},
          {"method", cfr::to_string(method)},
          {"confidence", confidence()}};
}

CounterfactualEstimate estimate(std::span<const double> ell, std::span<const double> w, const EstimateOptions& opt) {
  std::size_t n = ell.size();
  if (w.size() != n) throw Error(ErrorCode::InvalidArgument, "ell and weights differ in length");
  if (n < 2) throw Error(ErrorCode::TooFewSamples, "need at least 2 records");
  if (opt.method == BoundMethod::Bernstein && n < 16)
    throw Error(ErrorCode::TooFewSamples, "Bernstein bounds need n >= 16");
  for (std::size_t i = 0; i < n; ++i)
    if (!(ell[i] >= 0 && ell[i] <= opt.M))
      throw Error(ErrorCode::RangeViolation, "record " + std::to_string(i) + " has ell outside [0, M]");
  Clipped c = clip(w, opt.clip);
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = ell[i] * c.w[i];

  CounterfactualEstimate e;
  e.n = n;
  e.R = c.R;
  e.M = opt.M;
  e.delta = opt.delta;
  e.method = opt.method;
  e.Y_hat = mean(f);
  e.W_hat = mean(c.w);
  double vf = sample_variance(f);
  e.eps = opt.method == BoundMethod::CLT ? clt_eps(vf, n, opt.delta) : bernstein_eps(vf, n, opt.M * c.R, opt.delta);
  e.xi = inner_slack(c.w, c.R, opt.delta);
  double gap = 1 - e.W_hat + e.xi;
  e.inner_bias = opt.M * gap;
  e.clamped = gap < 0;
  double bias = opt.M * std::max(gap, 0.0);
  e.outer = {e.Y_hat - e.eps, e.Y_hat + e.eps};
  e.inner = {e.Y_hat, e.Y_hat + bias};
  e.final_ = {e.Y_hat - e.eps, e.Y_hat + bias + e.eps};
  return e;
}

Predictor Predictor::constant(double c) {
  return {{}, [c](const InvariantView&) { return c; }};
}

void check_predictor(const Predictor& p) {
  // Fields map to nodes u (intent), x (cluster, commercialness), v (inventory)
  // and a/b (candidates); none descends from the score node q.
  static const std::set<std::string> invariant = {"cluster", "commercialness", "intent", "inventory", "candidates"};
  for (const auto& f : p.fields)
    if (!invariant.count(f))
      throw Error(ErrorCode::InvalidPredictor, "field '" + f + "' depends on the intervened scores");
  if (!p.fn) throw Error(ErrorCode::InvalidPredictor, "predictor has no function");
}

std::vector<double> predict(const Predictor& p, std::span<const LogRecord> records) {
  check_predictor(p);
  std::set<std::string> decl(p.fields.begin(), p.fields.end());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> z(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    InvariantView v;
    v.cluster = decl.count("cluster") ? r.cluster : nan;
    v.commercialness = decl.count("commercialness") ? r.commercialness : nan;
    v.intent = decl.count("intent") ? r.intent : nan;
    v.inventory = decl.count("inventory") ? r.inventory : nan;
    v.candidates = decl.count("candidates") ? &r.candidates : nullptr;
    z[i] = p.fn(v);
  }
  return z;
}

json DifferenceEstimate::to_json() const {
  return {{"D_hat", D_hat},       {"eps", eps},
          {"R_plus", R_plus},     {"R_star", R_star},
          {"M", M},               {"delta", delta},
          {"outer", interval_json(outer)}, {"inner_offset", interval_json(inner_offset)},
          {"final", interval_json(final_)}, {"n", n},
          {"method", cfr::to_string(method)}};
}

DifferenceEstimate estimate_difference(std::span<const double> ell, std::span<const double> zeta,
                                       std::span<const double> w_plus, std::span<const double> w_star,
                                       const EstimateOptions& opt) {
  std::size_t n = ell.size();
  if (zeta.size() != n || w_plus.size() != n || w_star.size() != n)
    throw Error(ErrorCode::InvalidArgument, "size mismatch in estimate_difference");
  if (n < 16) throw Error(ErrorCode::TooFewSamples, "need n >= 16");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(ell[i] >= 0 && ell[i] <= opt.M)) throw Error(ErrorCode::RangeViolation, "ell outside [0, M]");
    if (!(zeta[i] >= 0 && zeta[i] <= opt.M)) throw Error(ErrorCode::RangeViolation, "predictor outside [0, M]");
  }
  Clipped cp = clip(w_plus, opt.clip), cs = clip(w_star, opt.clip);
  std::vector<double> f(n), lo(n), hi(n), ellc(n);
  for (std::size_t i = 0; i < n; ++i) {
    f[i] = (ell[i] - zeta[i]) * (cp.w[i] - cs.w[i]);
    lo[i] = -zeta[i];
    hi[i] = opt.M - zeta[i];
    ellc[i] = ell[i] - zeta[i];
  }
  DifferenceEstimate d;
  d.n = n;
  d.R_plus = cp.R;
  d.R_star = cs.R;
  d.M = opt.M;
  d.delta = opt.delta;
  d.method = opt.method;
  d.D_hat = mean(f);
  double v = sample_variance(f);
  double R = std::max(cp.R, cs.R);
  d.eps = opt.method == BoundMethod::CLT ? clt_eps(v, n, opt.delta) : bernstein_eps(v, n, 2 * opt.M * R, opt.delta);
  auto bp = upsilon_inner_bounds(cp.w, lo, hi, cp.R, opt.delta, ellc);
  auto bs = upsilon_inner_bounds(cs.w, lo, hi, cs.R, opt.delta, ellc);
  d.inner_offset = {bp.lo - bs.hi, bp.hi - bs.lo};
  d.outer = {d.D_hat - d.eps, d.D_hat + d.eps};
  d.final_ = {d.D_hat - d.eps + d.inner_offset.lo, d.D_hat + d.eps + d.inner_offset.hi};
  return d;
}

DoublyRobustEstimate doubly_robust(std::span<const double> ell, std::span<const double> zeta,
                                   std::span<const double> zeta_star, std::span<const double> w,
                                   const EstimateOptions& opt) {
  std::size_t n = ell.size();
  if (zeta.size() != n || zeta_star.size() != n || w.size() != n)
    throw Error(ErrorCode::InvalidArgument, "size mismatch in doubly_robust");
  if (n < 2) throw Error(ErrorCode::TooFewSamples, "need at least 2 records");
  double zmax = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(ell[i] >= 0 && ell[i] <= opt.M)) throw Error(ErrorCode::RangeViolation, "ell outside [0, M]");
    if (!(zeta[i] >= 0 && zeta[i] <= opt.M) || !(zeta_star[i] >= 0 && zeta_star[i] <= opt.M))
      throw Error(ErrorCode::RangeViolation, "predictor outside [0, M]");
    zmax = std::max(zmax, zeta[i]);
  }
  Clipped c = clip(w, opt.clip);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = zeta_star[i] + (ell[i] - zeta[i]) * c.w[i];
  DoublyRobustEstimate e;
  e.n = n;
  e.R = c.R;
  e.value = mean(d);
  e.W_hat = mean(c.w);
  double v = sample_variance(d);
  e.eps = opt.method == BoundMethod::CLT ? clt_eps(v, n, opt.delta)
                                         : bernstein_eps(v, n, opt.M + (opt.M + zmax) * c.R, opt.delta);
  e.xi = inner_slack(c.w, c.R, opt.delta);
  double gap = std::max(1 - e.W_hat + e.xi, 0.0);
  e.outer = {e.value - e.eps, e.value + e.eps};
  e.final_ = {e.value - e.eps - zmax * gap, e.value + e.eps + opt.M * gap};
  return e;
}

Extrapolation pointwise_extrapolate(const CounterfactualEstimate& nu, const CounterfactualEstimate& two_nu) {
  Extrapolation x;
  x.value = 2 * nu.Y_hat - two_nu.Y_hat;
  x.interval = {2 * nu.final_.lo - two_nu.final_.hi, 2 * nu.final_.hi - two_nu.final_.lo};
  return x;
}

double expected_over_multiplier(const LogRecord& r, const World& w, const LogNormal& law, double alpha,
                                const std::function<double(const Slate&)>& f) {
  auto bidders = bidders_of(r, alpha);
  PreparedAuction pa(bidders, w.setup(r.cluster));
  double e = 0;
  for (const auto& iv : pa.intervals()) {
    double p = law.mass(iv.lo, iv.hi);
    if (p > 0) e += p * f(pa.slate_for_layout(iv.layout));
  }
  return e;
}

double expected_metric(const LogRecord& r, const World& w, const LogNormal& law, double alpha, Metric metric) {
  const auto& setup = w.setup(r.cluster);
  double gain = intent_gain(r.intent);
  double kappa = w.config().click_competition;
  int nm = w.n_mainline();
  if (metric == Metric::Revenue) {
    // Prices move with m where the reserve binds: midpoint rule on the
    // probability scale inside each slate interval.
    auto bidders = bidders_of(r, alpha);
    PreparedAuction pa(bidders, setup);
    double e = 0;
    const int K = 64;
    for (const auto& iv : pa.intervals()) {
      Slate s = pa.slate_for_layout(iv.layout);
      if (s.placed.empty()) continue;
      double a = law.cdf(iv.lo), b = law.cdf(iv.hi);
      if (!(b > a)) continue;
      auto click = slate_click_probabilities(s, r.candidates, setup, gain, kappa, nm);
      double acc = 0;
      for (int k = 0; k < K; ++k) {
        double u = a + (b - a) * (k + 0.5) / K;
        double m = law.sigma > 0 ? std::exp(law.mu() + law.sigma * normal_quantile(u)) : law.rho;
        // Round-off can push m out of a very narrow interval.
        if (m <= iv.lo) m = std::nextafter(iv.lo, kInf);
        if (m > iv.hi) m = iv.hi;
        auto crit = gsp_critical_scores(s, pa, m);
        for (std::size_t j = 0; j < s.placed.size(); ++j) {
          const auto& c = r.candidates[s.placed[j].bidder];
          acc += click[j] * crit[j] / (std::pow(c.beta, alpha) * c.bid_mult);
        }
      }
      e += (b - a) * acc / K;
    }
    return e;
  }
  return expected_over_multiplier(r, w, law, alpha, [&](const Slate& s) {
    double v = 0;
    auto click = slate_click_probabilities(s, r.candidates, setup, gain, kappa, nm);
    for (std::size_t j = 0; j < s.placed.size(); ++j) {
      const auto& p = s.placed[j];
      switch (metric) {
        case Metric::Clicks: v += click[j]; break;
        case Metric::MainlineAds: v += p.position < nm ? 1 : 0; break;
        case Metric::AdValue: v += click[j] * r.candidates[p.bidder].value; break;
        default: break;
      }
    }
    return v;
  });
}

}  // namespace cfr
