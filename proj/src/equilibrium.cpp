#include "cfr/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "cfr/error.hpp"
#include "cfr/parallel.hpp"
#include "cfr/special.hpp"

namespace cfr {

using nlohmann::json;

namespace {

// Per-page view of one advertiser: its candidate, effective bid and score.
struct AdView {
  int cand = -1;
  double bid = 0, mult = 1;
  bool placed = false, clicked = false;
  double price = 0, charged = 0;
};

AdView view_of(const LogRecord& r, int advertiser) {
  AdView v;
  for (std::size_t c = 0; c < r.candidates.size(); ++c)
    if (r.candidates[c].advertiser == advertiser) {
      v.cand = static_cast<int>(c);
      v.bid = r.candidates[c].bid;
      v.mult = r.candidates[c].bid_mult;
      break;
    }
  if (v.cand < 0) return v;
  for (const auto& p : r.placed)
    if (p.candidate == v.cand) {
      v.placed = true;
      v.clicked = p.clicked;
      v.price = p.price;
      v.charged = p.charged;
    }
  return v;
}

// Score of the effective bid e = b * mult under LogNormal(b, bid_sigma), and
// its second derivative, with respect to b.
struct BidScore {
  double s = 0, d2 = 0;
};

BidScore bid_score(const AdView& v, double bid_sigma) {
  if (v.cand < 0) return {};
  LogNormal law{v.bid, bid_sigma};
  double e = v.bid * v.mult;
  return {law.dlog_drho(e), law.d2log_drho2(e)};
}

double mean_of(const std::vector<double>& x) { return mean(x); }

double covariance(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = mean(a), mb = mean(b);
  std::vector<double> p(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) p[i] = (a[i] - ma) * (b[i] - mb);
  return pairwise_sum(p) / (a.size() - 1.0);
}

void require_bid_randomization(const Policy& pol) {
  if (!(pol.bid_sigma > 0))
    throw Error(ErrorCode::InvalidArgument, "bid derivatives need logs with per-ad bid multipliers");
}

}  // namespace

std::vector<int> advertisers_in(std::span<const LogRecord> records) {
  std::set<int> s;
  for (const auto& r : records)
    for (const auto& c : r.candidates) s.insert(c.advertiser);
  return {s.begin(), s.end()};
}

BidDerivatives bid_derivative_estimates(std::span<const LogRecord> records, const Policy& pol, int advertiser,
                                        std::size_t min_impressions) {
  require_bid_randomization(pol);
  std::size_t n = records.size();
  if (n < 2) throw Error(ErrorCode::TooFewSamples, "need at least 2 records");
  std::vector<double> y(n), z(n);
  BidDerivatives d;
  d.advertiser = advertiser;
  d.score_interpretation = pol.score_interpretation;
  for (std::size_t i = 0; i < n; ++i) {
    AdView v = view_of(records[i], advertiser);
    if (v.cand >= 0) d.bid = v.bid;
    if (v.placed) ++d.impressions;
    BidScore s = bid_score(v, pol.bid_sigma);
    double c = v.clicked ? 1.0 : 0.0;
    y[i] = c * s.s;
    if (pol.score_interpretation) {
      // Z = b G(b) with G = E[charged / b] a function of the effective bids.
      double h = v.bid > 0 ? c * v.charged / v.bid : 0.0;
      z[i] = h * (1 + v.bid * s.s);
    } else {
      z[i] = c * v.price * s.s;
    }
  }
  if (d.impressions < min_impressions)
    throw Error(ErrorCode::InsufficientExposure, "advertiser " + std::to_string(advertiser) + " has " +
                                                     std::to_string(d.impressions) + " impressions");
  d.dY = mean(y);
  d.dZ = mean(z);
  d.dY_se = std::sqrt(sample_variance(y) / n);
  d.dZ_se = std::sqrt(sample_variance(z) / n);
  d.cov = covariance(y, z) / n;
  return d;
}

const char* to_string(AdvertiserStatus s) {
  switch (s) {
    case AdvertiserStatus::Interior: return "interior";
    case AdvertiserStatus::AtZero: return "at-zero";
    case AdvertiserStatus::AtCap: return "at-cap";
    case AdvertiserStatus::Insufficient: return "insufficient";
  }
  return "?";
}

std::vector<AdvertiserModel> estimate_values(const std::vector<BidDerivatives>& table, double bid_max,
                                             std::size_t min_impressions) {
  std::vector<AdvertiserModel> out;
  for (const auto& d : table) {
    AdvertiserModel m;
    m.advertiser = d.advertiser;
    m.bid = d.bid;
    m.bid_max = bid_max;
    m.impressions = d.impressions;
    if (d.bid <= 0) {
      m.status = AdvertiserStatus::AtZero;
    } else if (!(d.dY > 0) || std::abs(d.dY) <= d.dY_se) {
      m.status = AdvertiserStatus::Insufficient;
    } else {
      m.value = d.dZ / d.dY;
      double rz = d.dZ != 0 ? d.dZ_se / d.dZ : 0, ry = d.dY_se / d.dY;
      double cross = d.dZ != 0 ? 2 * d.cov / (d.dZ * d.dY) : 0;
      m.value_se = std::abs(m.value) * std::sqrt(std::max(rz * rz + ry * ry - cross, 0.0));
      if (d.bid >= bid_max * (1 - 1e-12)) m.status = AdvertiserStatus::AtCap;
      else if (m.value < 0) m.status = AdvertiserStatus::Insufficient;
      else m.status = AdvertiserStatus::Interior;
    }
    m.active = m.status == AdvertiserStatus::Interior && d.impressions >= min_impressions &&
               d.dY_se < 0.5 * std::abs(d.dY) && d.dZ_se < 0.5 * std::abs(d.dZ);
    out.push_back(m);
  }
  return out;
}

SecondDerivatives second_derivative_estimates(std::span<const LogRecord> records, const Policy& pol,
                                              const std::vector<int>& advertisers) {
  require_bid_randomization(pol);
  if (!(pol.sigma > 0)) throw Error(ErrorCode::ZeroDenominator, "reserve derivatives need sigma > 0");
  std::size_t n = records.size(), k = advertisers.size();
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "no advertisers");
  if (n < 2) throw Error(ErrorCode::TooFewSamples, "need at least 2 records");
  LogNormal reserve = pol.reserve_law();
  std::vector<double> bids(k, 0.0);
  // Integrand columns: per (a', a) for Y and G, per a' for theta terms.
  std::vector<std::vector<double>> yy(k * k, std::vector<double>(n)), gg(k * k, std::vector<double>(n));
  std::vector<std::vector<double>> g1(k * k, std::vector<double>(n));  // G_a for row a'
  std::vector<std::vector<double>> yt(k, std::vector<double>(n)), gt(k, std::vector<double>(n)),
      g0t(k, std::vector<double>(n));
  std::vector<AdView> v(k);
  std::vector<BidScore> s(k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[i];
    double st = reserve.dlog_drho(r.m);
    for (std::size_t a = 0; a < k; ++a) {
      v[a] = view_of(r, advertisers[a]);
      if (v[a].cand >= 0) bids[a] = v[a].bid;
      s[a] = bid_score(v[a], pol.bid_sigma);
    }
    for (std::size_t p = 0; p < k; ++p) {
      double c = v[p].clicked ? 1.0 : 0.0;
      double h = 0;
      if (pol.score_interpretation) h = v[p].bid > 0 ? c * v[p].charged / v[p].bid : 0.0;
      else h = c * v[p].price;
      for (std::size_t a = 0; a < k; ++a) {
        double prod = s[p].s * s[a].s + (a == p ? s[p].d2 : 0.0);
        yy[p * k + a][i] = c * prod;
        gg[p * k + a][i] = h * prod;
        g1[p * k + a][i] = h * s[a].s;
      }
      yt[p][i] = c * s[p].s * st;
      gt[p][i] = h * s[p].s * st;
      g0t[p][i] = h * st;
    }
  }
  SecondDerivatives d;
  d.advertisers = advertisers;
  d.d2Y.resize(k, k);
  d.d2Z.resize(k, k);
  d.d2Y_theta.resize(k);
  d.d2Z_theta.resize(k);
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t a = 0; a < k; ++a) {
      d.d2Y(p, a) = mean_of(yy[p * k + a]);
      double G2 = mean_of(gg[p * k + a]);
      if (pol.score_interpretation) {
        double Ga = mean_of(g1[p * k + a]);
        d.d2Z(p, a) = (a == p ? 2 * Ga : Ga) + bids[p] * G2;
      } else {
        d.d2Z(p, a) = G2;
      }
    }
    d.d2Y_theta(p) = mean_of(yt[p]);
    d.d2Z_theta(p) = pol.score_interpretation ? mean_of(g0t[p]) + bids[p] * mean_of(gt[p]) : mean_of(gt[p]);
  }
  return d;
}

EquilibriumResponse solve_response(const Eigen::MatrixXd& A, const Eigen::VectorXd& r, std::vector<int> advertisers,
                                   double max_condition) {
  Eigen::Index k = A.rows();
  if (k == 0 || A.cols() != k || r.size() != k)
    throw Error(ErrorCode::InvalidArgument, "response system must be square and nonempty");
  EquilibriumResponse e;
  e.advertisers = std::move(advertisers);
  e.A = A;
  e.r = r;
  Eigen::MatrixXd As = A;
  Eigen::VectorXd rs = r;
  for (Eigen::Index i = 0; i < k; ++i) {
    double s = As.row(i).cwiseAbs().maxCoeff();
    if (s > 0) {
      As.row(i) /= s;
      rs(i) /= s;
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(As);
  const auto& sv = svd.singularValues();
  double smin = sv(sv.size() - 1);
  e.condition = smin > 0 ? sv(0) / smin : kInf;
  e.singular = !(e.condition <= max_condition);
  if (e.singular)
    throw Error(ErrorCode::SingularSystem, "response system condition number " + std::to_string(e.condition));
  e.xi = As.fullPivLu().solve(-rs);
  return e;
}

EquilibriumResponse solve_response(const SecondDerivatives& d, const std::vector<double>& values,
                                   double max_condition) {
  Eigen::Index k = static_cast<Eigen::Index>(d.advertisers.size());
  if (static_cast<Eigen::Index>(values.size()) != k) throw Error(ErrorCode::InvalidArgument, "one value per advertiser");
  Eigen::MatrixXd A(k, k);
  Eigen::VectorXd r(k);
  for (Eigen::Index p = 0; p < k; ++p) {
    for (Eigen::Index a = 0; a < k; ++a) A(p, a) = values[p] * d.d2Y(p, a) - d.d2Z(p, a);
    r(p) = values[p] * d.d2Y_theta(p) - d.d2Z_theta(p);
  }
  return solve_response(A, r, d.advertisers, max_condition);
}

json EquilibriumResponse::to_json() const {
  std::vector<double> x(xi.data(), xi.data() + xi.size());
  return {{"advertisers", advertisers}, {"xi", x}, {"condition", condition}, {"singular", singular}};
}

TotalDerivative total_derivative(std::span<const LogRecord> records, const Policy& pol,
                                 const EquilibriumResponse& response, Metric metric) {
  if (!(pol.sigma > 0)) throw Error(ErrorCode::ZeroDenominator, "reserve derivatives need sigma > 0");
  std::size_t n = records.size(), k = response.advertisers.size();
  if (n < 2) throw Error(ErrorCode::TooFewSamples, "need at least 2 records");
  if (k > 0) require_bid_randomization(pol);
  std::vector<double> ell(n);
  for (std::size_t i = 0; i < n; ++i) ell[i] = metric_value(records[i], metric);
  // A constant baseline leaves the expectation unchanged and cuts variance.
  double base = mean(ell);
  LogNormal reserve = pol.reserve_law();
  std::vector<double> ft(n);
  std::vector<std::vector<double>> fb(k, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    double c = ell[i] - base;
    ft[i] = c * reserve.dlog_drho(records[i].m);
    for (std::size_t a = 0; a < k; ++a)
      fb[a][i] = c * bid_score(view_of(records[i], response.advertisers[a]), pol.bid_sigma).s;
  }
  TotalDerivative t;
  t.partial_theta = mean(ft);
  t.partial_theta_se = std::sqrt(sample_variance(ft) / n);
  t.value = t.partial_theta;
  double var = t.partial_theta_se * t.partial_theta_se;
  for (std::size_t a = 0; a < k; ++a) {
    t.partial_bid.push_back(mean(fb[a]));
    t.partial_bid_se.push_back(std::sqrt(sample_variance(fb[a]) / n));
    double x = response.xi(static_cast<Eigen::Index>(a));
    t.value += x * t.partial_bid.back();
    var += x * x * t.partial_bid_se.back() * t.partial_bid_se.back();
  }
  t.se = std::sqrt(var);
  return t;
}

json TotalDerivative::to_json() const {
  return {{"partial_theta", partial_theta}, {"partial_theta_se", partial_theta_se},
          {"partial_bid", partial_bid},     {"partial_bid_se", partial_bid_se},
          {"value", value},                 {"se", se}};
}

OracleMarket::OracleMarket(const WorldConfig& cfg, const Policy& pol, std::size_t pages, std::uint64_t seed)
    : world_(cfg), pol_(pol) {
  if (cfg.advertisers.empty()) throw Error(ErrorCode::InvalidArgument, "the oracle needs fixed advertisers");
  if (cfg.click_competition != 0)
    throw Error(ErrorCode::InvalidArgument, "the oracle assumes clicks independent of other placements");
  pages_ = collect_log(pol, world_, pages, seed);
  for (const auto& a : cfg.advertisers) bids_.push_back(a.bid);
}

void OracleMarket::set_bids(const std::vector<double>& bids) {
  if (bids.size() != bids_.size()) throw Error(ErrorCode::InvalidArgument, "one bid per advertiser");
  bids_ = bids;
  built_ = -1;
}

void OracleMarket::rebuild(int k) const {
  const auto& cfg = world_.config();
  int id = cfg.advertisers[k].id;
  std::vector<std::vector<Piece>> per(pages_.size());
  parallel_for(pages_.size(), [&](std::size_t ii) {
    const LogRecord& r = pages_[ii];
    int own = -1;
    std::vector<Bidder> bidders;
    for (std::size_t c = 0; c < r.candidates.size(); ++c) {
      const auto& cd = r.candidates[c];
      int slot = 0;
      while (cfg.advertisers[slot].id != cd.advertiser) ++slot;
      double q = std::pow(cd.beta, r.alpha);
      if (cd.advertiser == id) own = static_cast<int>(c);
      bidders.push_back({cd.ad, cd.advertiser, bids_[slot] * cd.bid_mult * q});
    }
    if (own < 0) return;
    const auto& setup = world_.setup(r.cluster);
    double q = std::pow(r.candidates[own].beta, r.alpha);
    double gain = intent_gain(r.intent);
    double top = 1;
    for (const auto& b : bidders) top += b.score;
    for (std::size_t p = 0; p < setup.positions.size(); ++p) top += setup.threshold(static_cast<int>(p), r.m);
    top *= 1e6;
    double s = top, hi = kInf;
    for (int guard = 0; guard < 64; ++guard) {
      bidders[own].score = s;
      PreparedAuction pa(bidders, setup);
      Slate sl = pa.slate(r.m);
      int j = -1;
      for (std::size_t t = 0; t < sl.placed.size(); ++t)
        if (sl.placed[t].bidder == own) j = static_cast<int>(t);
      if (j < 0) break;
      double crit = gsp_critical_scores(sl, pa, r.m)[j];
      double click = std::min(1.0, setup.positions[sl.placed[j].position].gamma * r.candidates[own].beta * gain);
      per[ii].push_back({crit / q, hi, click, crit / q});
      if (!(crit > 0)) break;
      hi = crit / q;
      s = crit * (1 - 1e-10);
    }
  }, 64);
  pieces_.clear();
  for (auto& v : per) pieces_.insert(pieces_.end(), v.begin(), v.end());
  built_ = k;
}

OracleMarket::Curve OracleMarket::curve(int k, double b) const {
  if (built_ != k) rebuild(k);
  Curve c;
  if (!(b > 0)) return c;
  double sg = pol_.bid_sigma;
  std::vector<double> y(pieces_.size()), z(pieces_.size());
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const Piece& p = pieces_[i];
    double mass, inv;
    if (sg > 0) {
      // log mult ~ N(-sg^2/2, sg^2); E[1/mult; I] shifts the mean by -sg^2.
      double m0 = -0.5 * sg * sg;
      double zlo = p.lo > 0 ? (std::log(p.lo / b) - m0) / sg : -kInf;
      double zhi = std::isinf(p.hi) ? kInf : (std::log(p.hi / b) - m0) / sg;
      mass = normal_cdf(zhi) - normal_cdf(zlo);
      inv = std::exp(sg * sg) * (normal_cdf(zhi + sg) - normal_cdf(zlo + sg));
    } else {
      mass = (b > p.lo && b <= p.hi) ? 1.0 : 0.0;
      inv = mass;
    }
    y[i] = p.click * mass;
    z[i] = p.click * p.price * (pol_.score_interpretation ? inv : mass);
  }
  c.clicks = pairwise_sum(y) / pages_.size();
  c.cost = pairwise_sum(z) / pages_.size();
  return c;
}

double OracleMarket::utility(int k, double b) const {
  auto c = curve(k, b);
  return world_.config().advertisers[k].value * c.clicks - c.cost;
}

double OracleMarket::best_response(int k, int grid, bool* quasiconcave) const {
  double bmax = world_.config().bid_max;
  std::vector<double> u(grid + 1);
  for (int g = 0; g <= grid; ++g) u[g] = utility(k, bmax * g / grid);
  int best = 0;
  for (int g = 1; g <= grid; ++g)
    if (u[g] > u[best] + 1e-12 * std::abs(u[best])) best = g;
  if (quasiconcave) {
    int peaks = 0;
    for (int g = 1; g < grid; ++g)
      if (u[g] > u[g - 1] + 1e-9 && u[g] > u[g + 1] + 1e-9) ++peaks;
    *quasiconcave = peaks <= 1;
  }
  double lo = bmax * std::max(best - 1, 0) / grid, hi = bmax * std::min(best + 1, grid) / grid;
  if (pol_.bid_sigma > 0) {
    // Smooth in b: golden-section refinement of the bracket.
    const double phi = 0.5 * (std::sqrt(5.0) - 1);
    double a = lo, d = hi;
    double x1 = d - phi * (d - a), x2 = a + phi * (d - a);
    double f1 = utility(k, x1), f2 = utility(k, x2);
    for (int it = 0; it < 60 && d - a > 1e-9 * bmax; ++it) {
      if (f1 >= f2) {
        d = x2;
        x2 = x1;
        f2 = f1;
        x1 = d - phi * (d - a);
        f1 = utility(k, x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + phi * (d - a);
        f2 = utility(k, x2);
      }
    }
    double x = 0.5 * (a + d);
    return utility(k, x) >= u[best] ? x : bmax * best / grid;
  }
  // Piecewise constant in b: smallest maximizer on a finer grid.
  double bu = u[best], bx = bmax * best / grid;
  for (int g = 0; g <= grid; ++g) {
    double x = lo + (hi - lo) * g / grid;
    double v = utility(k, x);
    if (v > bu + 1e-12 * std::abs(bu) || (v >= bu - 1e-12 * std::abs(bu) && x < bx && v > 0)) {
      bu = v;
      bx = x;
    }
  }
  return bu > 0 ? bx : 0.0;
}

double OracleMarket::expected_metric(Metric metric) const {
  const auto& cfg = world_.config();
  std::vector<double> v(pages_.size());
  parallel_for(pages_.size(), [&](std::size_t i) {
    LogRecord r = pages_[i];
    for (auto& c : r.candidates) {
      int slot = 0;
      while (cfg.advertisers[slot].id != c.advertiser) ++slot;
      c.bid = bids_[slot];
    }
    v[i] = cfr::expected_metric(r, world_, pol_.reserve_law(), r.alpha, metric);
  }, 64);
  return mean(v);
}

NashResult nash_oracle(const WorldConfig& cfg, const Policy& pol, const NashOptions& opt) {
  OracleMarket market(cfg, pol, opt.pages, opt.seed);
  NashResult res;
  std::vector<double> bids = market.bids();
  for (res.iterations = 1; res.iterations <= opt.max_iterations; ++res.iterations) {
    double change = 0;
    for (std::size_t k = 0; k < bids.size(); ++k) {
      bool qc = true;
      double b = market.best_response(static_cast<int>(k), opt.grid, &qc);
      res.quasiconcave &= qc;
      change = std::max(change, std::abs(b - bids[k]));
      bids[k] = b;
      market.set_bids(bids);
    }
    if (change < opt.tolerance) {
      res.bids = bids;
      return res;
    }
  }
  throw Error(ErrorCode::NonConvergence, "best-response iteration did not settle in " +
                                             std::to_string(opt.max_iterations) + " iterations");
}

}  // namespace cfr
