#include "cfr/world.hpp"

#include <algorithm>
#include <cmath>

#include "cfr/error.hpp"
#include "cfr/parallel.hpp"

namespace cfr {

using nlohmann::json;

WorldConfig WorldConfig::standard() {
  WorldConfig c;
  c.clusters = {{0.5, 0.3, 1.2, 0.04}, {0.3, 0.6, 3.0, 0.06}, {0.2, 0.9, 5.0, 0.08}};
  return c;
}

void WorldConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, "world config: " + m); };
  if (clusters.empty()) fail("need at least one cluster");
  double tw = 0;
  for (const auto& k : clusters) {
    if (!(k.weight > 0)) fail("cluster weights must be positive");
    if (k.commercialness < 0 || k.commercialness > 1) fail("commercialness must lie in [0,1]");
    if (k.ad_rate < 0 || k.reserve < 0) fail("ad_rate and reserve must be nonnegative");
    tw += k.weight;
  }
  if (std::abs(tw - 1) > 1e-9) fail("cluster weights must sum to 1");
  if (!(beta_lo > 0 && beta_lo <= beta_hi && beta_hi <= 1)) fail("beta range must lie in (0,1]");
  if (!(bid_min > 0 && bid_min < bid_max && bid_shape > 0)) fail("bad bid law");
  if (gamma_mainline.empty() && gamma_sidebar.empty()) fail("need at least one position");
  std::vector<double> g = gamma_mainline;
  g.insert(g.end(), gamma_sidebar.begin(), gamma_sidebar.end());
  for (std::size_t j = 0; j < g.size(); ++j)
    if (!(g[j] > 0) || (j > 0 && g[j] > g[j - 1])) fail("gammas must be positive and nonincreasing");
  if (max_candidates < 0 || advertiser_pool < 1) fail("bad candidate law");
  if (!(intent_a > 0 && intent_b > 0)) fail("bad intent law");
  if (click_competition < 0) fail("click_competition must be nonnegative");
  for (const auto& a : advertisers) {
    if (!(a.bid >= 0 && a.bid <= bid_max)) fail("fixed advertiser bid outside [0, bid_max]");
    if (!(a.beta_lo > 0 && a.beta_lo <= a.beta_hi && a.beta_hi <= 1)) fail("fixed advertiser beta range");
    if (a.eligibility < 0 || a.eligibility > 1) fail("eligibility must lie in [0,1]");
  }
}

AuctionSetup WorldConfig::auction_setup(int cluster) const {
  AuctionSetup s;
  double r = clusters.at(cluster).reserve;
  int nm = static_cast<int>(gamma_mainline.size()), ns = static_cast<int>(gamma_sidebar.size());
  for (double g : gamma_mainline) s.positions.push_back({g, r * g, true});
  for (double g : gamma_sidebar) s.positions.push_back({g, 0.0, false});
  std::vector<std::pair<int, int>> shapes;
  for (int km = 0; km <= nm; ++km)
    for (int ks = 0; ks <= ns; ++ks) shapes.emplace_back(km, ks);
  std::stable_sort(shapes.begin(), shapes.end(), [](auto a, auto b) {
    if (a.first + a.second != b.first + b.second) return a.first + a.second < b.first + b.second;
    return a.first > b.first;
  });
  for (auto [km, ks] : shapes) {
    Layout l;
    for (int j = 0; j < km; ++j) l.positions.push_back(j);
    for (int j = 0; j < ks; ++j) l.positions.push_back(nm + j);
    s.layouts.push_back(l);
  }
  s.validate();
  return s;
}

double WorldConfig::max_bid() const { return bid_max; }

double WorldConfig::max_value() const {
  if (advertisers.empty()) return bid_max * value_markup_hi;
  double v = 0;
  for (const auto& a : advertisers) v = std::max(v, a.value);
  return v;
}

json to_json(const WorldConfig& c) {
  json k = json::array();
  for (const auto& x : c.clusters)
    k.push_back({{"weight", x.weight}, {"commercialness", x.commercialness}, {"ad_rate", x.ad_rate},
                 {"reserve", x.reserve}});
  json adv = json::array();
  for (const auto& a : c.advertisers)
    adv.push_back({{"id", a.id}, {"bid", a.bid}, {"value", a.value}, {"eligibility", a.eligibility},
                   {"beta_lo", a.beta_lo}, {"beta_hi", a.beta_hi}});
  return {{"clusters", k},
          {"advertiser_pool", c.advertiser_pool},
          {"max_candidates", c.max_candidates},
          {"beta_lo", c.beta_lo},
          {"beta_hi", c.beta_hi},
          {"bid_min", c.bid_min},
          {"bid_shape", c.bid_shape},
          {"bid_max", c.bid_max},
          {"value_markup_lo", c.value_markup_lo},
          {"value_markup_hi", c.value_markup_hi},
          {"gamma_mainline", c.gamma_mainline},
          {"gamma_sidebar", c.gamma_sidebar},
          {"intent_a", c.intent_a},
          {"intent_b", c.intent_b},
          {"commercial_noise", c.commercial_noise},
          {"intent_commercial_slope", c.intent_commercial_slope},
          {"quality_slope", c.quality_slope},
          {"click_competition", c.click_competition},
          {"advertisers", adv}};
}

WorldConfig world_config_from_json(const json& j) {
  WorldConfig c;
  const WorldConfig d = WorldConfig::standard();
  if (j.contains("clusters")) {
    for (const auto& x : j.at("clusters"))
      c.clusters.push_back({x.value("weight", 1.0), x.value("commercialness", 0.5), x.value("ad_rate", 3.0),
                            x.value("reserve", 0.05)});
  } else {
    c.clusters = d.clusters;
  }
  c.advertiser_pool = j.value("advertiser_pool", d.advertiser_pool);
  c.max_candidates = j.value("max_candidates", d.max_candidates);
  c.beta_lo = j.value("beta_lo", d.beta_lo);
  c.beta_hi = j.value("beta_hi", d.beta_hi);
  c.bid_min = j.value("bid_min", d.bid_min);
  c.bid_shape = j.value("bid_shape", d.bid_shape);
  c.bid_max = j.value("bid_max", d.bid_max);
  c.value_markup_lo = j.value("value_markup_lo", d.value_markup_lo);
  c.value_markup_hi = j.value("value_markup_hi", d.value_markup_hi);
  c.gamma_mainline = j.value("gamma_mainline", d.gamma_mainline);
  c.gamma_sidebar = j.value("gamma_sidebar", d.gamma_sidebar);
  c.intent_a = j.value("intent_a", d.intent_a);
  c.intent_b = j.value("intent_b", d.intent_b);
  c.commercial_noise = j.value("commercial_noise", d.commercial_noise);
  c.intent_commercial_slope = j.value("intent_commercial_slope", d.intent_commercial_slope);
  c.quality_slope = j.value("quality_slope", d.quality_slope);
  c.click_competition = j.value("click_competition", d.click_competition);
  if (j.contains("advertisers"))
    for (const auto& a : j.at("advertisers"))
      c.advertisers.push_back({a.at("id").get<int>(), a.at("bid").get<double>(), a.value("value", 0.0),
                               a.value("eligibility", 1.0), a.value("beta_lo", 0.02), a.value("beta_hi", 0.2)});
  c.validate();
  return c;
}

void Policy::validate() const {
  if (!(rho > 0) || !(sigma >= 0)) throw Error(ErrorCode::InvalidArgument, "policy: need rho > 0, sigma >= 0");
  if (!(alpha > 0 && alpha <= 2)) throw Error(ErrorCode::InvalidArgument, "policy: alpha must lie in (0,2]");
  if (alpha_sigma < 0 || alpha - 6 * alpha_sigma <= 0)
    throw Error(ErrorCode::InvalidArgument, "policy: alpha randomization must keep alpha positive");
  if (bid_sigma < 0) throw Error(ErrorCode::InvalidArgument, "policy: bid_sigma must be nonnegative");
}

json to_json(const Policy& p) {
  return {{"rho", p.rho},     {"sigma", p.sigma},         {"alpha", p.alpha},
          {"alpha_sigma", p.alpha_sigma}, {"bid_sigma", p.bid_sigma}, {"score_interpretation", p.score_interpretation}};
}

Policy policy_from_json(const json& j) {
  Policy p;
  p.rho = j.value("rho", p.rho);
  p.sigma = j.value("sigma", p.sigma);
  p.alpha = j.value("alpha", p.alpha);
  p.alpha_sigma = j.value("alpha_sigma", p.alpha_sigma);
  p.bid_sigma = j.value("bid_sigma", p.bid_sigma);
  p.score_interpretation = j.value("score_interpretation", p.score_interpretation);
  p.validate();
  return p;
}

double intent_gain(double u) { return 0.25 + 0.75 * u; }

std::vector<Bidder> bidders_of(const LogRecord& r, double alpha) {
  std::vector<Bidder> b(r.candidates.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto& c = r.candidates[i];
    b[i] = {c.ad, c.advertiser, c.bid * c.bid_mult * std::pow(c.beta, alpha)};
  }
  return b;
}

World::World(WorldConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  for (int k = 0; k < static_cast<int>(cfg_.clusters.size()); ++k) setups_.push_back(cfg_.auction_setup(k));
}

double sample_multiplier(const LogNormal& law, std::uint64_t seed, std::uint64_t index) {
  Stream s(seed, index, "q");
  return law.sample(s.normal());
}

std::vector<double> click_probabilities(std::span<const int> positions, std::span<const double> betas,
                                        const AuctionSetup& setup, double gain, double competition,
                                        int n_mainline) {
  std::vector<double> p(positions.size());
  double top = -1;
  for (std::size_t j = 0; j < p.size(); ++j) {
    p[j] = std::min(1.0, setup.positions[positions[j]].gamma * betas[j] * gain);
    if (positions[j] == 0) top = p[j];
  }
  if (competition > 0 && top >= 0)
    for (std::size_t j = 0; j < p.size(); ++j)
      if (positions[j] > 0 && positions[j] < n_mainline) p[j] *= std::max(0.0, 1 - competition * top);
  return p;
}

std::vector<char> user_clicks(const std::vector<PlacedRec>& placed, const std::vector<CandidateRec>& cands,
                              const AuctionSetup& setup, double gain, Stream& s, double competition,
                              int n_mainline) {
  std::vector<double> u(setup.positions.size());
  for (auto& x : u) x = s.uniform();
  std::vector<int> pos;
  std::vector<double> beta;
  for (const auto& p : placed) {
    pos.push_back(p.position);
    beta.push_back(cands[p.candidate].beta);
  }
  auto prob = click_probabilities(pos, beta, setup, gain, competition, n_mainline);
  std::vector<char> out(placed.size(), 0);
  for (std::size_t j = 0; j < placed.size(); ++j) out[j] = u[placed[j].position] < prob[j];
  return out;
}

std::vector<double> slate_click_probabilities(const Slate& s, const std::vector<CandidateRec>& cands,
                                              const AuctionSetup& setup, double gain, double competition,
                                              int n_mainline) {
  std::vector<int> pos;
  std::vector<double> beta;
  for (const auto& p : s.placed) {
    pos.push_back(p.position);
    beta.push_back(cands[p.bidder].beta);
  }
  return click_probabilities(pos, beta, setup, gain, competition, n_mainline);
}

double expected_clicks(const Slate& s, const std::vector<CandidateRec>& cands, const AuctionSetup& setup,
                       double gain, double competition, int n_mainline) {
  double e = 0;
  for (double p : slate_click_probabilities(s, cands, setup, gain, competition, n_mainline)) e += p;
  return e;
}

namespace {
double log_uniform(Stream& s, double lo, double hi) { return lo * std::exp(s.uniform() * std::log(hi / lo)); }

double truncated_pareto(Stream& s, double xm, double k, double cap) {
  double u = s.uniform();
  return xm * std::pow(1 - u * (1 - std::pow(xm / cap, k)), -1 / k);
}
}  // namespace

void run_auction(LogRecord& r, const World& w, const Policy& pol) {
  const auto& setup = w.setup(r.cluster);
  auto bidders = bidders_of(r, r.alpha);
  PreparedAuction pa(bidders, setup);
  auto iv = pa.interval_at(r.m);
  r.layout = iv.layout;
  r.m_min = iv.lo;
  r.m_max = iv.hi;
  Slate slate = pa.slate_for_layout(iv.layout);
  auto crit = gsp_critical_scores(slate, pa, r.m);

  r.placed.clear();
  for (std::size_t j = 0; j < slate.placed.size(); ++j) {
    const auto& p = slate.placed[j];
    const auto& c = r.candidates[p.bidder];
    double q = std::pow(c.beta, r.alpha);
    PlacedRec pr;
    pr.candidate = p.bidder;
    pr.position = p.position;
    pr.rank_score = p.rank_score;
    pr.price = crit[j] / q;
    pr.charged = pol.score_interpretation ? crit[j] / (q * c.bid_mult) : pr.price;
    r.placed.push_back(pr);
  }

  Stream ys(r.seed, r.index, "y");
  auto clicks = user_clicks(r.placed, r.candidates, setup, intent_gain(r.intent), ys, w.config().click_competition,
                            w.n_mainline());
  r.clicked_prices.assign(setup.positions.size(), 0.0);
  r.clicks = 0;
  r.mainline_ads = 0;
  r.revenue = 0;
  r.ad_value = 0;
  for (std::size_t j = 0; j < r.placed.size(); ++j) {
    auto& p = r.placed[j];
    p.clicked = clicks[j];
    if (p.position < w.n_mainline()) ++r.mainline_ads;
    if (p.clicked) {
      ++r.clicks;
      r.revenue += p.charged;
      r.ad_value += r.candidates[p.candidate].value;
      r.clicked_prices[p.position] = p.charged;
    }
  }
}

namespace nodes {

double intent(const WorldConfig& cfg, Stream& s) { return s.beta(cfg.intent_a, cfg.intent_b); }

void context(const WorldConfig& cfg, LogRecord& r, Stream& s) {
  double pick = s.uniform(), acc = 0;
  r.cluster = static_cast<int>(cfg.clusters.size()) - 1;
  for (int k = 0; k < static_cast<int>(cfg.clusters.size()); ++k) {
    acc += cfg.clusters[k].weight;
    if (pick < acc) {
      r.cluster = k;
      break;
    }
  }
  const auto& cl = cfg.clusters[r.cluster];
  double c = cl.commercialness + cfg.intent_commercial_slope * (r.intent - 0.5) + cfg.commercial_noise * s.normal();
  r.commercialness = std::clamp(c, 0.0, 1.0);
}

int inventory(Stream& s) { return s.uniform_int(1000); }

void candidates(const WorldConfig& cfg, LogRecord& r, Stream& s) {
  const auto& cl = cfg.clusters[r.cluster];
  double qscale = std::exp(cfg.quality_slope * (r.commercialness - cl.commercialness));
  r.candidates.clear();
  if (cfg.advertisers.empty()) {
    int n = std::min(s.poisson(cl.ad_rate * (0.5 + r.commercialness)), cfg.max_candidates);
    for (int i = 0; i < n; ++i) {
      CandidateRec cr;
      cr.ad = i;
      cr.advertiser = s.uniform_int(cfg.advertiser_pool);
      cr.beta = std::min(1.0, log_uniform(s, cfg.beta_lo, cfg.beta_hi) * qscale);
      cr.value = s.uniform(cfg.value_markup_lo, cfg.value_markup_hi);  // markup until bids are drawn
      r.candidates.push_back(cr);
    }
  } else {
    for (const auto& a : cfg.advertisers) {
      double e = s.uniform();
      double beta = std::min(1.0, log_uniform(s, a.beta_lo, a.beta_hi) * qscale);
      if (e >= a.eligibility) continue;
      CandidateRec cr;
      cr.ad = a.id;
      cr.advertiser = a.id;
      cr.beta = beta;
      cr.bid = a.bid;
      cr.value = a.value;
      r.candidates.push_back(cr);
    }
  }
}

void bids(const WorldConfig& cfg, const Policy& pol, LogRecord& r, Stream& s) {
  LogNormal mult{1.0, pol.bid_sigma};
  for (auto& cr : r.candidates) {
    if (cfg.advertisers.empty()) {
      cr.bid = truncated_pareto(s, cfg.bid_min, cfg.bid_shape, cfg.bid_max);
      cr.value *= cr.bid;
    }
    double z = s.normal();
    cr.bid_mult = pol.bid_sigma > 0 ? mult.sample(z) : 1.0;
  }
}

void scores(const Policy& pol, LogRecord& r, Stream& s) {
  r.eps = s.normal();
  r.m = pol.reserve_law().sample(r.eps);
  double za = s.normal();
  r.alpha = pol.alpha + pol.alpha_sigma * za;
}

}  // namespace nodes

LogRecord simulate_page(const World& w, const Policy& pol, std::uint64_t seed, std::uint64_t index) {
  const auto& cfg = w.config();
  LogRecord r;
  r.seed = seed;
  r.index = index;
  Stream us(seed, index, "u");
  r.intent = nodes::intent(cfg, us);
  Stream xs(seed, index, "x");
  nodes::context(cfg, r, xs);
  Stream vs(seed, index, "v");
  r.inventory = nodes::inventory(vs);
  Stream as(seed, index, "a");
  nodes::candidates(cfg, r, as);
  Stream bs(seed, index, "b");
  nodes::bids(cfg, pol, r, bs);
  Stream qs(seed, index, "q");
  nodes::scores(pol, r, qs);
  run_auction(r, w, pol);
  return r;
}

std::vector<LogRecord> collect_log(const Policy& pol, const World& w, std::size_t n, std::uint64_t seed,
                                   SimulationOptions opt) {
  pol.validate();
  std::vector<LogRecord> out(n);
  if (opt.serial) {
    for (std::size_t i = 0; i < n; ++i) out[i] = simulate_page(w, pol, seed, i);
  } else {
    parallel_for(n, [&](std::size_t i) { out[i] = simulate_page(w, pol, seed, i); });
  }
  return out;
}

std::vector<LogRecord> collect_log(const Policy& pol, const WorldConfig& cfg, std::size_t n, std::uint64_t seed,
                                   SimulationOptions opt) {
  return collect_log(pol, World(cfg), n, seed, opt);
}

LogRecord replay(const LogRecord& r, const World& w, const Policy& pol, double m) {
  LogRecord out = r;
  out.m = m;
  run_auction(out, w, pol);
  return out;
}

}  // namespace cfr
