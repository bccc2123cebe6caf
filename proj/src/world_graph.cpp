#include "cfr/world_graph.hpp"

#include <cmath>
#include <memory>

namespace cfr {

using nlohmann::json;
using scm::Field;
using scm::FactorPtr;
using scm::FactorSpec;
using scm::Parents;
using scm::Value;

namespace {

std::vector<double> column(const std::vector<CandidateRec>& c, double CandidateRec::*f) {
  std::vector<double> v;
  for (const auto& x : c) v.push_back(x.*f);
  return v;
}

Value x_value(const LogRecord& r) {
  return Value(std::vector<Field>{{"cluster", Value(double(r.cluster))}, {"commercialness", Value(r.commercialness)}});
}

Value a_value(const LogRecord& r) {
  std::vector<double> ad, adv;
  for (const auto& c : r.candidates) {
    ad.push_back(c.ad);
    adv.push_back(c.advertiser);
  }
  return Value(std::vector<Field>{{"ad", Value(ad)},
                                  {"advertiser", Value(adv)},
                                  {"beta", Value(column(r.candidates, &CandidateRec::beta))},
                                  {"value", Value(column(r.candidates, &CandidateRec::value))}});
}

Value b_value(const LogRecord& r) {
  return Value(std::vector<Field>{{"bid", Value(column(r.candidates, &CandidateRec::bid))},
                                  {"bid_mult", Value(column(r.candidates, &CandidateRec::bid_mult))},
                                  {"value", Value(column(r.candidates, &CandidateRec::value))}});
}

Value q_value(const LogRecord& r) {
  return Value(std::vector<Field>{{"eps", Value(r.eps)}, {"m", Value(r.m)}, {"alpha", Value(r.alpha)}});
}

void read_x(const Value& x, LogRecord& r) {
  r.cluster = static_cast<int>(x.field("cluster").scalar());
  r.commercialness = x.field("commercialness").scalar();
}

void read_a(const Value& a, LogRecord& r) {
  const auto& ad = a.field("ad").vector();
  const auto& adv = a.field("advertiser").vector();
  const auto& beta = a.field("beta").vector();
  const auto& val = a.field("value").vector();
  r.candidates.assign(ad.size(), {});
  for (std::size_t i = 0; i < ad.size(); ++i) {
    auto& c = r.candidates[i];
    c.ad = static_cast<int>(ad[i]);
    c.advertiser = static_cast<int>(adv[i]);
    c.beta = beta[i];
    c.value = val[i];
  }
}

void read_b(const Value& b, LogRecord& r) {
  const auto& bid = b.field("bid").vector();
  const auto& mult = b.field("bid_mult").vector();
  const auto& val = b.field("value").vector();
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    r.candidates[i].bid = bid[i];
    r.candidates[i].bid_mult = mult[i];
    r.candidates[i].value = val[i];
  }
}

void read_q(const Value& q, LogRecord& r) {
  r.eps = q.field("eps").scalar();
  r.m = q.field("m").scalar();
  r.alpha = q.field("alpha").scalar();
}

Value s_value(const LogRecord& r) {
  std::vector<double> cand, pos, rs, beta;
  for (const auto& p : r.placed) {
    cand.push_back(p.candidate);
    pos.push_back(p.position);
    rs.push_back(p.rank_score);
    beta.push_back(r.candidates[p.candidate].beta);
  }
  return Value(std::vector<Field>{{"layout", Value(double(r.layout))},
                                  {"m_min", Value(r.m_min)},
                                  {"m_max", Value(r.m_max)},
                                  {"candidate", Value(cand)},
                                  {"position", Value(pos)},
                                  {"rank_score", Value(rs)},
                                  {"beta", Value(beta)}});
}

Value c_value(const LogRecord& r) {
  std::vector<double> price, charged;
  for (const auto& p : r.placed) {
    price.push_back(p.price);
    charged.push_back(p.charged);
  }
  return Value(std::vector<Field>{{"price", Value(price)}, {"charged", Value(charged)}});
}

struct Ctx {
  WorldConfig cfg;
  Policy pol;
  World world;
  json params;
  Ctx(const WorldConfig& c, const Policy& p)
      : cfg(c), pol(p), world(c), params{{"config", to_json(c)}, {"policy", to_json(p)}} {}
};

LogRecord auction_input(const Ctx& ctx, Parents p) {
  // parents: x, a, b, q
  LogRecord r;
  read_x(*p[0], r);
  read_a(*p[1], r);
  read_b(*p[2], r);
  read_q(*p[3], r);
  (void)ctx;
  return r;
}

FactorPtr q_factor(std::shared_ptr<const Ctx> ctx) {
  return FactorSpec::density(
      {"x", "a"},
      [ctx](Parents, Stream& s) {
        LogRecord r;
        nodes::scores(ctx->pol, r, s);
        return q_value(r);
      },
      [ctx](const Value& v, Parents) {
        double d = ctx->pol.reserve_law().pdf(v.field("m").scalar());
        if (ctx->pol.sigma == 0) d = v.field("m").scalar() == ctx->pol.rho ? 1.0 : 0.0;
        if (ctx->pol.alpha_sigma > 0)
          d *= normal_pdf((v.field("alpha").scalar() - ctx->pol.alpha) / ctx->pol.alpha_sigma) / ctx->pol.alpha_sigma;
        else if (v.field("alpha").scalar() != ctx->pol.alpha)
          d = 0;
        return d;
      },
      "adworld.scores", ctx->params);
}

scm::ScmGraph build(std::shared_ptr<const Ctx> ctx) {
  const json& P = ctx->params;
  scm::ScmGraph g;
  g.add("u", FactorSpec::deterministic(
                 {}, [ctx](Parents, Stream& s) { return Value(nodes::intent(ctx->cfg, s)); }, "adworld.intent", P));
  g.add("v", FactorSpec::deterministic(
                 {}, [](Parents, Stream& s) { return Value(double(nodes::inventory(s))); }, "adworld.inventory", P));
  g.add("x", FactorSpec::deterministic(
                 {"u"},
                 [ctx](Parents p, Stream& s) {
                   LogRecord r;
                   r.intent = p[0]->scalar();
                   nodes::context(ctx->cfg, r, s);
                   return x_value(r);
                 },
                 "adworld.context", P));
  g.add("a", FactorSpec::deterministic(
                 {"x", "v"},
                 [ctx](Parents p, Stream& s) {
                   LogRecord r;
                   read_x(*p[0], r);
                   nodes::candidates(ctx->cfg, r, s);
                   return a_value(r);
                 },
                 "adworld.candidates", P));
  g.add("b", FactorSpec::deterministic(
                 {"x", "v", "a"},
                 [ctx](Parents p, Stream& s) {
                   LogRecord r;
                   read_x(*p[0], r);
                   read_a(*p[2], r);
                   nodes::bids(ctx->cfg, ctx->pol, r, s);
                   return b_value(r);
                 },
                 "adworld.bids", P));
  g.add("q", q_factor(ctx));
  g.add("s", FactorSpec::deterministic(
                 {"x", "a", "b", "q"},
                 [ctx](Parents p, Stream&) {
                   LogRecord r = auction_input(*ctx, p);
                   run_auction(r, ctx->world, ctx->pol);
                   return s_value(r);
                 },
                 "adworld.slate", P));
  g.add("c", FactorSpec::deterministic(
                 {"x", "a", "b", "q", "s"},
                 [ctx](Parents p, Stream&) {
                   LogRecord r = auction_input(*ctx, p);
                   run_auction(r, ctx->world, ctx->pol);
                   return c_value(r);
                 },
                 "adworld.prices", P));
  g.add("y", FactorSpec::deterministic(
                 {"s", "u"},
                 [ctx](Parents p, Stream& s) {
                   const auto& pos = p[0]->field("position").vector();
                   const auto& beta = p[0]->field("beta").vector();
                   double gain = intent_gain(p[1]->scalar());
                   const auto& setup = ctx->world.setup(0);
                   std::vector<double> u(setup.positions.size());
                   for (auto& x : u) x = s.uniform();
                   std::vector<int> ipos(pos.begin(), pos.end());
                   auto prob = click_probabilities(ipos, beta, setup, gain, ctx->world.config().click_competition,
                                                   ctx->world.n_mainline());
                   std::vector<double> y(pos.size());
                   for (std::size_t j = 0; j < pos.size(); ++j) y[j] = u[ipos[j]] < prob[j] ? 1.0 : 0.0;
                   return Value(y);
                 },
                 "adworld.clicks", P));
  g.add("z", FactorSpec::deterministic(
                 {"y", "c"},
                 [](Parents p, Stream&) {
                   const auto& y = p[0]->vector();
                   const auto& ch = p[1]->field("charged").vector();
                   double z = 0;
                   for (std::size_t j = 0; j < y.size(); ++j)
                     if (y[j] > 0) z += ch[j];
                   return Value(z);
                 },
                 "adworld.revenue", P));
  scm::validate(g);
  return g;
}

}  // namespace

scm::ScmGraph ad_world_graph(const WorldConfig& cfg, const Policy& pol) {
  return build(std::make_shared<const Ctx>(cfg, pol));
}

scm::Intervention score_intervention(const WorldConfig& cfg, const Policy& pol) {
  scm::Intervention iv;
  iv.replace("q", q_factor(std::make_shared<const Ctx>(cfg, pol)));
  return iv;
}

LogRecord record_from_assignment(const scm::Assignment& a, std::uint64_t seed, std::uint64_t index) {
  LogRecord r;
  r.seed = seed;
  r.index = index;
  r.intent = a.at("u").scalar();
  r.inventory = static_cast<int>(a.at("v").scalar());
  read_x(a.at("x"), r);
  read_a(a.at("a"), r);
  read_b(a.at("b"), r);
  read_q(a.at("q"), r);
  const auto& s = a.at("s");
  r.layout = static_cast<int>(s.field("layout").scalar());
  r.m_min = s.field("m_min").scalar();
  r.m_max = s.field("m_max").scalar();
  const auto& cand = s.field("candidate").vector();
  const auto& pos = s.field("position").vector();
  const auto& rs = s.field("rank_score").vector();
  const auto& price = a.at("c").field("price").vector();
  const auto& charged = a.at("c").field("charged").vector();
  const auto& y = a.at("y").vector();
  r.revenue = a.at("z").scalar();
  for (std::size_t j = 0; j < cand.size(); ++j)
    r.placed.push_back({static_cast<int>(cand[j]), static_cast<int>(pos[j]), rs[j], price[j], charged[j], y[j] > 0});
  return r;
}

scm::FactorRegistry ad_world_registry() {
  auto reg = scm::FactorRegistry::builtin();
  for (const char* tag : {"adworld.intent", "adworld.inventory", "adworld.context", "adworld.candidates",
                          "adworld.bids", "adworld.scores", "adworld.slate", "adworld.prices", "adworld.clicks",
                          "adworld.revenue"}) {
    std::string t = tag;
    reg.add(t, [t](std::vector<scm::NodeId>, const json& params) {
      auto g = ad_world_graph(world_config_from_json(params.at("config")), policy_from_json(params.at("policy")));
      static const std::map<std::string, std::string> node_of = {
          {"adworld.intent", "u"}, {"adworld.inventory", "v"}, {"adworld.context", "x"},
          {"adworld.candidates", "a"}, {"adworld.bids", "b"}, {"adworld.scores", "q"},
          {"adworld.slate", "s"}, {"adworld.prices", "c"}, {"adworld.clicks", "y"}, {"adworld.revenue", "z"}};
      return g.factor(node_of.at(t));
    });
  }
  return reg;
}

}  // namespace cfr
