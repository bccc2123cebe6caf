#include "cfr/scm.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cfr/error.hpp"
#include "cfr/special.hpp"

namespace cfr {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::UndeclaredParent: return "UndeclaredParent";
    case ErrorCode::DuplicateFactor: return "DuplicateFactor";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::MissingSlateInterval: return "MissingSlateInterval";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::RangeViolation: return "RangeViolation";
    case ErrorCode::BoundViolation: return "BoundViolation";
    case ErrorCode::InvalidPredictor: return "InvalidPredictor";
    case ErrorCode::InconsistentSlate: return "InconsistentSlate";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateSlate: return "DegenerateSlate";
    case ErrorCode::NoFeasiblePoint: return "NoFeasiblePoint";
    case ErrorCode::InsufficientExposure: return "InsufficientExposure";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ReadError: return "ReadError";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
  }
  return "Error";
}

}  // namespace cfr

namespace cfr::scm {

using nlohmann::json;

Value::Value(std::vector<Field> s) : data(std::move(s)) {}

double Value::scalar() const {
  if (!is_scalar()) throw Error(ErrorCode::SchemaMismatch, "value is not a scalar");
  return std::get<0>(data);
}

const std::vector<double>& Value::vector() const {
  if (!is_vector()) throw Error(ErrorCode::SchemaMismatch, "value is not a vector");
  return std::get<1>(data);
}

const std::vector<Field>& Value::fields() const {
  if (!is_struct()) throw Error(ErrorCode::SchemaMismatch, "value is not a struct");
  return std::get<2>(data);
}

const Value& Value::field(const std::string& name) const {
  for (const auto& [k, v] : fields())
    if (k == name) return v;
  throw Error(ErrorCode::SchemaMismatch, "no field '" + name + "'");
}

bool Value::operator==(const Value& o) const {
  if (data.index() != o.data.index()) return false;
  if (is_scalar()) return std::get<0>(data) == std::get<0>(o.data);
  if (is_vector()) return std::get<1>(data) == std::get<1>(o.data);
  const auto& a = std::get<2>(data);
  const auto& b = std::get<2>(o.data);
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].first != b[i].first || !(a[i].second == b[i].second)) return false;
  return true;
}

json to_json(const Value& v) {
  if (v.is_scalar()) return v.scalar();
  if (v.is_vector()) return v.vector();
  json o = json::object();
  json keys = json::array();
  for (const auto& [k, x] : v.fields()) {
    o[k] = to_json(x);
    keys.push_back(k);
  }
  return json{{"struct", o}, {"order", keys}};
}

Value value_from_json(const json& j) {
  if (j.is_number()) return Value(j.get<double>());
  if (j.is_array()) return Value(j.get<std::vector<double>>());
  std::vector<Field> f;
  for (const auto& k : j.at("order")) f.emplace_back(k.get<std::string>(), value_from_json(j.at("struct").at(k.get<std::string>())));
  return Value(std::move(f));
}

FactorPtr FactorSpec::deterministic(std::vector<NodeId> parents, SampleFn fn, std::string tag, json params) {
  auto f = std::shared_ptr<FactorSpec>(new FactorSpec());
  f->kind_ = Kind::Deterministic;
  f->parents_ = std::move(parents);
  f->sample_ = std::move(fn);
  f->tag_ = std::move(tag);
  f->params_ = std::move(params);
  return f;
}

FactorPtr FactorSpec::density(std::vector<NodeId> parents, SampleFn sampler, DensityFn density, std::string tag,
                              json params) {
  auto f = std::shared_ptr<FactorSpec>(new FactorSpec());
  f->kind_ = Kind::Density;
  f->parents_ = std::move(parents);
  f->sample_ = std::move(sampler);
  f->density_ = std::move(density);
  f->tag_ = std::move(tag);
  f->params_ = std::move(params);
  return f;
}

double FactorSpec::density(const Value& v, Parents p) const {
  if (kind_ != Kind::Density) throw Error(ErrorCode::InvalidArgument, "factor has no density");
  return density_(v, p);
}

ScmGraph& ScmGraph::add(const NodeId& node, FactorPtr factor) {
  if (factors_.count(node)) throw Error(ErrorCode::DuplicateFactor, node);
  if (!factor) throw Error(ErrorCode::InvalidArgument, "null factor for " + node);
  nodes_.push_back(node);
  factors_[node] = std::move(factor);
  return *this;
}

bool ScmGraph::has(const NodeId& node) const { return factors_.count(node) > 0; }

FactorPtr ScmGraph::factor(const NodeId& node) const {
  auto it = factors_.find(node);
  if (it == factors_.end()) throw Error(ErrorCode::UndeclaredParent, node);
  return it->second;
}

bool ScmGraph::exogenous(const NodeId& node) const { return factor(node)->parents().empty(); }

std::vector<NodeId> ScmGraph::topological_order() const {
  for (const auto& n : nodes_)
    for (const auto& p : factors_.at(n)->parents())
      if (!factors_.count(p)) throw Error(ErrorCode::UndeclaredParent, p + " (parent of " + n + ")");

  // Depth-first with colors so the cycle path can be reported.
  std::map<NodeId, int> color;
  std::vector<NodeId> order, stack;
  std::function<void(const NodeId&)> visit = [&](const NodeId& n) {
    int& c = color[n];
    if (c == 2) return;
    if (c == 1) {
      auto it = std::find(stack.begin(), stack.end(), n);
      std::string path;
      for (; it != stack.end(); ++it) path += *it + " -> ";
      throw Error(ErrorCode::CycleDetected, path + n);
    }
    c = 1;
    stack.push_back(n);
    for (const auto& p : factors_.at(n)->parents()) visit(p);
    stack.pop_back();
    color[n] = 2;
    order.push_back(n);
  };
  for (const auto& n : nodes_) visit(n);
  return order;
}

std::vector<NodeId> ScmGraph::descendants(const NodeId& node) const {
  std::set<NodeId> found{node};
  for (const auto& n : topological_order())
    for (const auto& p : factors_.at(n)->parents())
      if (found.count(p)) {
        found.insert(n);
        break;
      }
  found.erase(node);
  std::vector<NodeId> out;
  for (const auto& n : nodes_)
    if (found.count(n)) out.push_back(n);
  return out;
}

void validate(const ScmGraph& g) { g.topological_order(); }

Assignment simulate(const ScmGraph& g, std::uint64_t seed, std::uint64_t index) {
  Assignment a;
  std::vector<const Value*> pv;
  for (const auto& n : g.topological_order()) {
    auto f = g.factor(n);
    pv.clear();
    for (const auto& p : f->parents()) pv.push_back(&a.values.at(p));
    Stream s(seed, index, n);
    a.values.emplace(n, f->sample(pv, s));
  }
  return a;
}

Intervention Intervention::clamp(const NodeId& node, Value v) {
  Intervention iv;
  iv.replacements[node] = FactorSpec::deterministic({}, [v](Parents, Stream&) { return v; }, "constant",
                                                    json{{"value", to_json(v)}});
  return iv;
}

Intervention& Intervention::replace(const NodeId& node, FactorPtr f) {
  replacements[node] = std::move(f);
  return *this;
}

ScmGraph intervene(const ScmGraph& g, const Intervention& iv) {
  ScmGraph out = g;
  for (const auto& [n, f] : iv.replacements) {
    if (!out.has(n)) throw Error(ErrorCode::UndeclaredParent, "intervention on unknown node " + n);
    out.factors_[n] = f;
  }
  validate(out);
  return out;
}

double density_ratio(const ScmGraph& actual, const ScmGraph& cf, const Assignment& w) {
  if (actual.nodes() != cf.nodes()) throw Error(ErrorCode::InvalidArgument, "graphs have different node sets");
  double num = 1, den = 1;
  std::vector<const Value*> pv;
  for (const auto& n : actual.nodes()) {
    auto fa = actual.factor(n), fc = cf.factor(n);
    if (fa == fc) continue;  // shared factor cancels without evaluation
    if (fa->kind() != FactorSpec::Kind::Density || fc->kind() != FactorSpec::Kind::Density)
      throw Error(ErrorCode::InvalidArgument, "factor of " + n + " differs but is not a density");
    const Value& v = w.at(n);
    pv.clear();
    for (const auto& p : fa->parents()) pv.push_back(&w.at(p));
    double pa = fa->density(v, pv);
    pv.clear();
    for (const auto& p : fc->parents()) pv.push_back(&w.at(p));
    double pc = fc->density(v, pv);
    if (pa == 0 && pc > 0) throw Error(ErrorCode::ZeroDenominator, "actual factor of " + n + " vanishes");
    num *= pc;
    den *= pa;
  }
  if (num == 0) return 0.0;
  return num / den;
}

void FactorRegistry::add(const std::string& tag, FactorFactory f) { factories_[tag] = std::move(f); }

FactorPtr FactorRegistry::make(const std::string& tag, std::vector<NodeId> parents, const json& params) const {
  auto it = factories_.find(tag);
  if (it == factories_.end()) throw Error(ErrorCode::SchemaMismatch, "unknown factor kind '" + tag + "'");
  return it->second(std::move(parents), params);
}

FactorRegistry FactorRegistry::builtin() {
  FactorRegistry r;
  r.add("constant", [](std::vector<NodeId> p, const json& j) {
    Value v = value_from_json(j.at("value"));
    return FactorSpec::deterministic(std::move(p), [v](Parents, Stream&) { return v; }, "constant", j);
  });
  r.add("bernoulli", [](std::vector<NodeId> p, const json& j) {
    double prob = j.at("p").get<double>();
    return FactorSpec::density(
        std::move(p), [prob](Parents, Stream& s) { return Value(s.uniform() < prob ? 1.0 : 0.0); },
        [prob](const Value& v, Parents) { return v.scalar() == 1.0 ? prob : v.scalar() == 0.0 ? 1 - prob : 0.0; },
        "bernoulli", j);
  });
  r.add("normal", [](std::vector<NodeId> p, const json& j) {
    double mu = j.value("mean", 0.0), sd = j.value("sd", 1.0);
    return FactorSpec::density(
        std::move(p),
        [mu, sd](Parents pa, Stream& s) {
          double shift = 0;
          for (auto* v : pa) shift += v->scalar();
          return Value(mu + shift + sd * s.normal());
        },
        [mu, sd](const Value& v, Parents pa) {
          double shift = 0;
          for (auto* x : pa) shift += x->scalar();
          return normal_pdf((v.scalar() - mu - shift) / sd) / sd;
        },
        "normal", j);
  });
  r.add("lognormal_multiplier", [](std::vector<NodeId> p, const json& j) {
    LogNormal law{j.value("rho", 1.0), j.value("sigma", 0.3)};
    if (!(law.sigma > 0)) throw Error(ErrorCode::InvalidArgument, "lognormal_multiplier needs sigma > 0");
    return FactorSpec::density(
        std::move(p), [law](Parents, Stream& s) { return Value(law.sample(s.normal())); },
        [law](const Value& v, Parents) { return law.pdf(v.scalar()); }, "lognormal_multiplier", j);
  });
  r.add("uniform", [](std::vector<NodeId> p, const json& j) {
    double lo = j.value("lo", 0.0), hi = j.value("hi", 1.0);
    return FactorSpec::density(
        std::move(p), [lo, hi](Parents, Stream& s) { return Value(s.uniform(lo, hi)); },
        [lo, hi](const Value& v, Parents) { return v.scalar() >= lo && v.scalar() <= hi ? 1 / (hi - lo) : 0.0; },
        "uniform", j);
  });
  r.add("linear", [](std::vector<NodeId> p, const json& j) {
    double c = j.value("intercept", 0.0);
    std::vector<double> w = j.at("weights").get<std::vector<double>>();
    if (w.size() != p.size()) throw Error(ErrorCode::SchemaMismatch, "linear: one weight per parent");
    return FactorSpec::deterministic(
        std::move(p),
        [c, w](Parents pa, Stream&) {
          double y = c;
          for (std::size_t i = 0; i < w.size(); ++i) y += w[i] * pa[i]->scalar();
          return Value(y);
        },
        "linear", j);
  });
  r.add("product", [](std::vector<NodeId> p, const json& j) {
    return FactorSpec::deterministic(
        std::move(p),
        [](Parents pa, Stream&) {
          double y = 1;
          for (auto* v : pa) y *= v->scalar();
          return Value(y);
        },
        "product", j);
  });
  return r;
}

json to_json(const ScmGraph& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes()) {
    auto f = g.factor(n);
    if (f->tag().empty()) throw Error(ErrorCode::SchemaMismatch, "factor of " + n + " is not serializable");
    nodes.push_back({{"id", n}, {"parents", f->parents()}, {"kind", f->tag()}, {"params", f->params()}});
  }
  return {{"schema_version", kGraphSchemaVersion}, {"nodes", nodes}};
}

ScmGraph graph_from_json(const json& j, const FactorRegistry& reg) {
  int v = j.at("schema_version").get<int>();
  if (v != kGraphSchemaVersion) throw Error(ErrorCode::VersionUnsupported, "graph schema " + std::to_string(v));
  ScmGraph g;
  for (const auto& n : j.at("nodes"))
    g.add(n.at("id").get<std::string>(),
          reg.make(n.at("kind").get<std::string>(), n.at("parents").get<std::vector<NodeId>>(),
                   n.value("params", json::object())));
  validate(g);
  return g;
}

}  // namespace cfr::scm
