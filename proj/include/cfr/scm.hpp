#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cfr/rng.hpp"
#include "json.hpp"

namespace cfr::scm {

using NodeId = std::string;

struct Value;
using Field = std::pair<std::string, Value>;

struct Value {
  std::variant<double, std::vector<double>, std::vector<Field>> data;

  Value() : data(0.0) {}
  Value(double x) : data(x) {}
  Value(std::vector<double> v) : data(std::move(v)) {}
  Value(std::vector<Field> s);

  bool is_scalar() const { return data.index() == 0; }
  bool is_vector() const { return data.index() == 1; }
  bool is_struct() const { return data.index() == 2; }
  double scalar() const;
  const std::vector<double>& vector() const;
  const std::vector<Field>& fields() const;
  const Value& field(const std::string& name) const;

  bool operator==(const Value& o) const;
};

nlohmann::json to_json(const Value& v);
Value value_from_json(const nlohmann::json& j);

using Parents = std::span<const Value* const>;
using SampleFn = std::function<Value(Parents, Stream&)>;
using DensityFn = std::function<double(const Value&, Parents)>;

class FactorSpec;
using FactorPtr = std::shared_ptr<const FactorSpec>;

class FactorSpec {
 public:
  enum class Kind { Deterministic, Density };

  static FactorPtr deterministic(std::vector<NodeId> parents, SampleFn fn, std::string tag = "",
                                 nlohmann::json params = nullptr);
  static FactorPtr density(std::vector<NodeId> parents, SampleFn sampler, DensityFn density,
                           std::string tag = "", nlohmann::json params = nullptr);

  Kind kind() const { return kind_; }
  const std::vector<NodeId>& parents() const { return parents_; }
  const std::string& tag() const { return tag_; }
  const nlohmann::json& params() const { return params_; }

  Value sample(Parents p, Stream& s) const { return sample_(p, s); }
  double density(const Value& v, Parents p) const;

 private:
  FactorSpec() = default;
  Kind kind_ = Kind::Deterministic;
  std::vector<NodeId> parents_;
  SampleFn sample_;
  DensityFn density_;
  std::string tag_;
  nlohmann::json params_;
};

// Nodes without parents are exogenous; their factor is their sampling law.
class ScmGraph {
 public:
  ScmGraph& add(const NodeId& node, FactorPtr factor);

  const std::vector<NodeId>& nodes() const { return nodes_; }
  bool has(const NodeId& node) const;
  FactorPtr factor(const NodeId& node) const;
  bool exogenous(const NodeId& node) const;

  std::vector<NodeId> topological_order() const;
  std::vector<NodeId> descendants(const NodeId& node) const;

 private:
  friend ScmGraph intervene(const ScmGraph&, const struct Intervention&);
  std::vector<NodeId> nodes_;
  std::map<NodeId, FactorPtr> factors_;
};

struct Assignment {
  std::map<NodeId, Value> values;
  const Value& at(const NodeId& n) const { return values.at(n); }
  bool operator==(const Assignment&) const = default;
};

struct Intervention {
  std::map<NodeId, FactorPtr> replacements;

  static Intervention clamp(const NodeId& node, Value v);
  Intervention& replace(const NodeId& node, FactorPtr f);
};

void validate(const ScmGraph& g);
// Each node draws from its own substream keyed by (seed, index, node id).
Assignment simulate(const ScmGraph& g, std::uint64_t seed, std::uint64_t index = 0);
ScmGraph intervene(const ScmGraph& g, const Intervention& iv);
double density_ratio(const ScmGraph& actual, const ScmGraph& counterfactual, const Assignment& w);

using FactorFactory = std::function<FactorPtr(std::vector<NodeId>, const nlohmann::json&)>;

class FactorRegistry {
 public:
  void add(const std::string& tag, FactorFactory f);
  FactorPtr make(const std::string& tag, std::vector<NodeId> parents, const nlohmann::json& params) const;
  bool has(const std::string& tag) const { return factories_.count(tag) > 0; }

  // constant, bernoulli, normal, lognormal_multiplier, uniform, linear, sum.
  static FactorRegistry builtin();

 private:
  std::map<std::string, FactorFactory> factories_;
};

inline constexpr int kGraphSchemaVersion = 1;

nlohmann::json to_json(const ScmGraph& g);
ScmGraph graph_from_json(const nlohmann::json& j, const FactorRegistry& reg);

}  // namespace cfr::scm
