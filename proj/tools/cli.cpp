#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "cfr/counterfactual.hpp"
#include "cfr/demos.hpp"
#include "cfr/equilibrium.hpp"
#include "cfr/error.hpp"
#include "cfr/gradients.hpp"
#include "cfr/logstore.hpp"
#include "cfr/parallel.hpp"
#include "cfr/tuner.hpp"
#include "json.hpp"

namespace cfr::cli {

using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config, log, out, format, manifest;
  std::uint64_t seed = 1;
  double delta = 0.025;
  int threads = 0;
};

struct PolicyFlags {
  std::string policy;
  std::optional<double> rho, sigma, alpha, alpha_sigma, bid_sigma;
  bool bid_interpretation = false;
};

struct CfFlags {
  std::string rho_star;  // one value or one per cluster, comma separated
  std::optional<double> sigma_star, alpha_star;
};

struct Options {
  Common c;
  PolicyFlags pol;
  CfFlags cf;
  std::size_t n = 100000;
  std::string point = "score", metric = "clicks", method = "clt", clip = "fifth";
  std::string rho_grid, alpha_grid, metric2 = "value", coords = "rho", mode = "counterfactual",
              baseline = "none", uniform = "grid";
  std::optional<double> cap, max_mainline;
  double tune_clip = 10;
  bool hessian = false;
  double q1 = Table2Options{}.q1_threshold, q2 = Table2Options{}.q2_threshold;
};

std::uint64_t fnv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char s[17];
  std::snprintf(s, sizeof s, "%016llx", static_cast<unsigned long long>(h));
  return h;
}

std::string hex(std::uint64_t h) {
  char s[17];
  std::snprintf(s, sizeof s, "%016llx", static_cast<unsigned long long>(h));
  return s;
}

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

WorldConfig load_config(const std::string& path) {
  if (path.empty()) return WorldConfig::standard();
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ReadError, "config " + path + ": " + e.what());
  }
  if (j.contains("world")) j = j.at("world");
  try {
    return world_config_from_json(j);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, "config " + path + ": " + e.what());
  }
}

Policy make_policy(const PolicyFlags& f) {
  Policy p;
  if (!f.policy.empty()) {
    std::ifstream in(f.policy);
    if (!in) throw Error(ErrorCode::IoError, "cannot open policy " + f.policy);
    try {
      p = policy_from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ReadError, "policy " + f.policy + ": " + e.what());
    }
  }
  if (f.rho) p.rho = *f.rho;
  if (f.sigma) p.sigma = *f.sigma;
  if (f.alpha) p.alpha = *f.alpha;
  if (f.alpha_sigma) p.alpha_sigma = *f.alpha_sigma;
  if (f.bid_sigma) p.bid_sigma = *f.bid_sigma;
  if (f.bid_interpretation) p.score_interpretation = false;
  try {
    p.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return p;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError("bad number list '" + s + "'");
    }
  }
  if (v.empty()) throw UsageError("empty number list");
  return v;
}

std::vector<double> grid_of(const std::string& s) {
  try {
    return parse_grid(s);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

CounterfactualPolicy make_cf(const CfFlags& f, const Policy& actual) {
  CounterfactualPolicy cf = CounterfactualPolicy::from(actual);
  if (!f.rho_star.empty()) cf.rho = parse_list(f.rho_star);
  if (f.sigma_star) cf.sigma = *f.sigma_star;
  if (f.alpha_star) cf.alpha = *f.alpha_star;
  return cf;
}

template <class T>
T parse_enum(const std::string& s, T (*fn)(const std::string&)) {
  try {
    return fn(s);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

ClipRule make_clip(const std::string& s) {
  if (s == "fifth") return ClipRule::fifth_largest();
  try {
    std::size_t used = 0;
    double r = std::stod(s, &used);
    if (used != s.size() || !(r > 0)) throw std::invalid_argument(s);
    return ClipRule::explicit_cap(r);
  } catch (const std::exception&) {
    throw UsageError("--clip must be 'fifth' or a positive number");
  }
}

void require_log(const Options& o) {
  if (o.c.log.empty()) throw UsageError("--log is required");
}

struct Output {
  std::string text;
  std::vector<std::string> inputs;
  json extra = json::object();
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string csv_row(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
  return s + "\n";
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

// --- subcommands -----------------------------------------------------------

Output cmd_simulate(const Options& o) {
  if (o.c.log.empty()) throw UsageError("--log is required");
  if (o.n < 1) throw UsageError("-n must be positive");
  WorldConfig cfg = load_config(o.c.config);
  Policy pol = make_policy(o.pol);
  World w(cfg);
  LogHeader h = make_header(cfg, pol, o.n, o.c.seed);
  LogWriter wr(o.c.log, h);
  const std::size_t chunk = 65536;
  for (std::size_t start = 0; start < o.n; start += chunk) {
    std::size_t len = std::min(chunk, o.n - start);
    std::vector<LogRecord> recs(len);
    parallel_for(len, [&](std::size_t i) { recs[i] = simulate_page(w, pol, o.c.seed, start + i); });
    for (const auto& r : recs) wr.write(r);
  }
  wr.close();
  Output out;
  json j = {{"log", o.c.log}, {"n", o.n}, {"seed", o.c.seed}, {"config_hash", h.config_hash}, {"policy", to_json(pol)}};
  out.text = o.c.format == "csv" ? csv_row({"log", "n", "seed", "config_hash"}) +
                                       csv_row({o.c.log, std::to_string(o.n), std::to_string(o.c.seed), h.config_hash})
                                 : dump(j);
  out.extra["outputs"] = {o.c.log};
  if (!o.c.config.empty()) out.inputs.push_back(o.c.config);
  return out;
}

Output cmd_estimate(const Options& o) {
  require_log(o);
  Metric metric = parse_enum(o.metric, metric_from_string);
  ReweightPoint point = parse_enum(o.point, reweight_point_from_string);
  EstimateOptions eo;
  eo.delta = o.c.delta;
  eo.method = parse_enum(o.method, bound_method_from_string);
  eo.clip = make_clip(o.clip);
  std::vector<double> w;
  std::vector<double> ell;
  LogHeader header;
  CounterfactualPolicy cf;
  if (point == ReweightPoint::SlateAndClickedPrices) {
    auto log = read_log(o.c.log);
    header = log.header;
    cf = make_cf(o.cf, header.policy);
    World world(header.config);
    w = weights_slate_prices(log.records, world, header.policy, cf);
    ell = metric_column(log.records, metric);
  } else {
    auto lc = load_columns(o.c.log, {metric});
    header = lc.header;
    cf = make_cf(o.cf, header.policy);
    w = weights(lc.cols, header.policy, cf, point);
    ell = std::move(lc.metrics[0]);
  }
  eo.M = metric_range(header.config, metric);
  auto e = estimate(ell, w, eo);
  Output out;
  if (o.c.format == "csv") {
    out.text = sweep_csv({SweepRow{cf, e}});
  } else if (o.c.format == "text") {
    auto iv = [](Interval v) { return "[" + num(v.lo) + ", " + num(v.hi) + "]"; };
    out.text = std::string(to_string(metric)) + " at " + cf.to_json().dump() + " (" + to_string(point) + " point, n " +
               std::to_string(e.n) + ")\n  Y_hat " + num(e.Y_hat) + "  W_hat " + num(e.W_hat) + "  R " + num(e.R) +
               "\n  outer " + iv(e.outer) + "\n  inner " + iv(e.inner) + "\n  final " + iv(e.final_) +
               (e.clamped ? "  (clamped)" : "") + "\n";
  } else {
    json j = e.to_json();
    j["metric"] = to_string(metric);
    j["point"] = to_string(point);
    j["theta"] = cf.to_json();
    out.text = dump(j);
  }
  out.inputs.push_back(o.c.log);
  return out;
}

Output cmd_sweep(const Options& o) {
  require_log(o);
  if (o.rho_grid.empty()) throw UsageError("--rho-grid is required");
  Metric metric = parse_enum(o.metric, metric_from_string);
  ReweightPoint point = parse_enum(o.point, reweight_point_from_string);
  if (point == ReweightPoint::SlateAndClickedPrices) throw UsageError("sweep supports the score and slate points");
  auto rhos = grid_of(o.rho_grid);
  auto lc = load_columns(o.c.log, {metric});
  EstimateOptions eo;
  eo.delta = o.c.delta;
  eo.method = parse_enum(o.method, bound_method_from_string);
  eo.clip = make_clip(o.clip);
  eo.M = metric_range(lc.header.config, metric);
  auto grid = rho_grid(lc.header.policy, rhos);
  if (o.cf.sigma_star)
    for (auto& g : grid) g.sigma = *o.cf.sigma_star;
  auto rows = sweep(lc.cols, lc.metrics[0], lc.header.policy, grid, point, eo);
  Output out;
  out.text = o.c.format == "json" ? dump(sweep_json(rows)) : sweep_csv(rows);
  out.inputs.push_back(o.c.log);
  return out;
}

Output cmd_levelcurves(const Options& o) {
  require_log(o);
  if (o.rho_grid.empty() || o.alpha_grid.empty()) throw UsageError("--rho-grid and --alpha-grid are required");
  Metric m1 = parse_enum(o.metric, metric_from_string), m2 = parse_enum(o.metric2, metric_from_string);
  auto rhos = grid_of(o.rho_grid), alphas = grid_of(o.alpha_grid);
  auto lc = load_columns(o.c.log, {m1, m2});
  EstimateOptions eo;
  eo.delta = o.c.delta;
  eo.method = parse_enum(o.method, bound_method_from_string);
  eo.clip = make_clip(o.clip);
  auto cells = level_curves(lc.cols, lc.metrics[0], metric_range(lc.header.config, m1), lc.metrics[1],
                            metric_range(lc.header.config, m2), lc.header.policy, rhos, alphas, eo);
  Output out;
  if (o.c.format == "json") {
    json a = json::array();
    for (const auto& c : cells)
      a.push_back({{"rho", c.rho}, {"alpha", c.alpha}, {"q1_hat", c.q1_hat}, {"q1_inner", c.q1_inner},
                   {"q2_hat", c.q2_hat}, {"q2_inner", c.q2_inner}});
    out.text = dump({{"q1", to_string(m1)}, {"q2", to_string(m2)}, {"cells", a}});
  } else {
    out.text = level_curves_csv(cells);
  }
  out.inputs.push_back(o.c.log);
  return out;
}

std::vector<Coord> parse_coords(const std::string& s) {
  std::vector<Coord> c;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) c.push_back(parse_enum(tok, coord_from_string));
  if (c.empty()) throw UsageError("--coords is empty");
  return c;
}

Output cmd_grad(const Options& o) {
  require_log(o);
  Metric metric = parse_enum(o.metric, metric_from_string);
  auto coords = parse_coords(o.coords);
  auto lc = load_columns(o.c.log, {metric});
  const Policy& actual = lc.header.policy;
  ParamPolicy theta{make_cf(o.cf, actual), coords};
  GradientEstimate g;
  json extra;
  if (o.mode == "counterfactual") {
    g = counterfactual_gradient(lc.cols, lc.metrics[0], {}, actual, theta);
    if (o.hessian) {
      auto h = counterfactual_hessian(lc.cols, lc.metrics[0], {}, actual, theta);
      json hv = json::array(), hs = json::array();
      for (Eigen::Index i = 0; i < h.value.rows(); ++i) {
        json rv = json::array(), rs = json::array();
        for (Eigen::Index k = 0; k < h.value.cols(); ++k) {
          rv.push_back(h.value(i, k));
          rs.push_back(h.se(i, k));
        }
        hv.push_back(rv);
        hs.push_back(rs);
      }
      extra = {{"value", hv}, {"se", hs}};
    }
  } else if (o.mode == "policy") {
    Baseline b;
    if (o.baseline == "optimal") b = Baseline::optimal();
    else if (o.baseline != "none") throw UsageError("--baseline must be none or optimal");
    g = policy_gradient(lc.cols, lc.metrics[0], actual, coords, b);
  } else if (o.mode == "capped") {
    if (!o.cap) throw UsageError("--cap is required in capped mode");
    g = offpolicy_capped_gradient(lc.cols, lc.metrics[0], actual, theta, *o.cap);
  } else {
    throw UsageError("--mode must be counterfactual, policy or capped");
  }
  Output out;
  if (o.c.format == "csv") {
    out.text = csv_row({"coord", "theta", "value", "se"});
    for (std::size_t j = 0; j < g.value.size(); ++j)
      out.text += csv_row({g.names[j], num(g.theta[j]), num(g.value[j]), num(g.se[j])});
  } else {
    json j = g.to_json();
    j["metric"] = to_string(metric);
    if (!extra.is_null()) j["hessian"] = extra;
    out.text = dump(j);
  }
  out.inputs.push_back(o.c.log);
  return out;
}

Output cmd_tune(const Options& o) {
  require_log(o);
  if (o.rho_grid.empty()) throw UsageError("--rho-grid is required");
  Metric obj = parse_enum(o.metric, metric_from_string);
  auto rhos = grid_of(o.rho_grid);
  std::vector<Metric> ms = {obj};
  if (o.max_mainline) ms.push_back(Metric::MainlineAds);
  auto lc = load_columns(o.c.log, ms);
  const Policy& actual = lc.header.policy;
  TuneProblem pb;
  if (o.alpha_grid.empty()) {
    pb.grid = rho_grid(actual, rhos);
  } else {
    for (double r : rhos)
      for (double a : grid_of(o.alpha_grid)) {
        auto cf = CounterfactualPolicy::shifted(actual, r);
        cf.alpha = a;
        pb.grid.push_back(cf);
      }
  }
  pb.objective_range = metric_range(lc.header.config, obj);
  pb.max_mainline = o.max_mainline;
  pb.mainline_range = metric_range(lc.header.config, Metric::MainlineAds);
  pb.delta = o.c.delta;
  pb.R = o.tune_clip;
  if (o.uniform == "covering") {
    pb.family.mode = UniformFamily::Mode::CoveringNumber;
    pb.family.covering_poly = {static_cast<double>(pb.grid.size())};
  } else if (o.uniform != "grid") {
    throw UsageError("--uniform must be grid or covering");
  }
  auto res = tune(lc.cols, lc.metrics[0], o.max_mainline ? std::span<const double>(lc.metrics[1]) : std::span<const double>{},
                  actual, pb);
  Output out;
  if (o.c.format == "csv") {
    out.text = csv_row({"rho", "alpha", "Y_hat", "W_hat", "lower", "upper", "mainline_hat", "mainline_upper",
                        "feasible", "selected"});
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
      const auto& r = res.rows[i];
      out.text += csv_row({num(r.cf.rho[0]), num(r.cf.alpha), num(r.y_hat), num(r.w_hat), num(r.lower), num(r.upper),
                           num(r.mainline_hat), num(r.mainline_upper), r.feasible ? "1" : "0",
                           i == res.best ? "1" : "0"});
    }
  } else {
    json j = res.to_json();
    j["objective"] = to_string(obj);
    out.text = dump(j);
  }
  out.inputs.push_back(o.c.log);
  return out;
}

Output cmd_equilibrium(const Options& o) {
  require_log(o);
  auto log = read_log(o.c.log);
  const Policy& pol = log.header.policy;
  std::vector<BidDerivatives> table;
  json adv = json::array();
  for (int a : advertisers_in(log.records)) {
    try {
      table.push_back(bid_derivative_estimates(log.records, pol, a));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientExposure) throw;
      adv.push_back({{"advertiser", a}, {"status", "insufficient"}, {"reason", e.what()}});
    }
  }
  auto models = estimate_values(table, log.header.config.bid_max);
  std::vector<int> active;
  std::vector<double> values;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& m = models[i];
    adv.push_back({{"advertiser", m.advertiser},
                   {"bid", m.bid},
                   {"value", m.value},
                   {"value_se", m.value_se},
                   {"status", to_string(m.status)},
                   {"impressions", m.impressions},
                   {"active", m.active},
                   {"dY_db", table[i].dY},
                   {"dZ_db", table[i].dZ},
                   {"cost_ledger", table[i].score_interpretation ? "charged" : "bid-interpretation"}});
    if (m.active) {
      active.push_back(m.advertiser);
      values.push_back(m.value);
    }
  }
  EquilibriumResponse resp;
  json report = {{"advertisers", adv}};
  if (!active.empty()) {
    auto sd = second_derivative_estimates(log.records, pol, active);
    resp = solve_response(sd, values);
    report["response"] = resp.to_json();
  } else {
    resp.xi.resize(0);
    report["response"] = {{"advertisers", json::array()}, {"xi", json::array()}, {"condition", nullptr}};
  }
  json dy = json::object();
  for (Metric m : {Metric::Clicks, Metric::MainlineAds, Metric::Revenue, Metric::AdValue})
    dy[to_string(m)] = total_derivative(log.records, pol, resp, m).to_json();
  report["dY_drho"] = dy;
  Output out;
  if (o.c.format == "csv") {
    out.text = csv_row({"advertiser", "bid", "value", "value_se", "status", "active"});
    for (const auto& m : models)
      out.text += csv_row({std::to_string(m.advertiser), num(m.bid), num(m.value), num(m.value_se), to_string(m.status),
                           m.active ? "1" : "0"});
  } else {
    out.text = dump(report);
  }
  out.inputs.push_back(o.c.log);
  return out;
}

std::string table_csv(const ContingencyTable& t) {
  std::string s = csv_row({"row", "column", "successes", "trials", "rate"});
  for (int r = 0; r < 2; ++r) {
    Cell ov = t.overall(r);
    s += csv_row({t.row_names[r], "overall", std::to_string(ov.successes), std::to_string(ov.trials), num(ov.rate())});
    for (int k = 0; k < 2; ++k)
      s += csv_row({t.row_names[r], t.strata_names[k], std::to_string(t.cells[r][k].successes),
                    std::to_string(t.cells[r][k].trials), num(t.cells[r][k].rate())});
  }
  return s;
}

Output cmd_simpson(const Options& o) {
  auto rep = simpson_demo();
  Output out;
  if (o.c.format == "json") out.text = dump(rep.to_json());
  else if (o.c.format == "csv") out.text = table_csv(rep.table);
  else out.text = rep.text;
  return out;
}

Output cmd_table2(const Options& o, std::ostream& err) {
  Output out;
  std::string fixture = "reference cells (second mainline ad clicks):\n" + table2_fixture_text();
  if (o.c.log.empty()) {
    if (o.c.format == "json") {
      auto f = table2_fixture();
      json j = json::array();
      const char* g[2] = {"q1 low", "q1 high"};
      for (int i = 0; i < 2; ++i)
        j.push_back({{"group", g[i]},
                     {"overall", {f.overall[i].cell.successes, f.overall[i].cell.trials, f.overall[i].rate}},
                     {"q2 low", {f.strata[i][0].cell.successes, f.strata[i][0].cell.trials, f.strata[i][0].rate}},
                     {"q2 high", {f.strata[i][1].cell.successes, f.strata[i][1].cell.trials, f.strata[i][1].rate}}});
      out.text = dump({{"fixture", j}});
    } else {
      out.text = fixture;
    }
    return out;
  }
  auto log = read_log(o.c.log);
  auto rep = table2_analysis(log.records, log.header.config, {o.q1, o.q2});
  for (const auto& w : rep.warnings) err << "warning: " << w << "\n";
  if (o.c.format == "json") out.text = dump(rep.to_json());
  else if (o.c.format == "csv") out.text = table_csv(rep.table);
  else out.text = fixture + "\nlog cells (q1 threshold " + num(o.q1) + ", q2 threshold " + num(o.q2) + "):\n" + rep.text;
  out.inputs.push_back(o.c.log);
  return out;
}

void write_manifest(const std::string& path, const std::string& sub, const std::vector<std::string>& args,
                    const Options& o, const Output& out) {
  json inputs = json::array();
  for (const auto& p : out.inputs) inputs.push_back({{"path", p}, {"fnv64", hex(fnv_file(p))}});
  json m = {{"tool", "cfr"},
            {"version", kVersion},
            {"log_schema_version", kLogSchemaVersion},
            {"subcommand", sub},
            {"args", args},
            {"seed", o.c.seed},
            {"delta", o.c.delta},
            {"threads", threads()},
            {"inputs", inputs},
            {"output", o.c.out.empty() ? json("stdout") : json(o.c.out)},
            {"output_fnv64", hex(std::hash<std::string>{}(out.text))},
            {"created", utc_now()}};
  for (auto& [k, v] : out.extra.items()) m[k] = v;
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::IoError, "cannot write manifest " + path);
  f << m.dump(2) << "\n";
}

void add_common(CLI::App* s, Options& o, bool log, bool config, bool seed) {
  if (config) s->add_option("--config", o.c.config, "World config JSON (default: built-in standard world)");
  if (log) s->add_option("--log", o.c.log, "Log file (JSONL, .gz for gzip)");
  if (seed) s->add_option("--seed", o.c.seed, "Random seed");
  s->add_option("--delta", o.c.delta, "Confidence parameter delta in (0, 0.5)")->capture_default_str();
  s->add_option("--out", o.c.out, "Output file (default: stdout)");
  s->add_option("--format", o.c.format, "Output format")->check(CLI::IsMember({"json", "csv", "text"}));
  s->add_option("--threads", o.c.threads, "Worker threads (0 = all)");
  s->add_option("--manifest", o.c.manifest, "Run manifest path (default: <out>.manifest.json or cfr-manifest.json)");
}

void add_cf(CLI::App* s, Options& o) {
  s->add_option("--rho-star", o.cf.rho_star, "Counterfactual reserve location; comma list gives one per cluster");
  s->add_option("--sigma-star", o.cf.sigma_star, "Counterfactual reserve spread (default: logging spread)");
  s->add_option("--alpha-star", o.cf.alpha_star, "Counterfactual squashing exponent mean");
}

void add_estimator(CLI::App* s, Options& o, bool point) {
  s->add_option("--metric", o.metric, "Metric")
      ->check(CLI::IsMember({"clicks", "mainline", "revenue", "value"}))
      ->capture_default_str();
  if (point)
    s->add_option("--point", o.point, "Reweighting point")
        ->check(CLI::IsMember({"score", "slate", "slate-prices"}))
        ->capture_default_str();
  s->add_option("--method", o.method, "Outer interval")->check(CLI::IsMember({"clt", "bernstein"}))->capture_default_str();
  s->add_option("--clip", o.clip, "Clip level R: 'fifth' (fifth-largest weight) or a number")->capture_default_str();
}

struct Parser {
  CLI::App app{"Counterfactual estimation for a simulated ad-placement system", "cfr"};
  Options o;
  std::map<std::string, CLI::App*> subs;

  Parser() {
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    auto* s = app.add_subcommand("simulate", "Simulate pages under a randomized policy and write a log");
    add_common(s, o, true, true, true);
    s->add_option("-n,--pages", o.n, "Number of pages")->capture_default_str();
    s->add_option("--policy", o.pol.policy, "Policy JSON");
    s->add_option("--rho", o.pol.rho, "Reserve multiplier location (mean)");
    s->add_option("--sigma", o.pol.sigma, "Reserve multiplier log-spread");
    s->add_option("--alpha", o.pol.alpha, "Squashing exponent mean");
    s->add_option("--alpha-sigma", o.pol.alpha_sigma, "Squashing exponent standard deviation");
    s->add_option("--bid-sigma", o.pol.bid_sigma, "Per-ad bid multiplier log-spread");
    s->add_flag("--bid-interpretation", o.pol.bid_interpretation,
                "Charge as if multipliers scaled bids (default: scale click estimates)");
    subs["simulate"] = s;

    s = app.add_subcommand("estimate", "Counterfactual estimate with inner/outer confidence intervals");
    add_common(s, o, true, false, false);
    add_cf(s, o);
    add_estimator(s, o, true);
    subs["estimate"] = s;

    s = app.add_subcommand("sweep", "Estimates over a grid of counterfactual reserves");
    add_common(s, o, true, false, false);
    s->add_option("--rho-grid", o.rho_grid, "start:stop:step (inclusive) or a single value");
    s->add_option("--sigma-star", o.cf.sigma_star, "Counterfactual reserve spread (default: logging spread)");
    add_estimator(s, o, true);
    subs["sweep"] = s;

    s = app.add_subcommand("levelcurves", "Two-metric estimate table over a (rho, alpha) grid");
    add_common(s, o, true, false, false);
    s->add_option("--rho-grid", o.rho_grid, "start:stop:step");
    s->add_option("--alpha-grid", o.alpha_grid, "start:stop:step");
    add_estimator(s, o, false);
    s->add_option("--metric2", o.metric2, "Second metric")
        ->check(CLI::IsMember({"clicks", "mainline", "revenue", "value"}))
        ->capture_default_str();
    subs["levelcurves"] = s;

    s = app.add_subcommand("grad", "Counterfactual, policy or capped off-policy gradients");
    add_common(s, o, true, false, false);
    add_cf(s, o);
    s->add_option("--metric", o.metric, "Metric")
        ->check(CLI::IsMember({"clicks", "mainline", "revenue", "value"}))
        ->capture_default_str();
    s->add_option("--coords", o.coords, "Comma list of rho, sigma, alpha")->capture_default_str();
    s->add_option("--mode", o.mode, "counterfactual | policy | capped")->capture_default_str();
    s->add_option("--baseline", o.baseline, "Policy-gradient baseline: none | optimal")->capture_default_str();
    s->add_option("--cap", o.cap, "Weight cap R for capped mode");
    s->add_flag("--hessian", o.hessian, "Also report second derivatives (counterfactual mode)");
    subs["grad"] = s;

    s = app.add_subcommand("tune", "Maximize a uniform lower bound over a grid, with a mainline footprint cap");
    add_common(s, o, true, false, false);
    s->add_option("--rho-grid", o.rho_grid, "start:stop:step");
    s->add_option("--alpha-grid", o.alpha_grid, "start:stop:step (optional)");
    s->add_option("--metric", o.metric, "Objective metric")
        ->check(CLI::IsMember({"clicks", "mainline", "revenue", "value"}))
        ->capture_default_str();
    s->add_option("--max-mainline", o.max_mainline, "Cap on expected mainline ads per page");
    s->add_option("--clip", o.tune_clip, "Common clip level R")->capture_default_str();
    s->add_option("--uniform", o.uniform, "Uniform bound: grid | covering")->capture_default_str();
    subs["tune"] = s;

    s = app.add_subcommand("equilibrium", "Advertiser values, bid responses and total derivatives");
    add_common(s, o, true, false, false);
    subs["equilibrium"] = s;

    s = app.add_subcommand("simpson-demo", "Kidney-stone contingency table and reversal verdict");
    add_common(s, o, false, false, false);
    subs["simpson-demo"] = s;

    s = app.add_subcommand("table2-demo", "Second-mainline-ad click rates by q1 group and q2 stratum");
    add_common(s, o, true, false, false);
    s->add_option("--q1-threshold", o.q1, "Threshold on the top mainline click estimate")->capture_default_str();
    s->add_option("--q2-threshold", o.q2, "Threshold on the second mainline click estimate")->capture_default_str();
    subs["table2-demo"] = s;
  }
};

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s = {"simulate", "estimate",    "sweep",        "levelcurves", "grad",
                                             "tune",     "equilibrium", "simpson-demo", "table2-demo"};
  return s;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Parser p;
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    p.app.parse(rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, x;
    int code = p.app.exit(e, o, x);
    out << o.str();
    err << x.str();
    return code == 0 ? kExitOk : kExitUsage;
  }
  Options& o = p.o;
  std::string sub = p.app.get_subcommands().at(0)->get_name();
  try {
    if (!(o.c.delta > 0 && o.c.delta < 0.5)) throw UsageError("--delta must lie in (0, 0.5)");
    if (o.c.threads < 0) throw UsageError("--threads must be >= 0");
    set_threads(o.c.threads);
    Output res;
    if (sub == "simulate") res = cmd_simulate(o);
    else if (sub == "estimate") res = cmd_estimate(o);
    else if (sub == "sweep") res = cmd_sweep(o);
    else if (sub == "levelcurves") res = cmd_levelcurves(o);
    else if (sub == "grad") res = cmd_grad(o);
    else if (sub == "tune") res = cmd_tune(o);
    else if (sub == "equilibrium") res = cmd_equilibrium(o);
    else if (sub == "simpson-demo") res = cmd_simpson(o);
    else res = cmd_table2(o, err);
    if (o.c.out.empty()) {
      out << res.text;
    } else {
      std::ofstream f(o.c.out, std::ios::binary);
      if (!f) throw Error(ErrorCode::IoError, "cannot write " + o.c.out);
      f << res.text;
      if (!f) throw Error(ErrorCode::IoError, "write failed for " + o.c.out);
    }
    std::string mpath = !o.c.manifest.empty() ? o.c.manifest
                        : !o.c.out.empty()    ? o.c.out + ".manifest.json"
                        : sub == "simulate"   ? o.c.log + ".manifest.json"
                                              : "cfr-manifest.json";
    write_manifest(mpath, sub, args, o, res);
    return kExitOk;
  } catch (const UsageError& e) {
    err << "cfr " << sub << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "cfr " << sub << ": " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "cfr " << sub << ": " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace cfr::cli
