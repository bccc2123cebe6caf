#include "cfr/tuner.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "cfr/error.hpp"
#include "cfr/parallel.hpp"

namespace cfr {

using nlohmann::json;

std::vector<double> grid_range(double start, double stop, double step) {
  if (!(step > 0) || !(stop >= start) || !std::isfinite(start) || !std::isfinite(stop))
    throw Error(ErrorCode::InvalidArgument, "grid needs start <= stop and step > 0");
  std::vector<double> g;
  for (long k = 0;; ++k) {
    double x = start + k * step;
    if (x > stop + 1e-9) break;
    g.push_back(std::abs(x - stop) <= 1e-9 ? stop : x);
    if (g.size() > 1000000) throw Error(ErrorCode::InvalidArgument, "grid too large");
  }
  return g;
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad grid '" + spec + "'");
    }
  }
  if (parts.size() == 1) return parts;
  if (parts.size() != 3) throw Error(ErrorCode::InvalidArgument, "grid must be start:stop:step");
  return grid_range(parts[0], parts[1], parts[2]);
}

std::vector<CounterfactualPolicy> rho_grid(const Policy& actual, const std::vector<double>& rhos) {
  std::vector<CounterfactualPolicy> g;
  for (double r : rhos) g.push_back(CounterfactualPolicy::shifted(actual, r));
  return g;
}

namespace {

template <class F>
void for_grid(std::size_t n, F&& f) {
  parallel_for(n, std::forward<F>(f), 1);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string rho_label(const CounterfactualPolicy& cf) {
  std::string s;
  for (std::size_t k = 0; k < cf.rho.size(); ++k) s += (k ? ";" : "") + fmt(cf.rho[k]);
  return s;
}

std::string alpha_label(const CounterfactualPolicy& cf) {
  if (cf.alpha_by_cluster.empty()) return fmt(cf.alpha);
  std::string s;
  for (std::size_t k = 0; k < cf.alpha_by_cluster.size(); ++k) s += (k ? ";" : "") + fmt(cf.alpha_by_cluster[k]);
  return s;
}

}  // namespace

std::vector<SweepRow> sweep(const Columns& cols, std::span<const double> ell, const Policy& actual,
                            const std::vector<CounterfactualPolicy>& grid, ReweightPoint point,
                            const EstimateOptions& opt) {
  if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty grid");
  std::vector<SweepRow> rows(grid.size());
  for_grid(grid.size(), [&](std::size_t i) {
    auto w = weights(cols, actual, grid[i], point, {.serial = true});
    rows[i] = {grid[i], estimate(ell, w, opt)};
  });
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string s =
      "rho,alpha,Y_hat,W_hat,R,eps,xi,outer_lo,outer_hi,inner_lo,inner_hi,final_lo,final_hi,clamped\n";
  for (const auto& r : rows) {
    const auto& e = r.est;
    s += rho_label(r.cf) + "," + alpha_label(r.cf) + "," + fmt(e.Y_hat) + "," + fmt(e.W_hat) + "," + fmt(e.R) + "," +
         fmt(e.eps) + "," + fmt(e.xi) + "," + fmt(e.outer.lo) + "," + fmt(e.outer.hi) + "," + fmt(e.inner.lo) + "," +
         fmt(e.inner.hi) + "," + fmt(e.final_.lo) + "," + fmt(e.final_.hi) + "," + (e.clamped ? "1" : "0") + "\n";
  }
  return s;
}

json sweep_json(const std::vector<SweepRow>& rows) {
  json a = json::array();
  for (const auto& r : rows) a.push_back({{"theta", r.cf.to_json()}, {"estimate", r.est.to_json()}});
  return a;
}

namespace {

bool rho_less(const CounterfactualPolicy& a, const CounterfactualPolicy& b) {
  if (a.rho != b.rho) return a.rho < b.rho;
  std::vector<double> aa = a.alpha_by_cluster.empty() ? std::vector<double>{a.alpha} : a.alpha_by_cluster;
  std::vector<double> bb = b.alpha_by_cluster.empty() ? std::vector<double>{b.alpha} : b.alpha_by_cluster;
  return aa < bb;
}

// theta* lies on the hull if any coordinate that varies over the grid sits at
// its extreme value.
bool on_boundary(const std::vector<CounterfactualPolicy>& grid, const CounterfactualPolicy& t) {
  auto coords = [](const CounterfactualPolicy& c) {
    std::vector<double> v = c.rho;
    if (c.alpha_by_cluster.empty()) v.push_back(c.alpha);
    else v.insert(v.end(), c.alpha_by_cluster.begin(), c.alpha_by_cluster.end());
    return v;
  };
  auto tc = coords(t);
  for (std::size_t j = 0; j < tc.size(); ++j) {
    double lo = kInf, hi = -kInf;
    for (const auto& g : grid) {
      auto gc = coords(g);
      if (gc.size() != tc.size()) throw Error(ErrorCode::InvalidArgument, "grid points differ in shape");
      lo = std::min(lo, gc[j]);
      hi = std::max(hi, gc[j]);
    }
    if (lo < hi && (tc[j] == lo || tc[j] == hi)) return true;
  }
  return false;
}

}  // namespace

TuneResult tune(const Columns& cols, std::span<const double> objective, std::span<const double> mainline,
                const Policy& actual, const TuneProblem& pb) {
  std::size_t n = cols.size();
  if (n < 16) throw Error(ErrorCode::TooFewSamples, "tuning needs n >= 16");
  if (pb.grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty grid");
  if (objective.size() != n) throw Error(ErrorCode::InvalidArgument, "objective column size mismatch");
  if (pb.max_mainline) {
    if (!(*pb.max_mainline > 0)) throw Error(ErrorCode::InvalidArgument, "footprint cap must be positive");
    if (mainline.size() != n) throw Error(ErrorCode::InvalidArgument, "mainline column size mismatch");
  }
  UniformFamily fam = pb.family;
  if (fam.mode == UniformFamily::Mode::FiniteGrid) fam.grid_size = pb.grid.size();

  TuneResult res;
  res.rows.resize(pb.grid.size());
  for_grid(pb.grid.size(), [&](std::size_t g) {
    auto w = weights(cols, actual, pb.grid[g], pb.point, {.serial = true});
    std::vector<double> wb(n), f(n);
    for (std::size_t i = 0; i < n; ++i) {
      wb[i] = w[i] < pb.R ? w[i] : 0.0;
      if (!(objective[i] >= 0 && objective[i] <= pb.objective_range))
        throw Error(ErrorCode::RangeViolation, "objective outside [0, M]");
      f[i] = objective[i] * wb[i];
    }
    TuneRow& row = res.rows[g];
    row.cf = pb.grid[g];
    auto uw = uniform_halfwidths(fam, f, pb.objective_range * pb.R, wb, pb.R, pb.delta);
    row.y_hat = mean(f);
    row.w_hat = mean(wb);
    double gap = std::max(1 - row.w_hat + uw.xi, 0.0);
    row.lower = row.y_hat - uw.eps;
    row.upper = row.y_hat + uw.eps + pb.objective_range * gap;
    if (pb.max_mainline) {
      std::vector<double> h(n);
      for (std::size_t i = 0; i < n; ++i) h[i] = mainline[i] * wb[i];
      auto mw = uniform_halfwidths(fam, h, pb.mainline_range * pb.R, wb, pb.R, pb.delta);
      row.mainline_hat = mean(h);
      row.mainline_upper = row.mainline_hat + mw.eps + pb.mainline_range * gap;
      row.feasible = row.mainline_upper <= *pb.max_mainline;
    }
  });

  std::optional<std::size_t> best;
  for (std::size_t g = 0; g < res.rows.size(); ++g) {
    const auto& r = res.rows[g];
    if (!r.feasible) continue;
    if (!best || r.lower > res.rows[*best].lower ||
        (r.lower == res.rows[*best].lower && rho_less(r.cf, res.rows[*best].cf)))
      best = g;
  }
  if (!best) throw Error(ErrorCode::NoFeasiblePoint, "every grid point violates the footprint cap");
  res.best = *best;
  res.theta = res.rows[*best].cf;
  res.lower_bound = res.rows[*best].lower;
  res.slack = pb.max_mainline ? *pb.max_mainline - res.rows[*best].mainline_upper : kInf;
  res.boundary = on_boundary(pb.grid, res.theta);
  return res;
}

json TuneResult::to_json() const {
  json rows_j = json::array();
  for (const auto& r : rows)
    rows_j.push_back({{"theta", r.cf.to_json()},
                      {"Y_hat", r.y_hat},
                      {"W_hat", r.w_hat},
                      {"lower", r.lower},
                      {"upper", r.upper},
                      {"mainline_hat", r.mainline_hat},
                      {"mainline_upper", r.mainline_upper},
                      {"feasible", r.feasible}});
  return {{"theta_star", theta.to_json()},
          {"best", best},
          {"lower_bound", lower_bound},
          {"slack", std::isinf(slack) ? json(nullptr) : json(slack)},
          {"boundary", boundary},
          {"rows", rows_j}};
}

std::vector<LevelCell> level_curves(const Columns& cols, std::span<const double> q1, double M1,
                                    std::span<const double> q2, double M2, const Policy& actual,
                                    const std::vector<double>& rhos, const std::vector<double>& alphas,
                                    const EstimateOptions& opt) {
  if (rhos.empty() || alphas.empty()) throw Error(ErrorCode::InvalidArgument, "empty grid");
  if (!(actual.alpha_sigma > 0) || !(actual.sigma > 0))
    throw Error(ErrorCode::InvalidArgument, "level curves need logs randomizing both reserve and exponent");
  std::vector<LevelCell> cells(rhos.size() * alphas.size());
  for_grid(cells.size(), [&](std::size_t c) {
    double rho = rhos[c / alphas.size()], alpha = alphas[c % alphas.size()];
    CounterfactualPolicy cf = CounterfactualPolicy::shifted(actual, rho);
    cf.alpha = alpha;
    auto w = weights(cols, actual, cf, ReweightPoint::ScoreLevel, {.serial = true});
    EstimateOptions o1 = opt, o2 = opt;
    o1.M = M1;
    o2.M = M2;
    auto e1 = estimate(q1, w, o1), e2 = estimate(q2, w, o2);
    cells[c] = {rho, alpha, e1.Y_hat, e1.inner.hi - e1.inner.lo, e2.Y_hat, e2.inner.hi - e2.inner.lo};
  });
  return cells;
}

std::string level_curves_csv(const std::vector<LevelCell>& cells) {
  std::string s = "rho,alpha,q1_hat,q1_inner,q2_hat,q2_inner\n";
  for (const auto& c : cells)
    s += fmt(c.rho) + "," + fmt(c.alpha) + "," + fmt(c.q1_hat) + "," + fmt(c.q1_inner) + "," + fmt(c.q2_hat) + "," +
         fmt(c.q2_inner) + "\n";
  return s;
}

}  // namespace cfr
