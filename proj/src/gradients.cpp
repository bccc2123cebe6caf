#include "cfr/gradients.hpp"

#include <cmath>

#include "cfr/error.hpp"
#include "cfr/parallel.hpp"

namespace cfr {

using nlohmann::json;

const char* to_string(Coord c) {
  switch (c) {
    case Coord::Rho: return "rho";
    case Coord::Sigma: return "sigma";
    case Coord::Alpha: return "alpha";
  }
  return "?";
}

Coord coord_from_string(const std::string& s) {
  if (s == "rho") return Coord::Rho;
  if (s == "sigma") return Coord::Sigma;
  if (s == "alpha") return Coord::Alpha;
  throw Error(ErrorCode::InvalidArgument, "unknown coordinate '" + s + "'");
}

ParamPolicy ParamPolicy::around(const Policy& p, std::vector<Coord> coords) {
  return {CounterfactualPolicy::from(p), std::move(coords)};
}

std::vector<double> ParamPolicy::theta() const {
  std::vector<double> t;
  for (auto c : coords) {
    switch (c) {
      case Coord::Rho:
        if (at.rho.size() != 1) throw Error(ErrorCode::InvalidArgument, "rho coordinate needs a single reserve");
        t.push_back(at.rho[0]);
        break;
      case Coord::Sigma: t.push_back(at.sigma); break;
      case Coord::Alpha: t.push_back(at.alpha); break;
    }
  }
  return t;
}

void ParamPolicy::score(const Columns& cols, std::size_t i, std::span<double> out) const {
  LogNormal law = at.reserve_law(cols.cluster[i]);
  for (std::size_t j = 0; j < coords.size(); ++j) {
    switch (coords[j]) {
      case Coord::Rho: out[j] = law.dlog_drho(cols.m[i]); break;
      case Coord::Sigma: out[j] = law.dlog_dsigma(cols.m[i]); break;
      case Coord::Alpha:
        out[j] = (cols.alpha[i] - at.alpha_for(cols.cluster[i])) / (at.alpha_sigma * at.alpha_sigma);
        break;
    }
  }
}

void ParamPolicy::score_hessian(const Columns& cols, std::size_t i, std::span<double> out) const {
  LogNormal law = at.reserve_law(cols.cluster[i]);
  double m = cols.m[i];
  std::size_t d = coords.size();
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < d; ++k) {
      Coord a = coords[j], b = coords[k];
      double h = 0;
      if (a == Coord::Rho && b == Coord::Rho) h = law.d2log_drho2(m);
      else if (a == Coord::Sigma && b == Coord::Sigma) h = law.d2log_dsigma2(m);
      else if ((a == Coord::Rho && b == Coord::Sigma) || (a == Coord::Sigma && b == Coord::Rho))
        h = law.d2log_drho_dsigma(m);
      else if (a == Coord::Alpha && b == Coord::Alpha) h = -1 / (at.alpha_sigma * at.alpha_sigma);
      out[j * d + k] = h;  // reserve and exponent are distinct factors: cross terms vanish
    }
  }
}

namespace {

void check_theta(const ParamPolicy& t) {
  if (t.coords.empty()) throw Error(ErrorCode::InvalidArgument, "no coordinates to differentiate");
  for (std::size_t j = 0; j < t.coords.size(); ++j)
    for (std::size_t k = 0; k < j; ++k)
      if (t.coords[j] == t.coords[k]) throw Error(ErrorCode::InvalidArgument, "repeated coordinate");
  for (auto c : t.coords) {
    if ((c == Coord::Rho || c == Coord::Sigma) && !(t.at.sigma > 0))
      throw Error(ErrorCode::ZeroDenominator, "reserve derivatives need sigma > 0");
    if (c == Coord::Alpha && !(t.at.alpha_sigma > 0))
      throw Error(ErrorCode::ZeroDenominator, "exponent derivatives need alpha_sigma > 0");
    if (c == Coord::Rho && t.at.rho.size() != 1)
      throw Error(ErrorCode::InvalidArgument, "rho coordinate needs a single reserve");
  }
}

std::vector<std::string> names_of(const ParamPolicy& t) {
  std::vector<std::string> n;
  for (auto c : t.coords) n.push_back(to_string(c));
  return n;
}

double normal_logpdf(double x, double mu, double sd) {
  double z = (x - mu) / sd;
  return -0.5 * z * z - std::log(sd);
}

// Per-coordinate columns of integrand values; mean and CLT standard error.
void summarize(const std::vector<std::vector<double>>& cols, std::vector<double>& value, std::vector<double>& se) {
  value.clear();
  se.clear();
  for (const auto& c : cols) {
    value.push_back(mean(c));
    se.push_back(std::sqrt(sample_variance(c) / c.size()));
  }
}

}  // namespace

std::vector<double> density_weights(const Columns& cols, const Policy& actual, const CounterfactualPolicy& cf) {
  LogNormal act = actual.reserve_law();
  std::size_t n = cols.size();
  std::vector<double> w(n);
  bool same_reserve = cf.sigma == actual.sigma;
  for (double r : cf.rho) same_reserve &= r == actual.rho;
  bool same_alpha = cf.alpha_sigma == actual.alpha_sigma && cf.alpha_by_cluster.empty() && cf.alpha == actual.alpha;
  if (!same_reserve && !(actual.sigma > 0 && cf.sigma > 0))
    throw Error(ErrorCode::ZeroDenominator, "reserve densities need sigma > 0");
  if (!same_alpha && !(actual.alpha_sigma > 0 && cf.alpha_sigma > 0))
    throw Error(ErrorCode::ZeroDenominator, "exponent densities need alpha_sigma > 0");
  parallel_for(n, [&](std::size_t i) {
    double lw = 0;
    int k = cols.cluster[i];
    if (!same_reserve) lw += cf.reserve_law(k).log_pdf(cols.m[i]) - act.log_pdf(cols.m[i]);
    if (!same_alpha)
      lw += normal_logpdf(cols.alpha[i], cf.alpha_for(k), cf.alpha_sigma) -
            normal_logpdf(cols.alpha[i], actual.alpha, actual.alpha_sigma);
    w[i] = std::exp(lw);
  }, 4096);
  return w;
}

GradientEstimate counterfactual_gradient(const Columns& cols, std::span<const double> ell,
                                         std::span<const double> zeta, const Policy& actual,
                                         const ParamPolicy& theta) {
  check_theta(theta);
  std::size_t n = cols.size(), d = theta.coords.size();
  if (ell.size() != n || (!zeta.empty() && zeta.size() != n))
    throw Error(ErrorCode::InvalidArgument, "size mismatch in counterfactual_gradient");
  if (n < 2) throw Error(ErrorCode::TooFewSamples, "need at least 2 records");
  auto w = density_weights(cols, actual, theta.at);
  std::vector<std::vector<double>> f(d, std::vector<double>(n));
  parallel_for(
      n,
      [&](std::size_t i) {
        double s[3];
        theta.score(cols, i, {s, d});
        double r = (ell[i] - (zeta.empty() ? 0.0 : zeta[i])) * w[i];
        for (std::size_t j = 0; j < d; ++j) f[j][i] = r * s[j];
      },
      4096);
  GradientEstimate g;
  g.mode = theta.at.rho.size() == 1 && theta.at.rho[0] == actual.rho && theta.at.sigma == actual.sigma &&
                   theta.at.alpha == actual.alpha && theta.at.alpha_sigma == actual.alpha_sigma &&
                   theta.at.alpha_by_cluster.empty()
               ? GradientEstimate::Mode::OnPolicy
               : GradientEstimate::Mode::OffPolicy;
  g.names = names_of(theta);
  g.theta = theta.theta();
  g.n = n;
  summarize(f, g.value, g.se);
  return g;
}

HessianEstimate counterfactual_hessian(const Columns& cols, std::span<const double> ell,
                                       std::span<const double> zeta, const Policy& actual, const ParamPolicy& theta) {
  check_theta(theta);
  std::size_t n = cols.size(), d = theta.coords.size();
  if (ell.size() != n || (!zeta.empty() && zeta.size() != n))
    throw Error(ErrorCode::InvalidArgument, "size mismatch in counterfactual_hessian");
  if (n < 2) throw Error(ErrorCode::TooFewSamples, "need at least 2 records");
  auto w = density_weights(cols, actual, theta.at);
  std::vector<std::vector<double>> f(d * d, std::vector<double>(n));
  parallel_for(
      n,
      [&](std::size_t i) {
        double s[3], h[9];
        theta.score(cols, i, {s, d});
        theta.score_hessian(cols, i, {h, d * d});
        double r = (ell[i] - (zeta.empty() ? 0.0 : zeta[i])) * w[i];
        for (std::size_t j = 0; j < d; ++j)
          for (std::size_t k = 0; k < d; ++k) f[j * d + k][i] = r * (s[j] * s[k] + h[j * d + k]);
      },
      4096);
  std::vector<double> v, se;
  summarize(f, v, se);
  HessianEstimate out;
  out.names = names_of(theta);
  out.n = n;
  out.value.resize(d, d);
  out.se.resize(d, d);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t k = 0; k < d; ++k) {
      out.value(j, k) = 0.5 * (v[j * d + k] + v[k * d + j]);
      out.se(j, k) = 0.5 * (se[j * d + k] + se[k * d + j]);
    }
  return out;
}

GradientEstimate policy_gradient(const Columns& cols, std::span<const double> ell, const Policy& pol,
                                 const std::vector<Coord>& coords, Baseline baseline) {
  ParamPolicy theta = ParamPolicy::around(pol, coords);
  check_theta(theta);
  std::size_t n = cols.size(), d = coords.size();
  if (ell.size() != n) throw Error(ErrorCode::InvalidArgument, "size mismatch in policy_gradient");
  if (n < 2) throw Error(ErrorCode::TooFewSamples, "need at least 2 records");
  std::vector<std::vector<double>> sc(d, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    double s[3];
    theta.score(cols, i, {s, d});
    for (std::size_t j = 0; j < d; ++j) sc[j][i] = s[j];
  }
  std::vector<std::vector<double>> f(d, std::vector<double>(n));
  for (std::size_t j = 0; j < d; ++j) {
    double z = 0;
    if (baseline.kind == Baseline::Kind::Constant) {
      z = baseline.c;
    } else if (baseline.kind == Baseline::Kind::Optimal) {
      std::vector<double> num(n), den(n);
      for (std::size_t i = 0; i < n; ++i) {
        den[i] = sc[j][i] * sc[j][i];
        num[i] = ell[i] * den[i];
      }
      double dd = pairwise_sum(den);
      z = dd > 0 ? pairwise_sum(num) / dd : 0.0;
    }
    for (std::size_t i = 0; i < n; ++i) f[j][i] = (ell[i] - z) * sc[j][i];
  }
  GradientEstimate g;
  g.mode = GradientEstimate::Mode::OnPolicy;
  g.names = names_of(theta);
  g.theta = theta.theta();
  g.n = n;
  summarize(f, g.value, g.se);
  return g;
}

CappedValue capped_value(const Columns& cols, std::span<const double> ell, const Policy& actual,
                         const CounterfactualPolicy& cf, double R) {
  auto w = density_weights(cols, actual, cf);
  std::vector<double> y(w.size()), c(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    c[i] = std::min(w[i], R);
    y[i] = ell[i] * c[i];
  }
  return {mean(y), mean(c)};
}

GradientEstimate offpolicy_capped_gradient(const Columns& cols, std::span<const double> ell, const Policy& actual,
                                           const ParamPolicy& theta, double R) {
  check_theta(theta);
  if (!(R > 0)) throw Error(ErrorCode::InvalidArgument, "cap must be positive");
  std::size_t n = cols.size(), d = theta.coords.size();
  if (ell.size() != n) throw Error(ErrorCode::InvalidArgument, "size mismatch in offpolicy_capped_gradient");
  if (n < 2) throw Error(ErrorCode::TooFewSamples, "need at least 2 records");
  auto w = density_weights(cols, actual, theta.at);
  GradientEstimate g;
  g.mode = GradientEstimate::Mode::OffPolicyCapped;
  for (double x : w)
    if (x == R) g.tie_at_cap = true;
  if (g.tie_at_cap) R = std::nextafter(R, kInf);
  std::vector<std::vector<double>> fy(d, std::vector<double>(n)), fw(d, std::vector<double>(n));
  std::vector<double> yb(n), wb(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s[3];
    theta.score(cols, i, {s, d});
    bool capped = w[i] >= R;
    wb[i] = capped ? R : w[i];
    yb[i] = ell[i] * wb[i];
    for (std::size_t j = 0; j < d; ++j) {
      double dw = capped ? 0.0 : w[i] * s[j];
      fw[j][i] = dw;
      fy[j][i] = ell[i] * dw;
    }
  }
  g.names = names_of(theta);
  g.theta = theta.theta();
  g.n = n;
  g.R = R;
  g.ybar = mean(yb);
  g.wbar = mean(wb);
  summarize(fy, g.value, g.se);
  summarize(fw, g.d_wbar, g.d_wbar_se);
  return g;
}

json GradientEstimate::to_json() const {
  const char* m = mode == Mode::OnPolicy ? "on-policy" : mode == Mode::OffPolicy ? "off-policy" : "off-policy-capped";
  json j = {{"mode", m}, {"coords", names}, {"theta", theta}, {"value", value}, {"se", se}, {"n", n}};
  if (mode == Mode::OffPolicyCapped) {
    j["d_wbar"] = d_wbar;
    j["d_wbar_se"] = d_wbar_se;
    j["ybar"] = ybar;
    j["wbar"] = wbar;
    j["R"] = R;
    j["tie_at_cap"] = tie_at_cap;
  }
  return j;
}

AscentResult ascend_lower_bound(const Columns& cols, std::span<const double> ell, const Policy& actual,
                                double rho0, double R, double rho_lo, double rho_hi, double step, int max_steps) {
  AscentResult a;
  a.rho = rho0;
  auto value_at = [&](double rho) {
    return capped_value(cols, ell, actual, CounterfactualPolicy::shifted(actual, rho), R).ybar;
  };
  a.ybar = value_at(a.rho);
  for (a.steps = 0; a.steps < max_steps && step > 1e-4; ++a.steps) {
    ParamPolicy t{CounterfactualPolicy::shifted(actual, a.rho), {Coord::Rho}};
    auto g = offpolicy_capped_gradient(cols, ell, actual, t, R);
    double dir = g.value[0] > 0 ? 1.0 : -1.0;
    double next = std::clamp(a.rho + dir * step, rho_lo, rho_hi);
    double v = value_at(next);
    if (v > a.ybar) {
      a.rho = next;
      a.ybar = v;
    } else {
      step *= 0.5;
    }
  }
  return a;
}

}  // namespace cfr
