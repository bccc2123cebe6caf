#include "cfr/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cfr/error.hpp"
#include "cfr/parallel.hpp"
#include "cfr/special.hpp"

namespace cfr {

const char* to_string(BoundMethod m) { return m == BoundMethod::CLT ? "clt" : "bernstein"; }

BoundMethod bound_method_from_string(const std::string& s) {
  if (s == "clt") return BoundMethod::CLT;
  if (s == "bernstein") return BoundMethod::Bernstein;
  throw Error(ErrorCode::InvalidArgument, "unknown bound method '" + s + "'");
}

double clt_eps(double var, std::size_t n, double delta) {
  return erfcinv(delta) * std::sqrt(2 * std::max(var, 0.0) / n);
}

double bernstein_eps(double var, std::size_t n, double range, double delta) {
  double l = std::log(2 / delta);
  return std::sqrt(2 * std::max(var, 0.0) * l / n) + range * 7 * l / (3 * (n - 1.0));
}

namespace {
void check_common(const BoundRequest& req) {
  if (req.samples.size() < 2) throw Error(ErrorCode::TooFewSamples, "need at least 2 samples");
  if (!(req.delta > 0 && req.delta < 1)) throw Error(ErrorCode::InvalidArgument, "delta must lie in (0,1)");
}
}  // namespace

HalfWidth clt_halfwidth(const BoundRequest& req) {
  check_common(req);
  std::size_t n = req.samples.size();
  double v = sample_variance(req.samples);
  if (req.variance_correction) {
    double s = std::sqrt(v) + (req.b - req.a) * std::sqrt(2 * std::log(2 / req.delta) / (n - 1.0));
    v = s * s;
  }
  return {clt_eps(v, n, req.delta), v == 0};
}

HalfWidth bernstein_halfwidth(const BoundRequest& req) {
  check_common(req);
  for (double x : req.samples)
    if (x < req.a || x > req.b)
      throw Error(ErrorCode::RangeViolation, "sample " + std::to_string(x) + " outside [a,b]");
  double v = sample_variance(req.samples);
  return {bernstein_eps(v, req.samples.size(), req.b - req.a, req.delta), v == 0};
}

HalfWidth halfwidth(const BoundRequest& req) {
  return req.method == BoundMethod::CLT ? clt_halfwidth(req) : bernstein_halfwidth(req);
}

double inner_slack(std::span<const double> clipped, double R, double delta) {
  if (clipped.size() < 2) throw Error(ErrorCode::TooFewSamples, "need at least 2 samples");
  return bernstein_eps(sample_variance(clipped), clipped.size(), R, delta);
}

InnerBounds upsilon_inner_bounds(std::span<const double> clipped, std::span<const double> m_lo,
                                 std::span<const double> m_hi, double R, double delta,
                                 std::span<const double> ell) {
  std::size_t n = clipped.size();
  if (m_lo.size() != n || m_hi.size() != n || (!ell.empty() && ell.size() != n))
    throw Error(ErrorCode::InvalidArgument, "size mismatch in upsilon_inner_bounds");
  if (n < 2) throw Error(ErrorCode::TooFewSamples, "need at least 2 samples");
  std::vector<double> lo(n), hi(n);
  double abs_lo = 0, abs_hi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (m_lo[i] > m_hi[i] || (!ell.empty() && (ell[i] < m_lo[i] || ell[i] > m_hi[i])))
      throw Error(ErrorCode::BoundViolation, "envelope fails on record " + std::to_string(i));
    lo[i] = (1 - clipped[i]) * m_lo[i];
    hi[i] = (1 - clipped[i]) * m_hi[i];
    abs_lo = std::max(abs_lo, std::abs(m_lo[i]));
    abs_hi = std::max(abs_hi, std::abs(m_hi[i]));
  }
  InnerBounds r;
  r.b_lo = mean(lo);
  r.b_hi = mean(hi);
  r.xi_lo = bernstein_eps(sample_variance(lo), n, abs_lo * R, delta);
  r.xi_hi = bernstein_eps(sample_variance(hi), n, abs_hi * R, delta);
  r.lo = r.b_lo - r.xi_lo;
  r.hi = r.b_hi + r.xi_hi;
  return r;
}

double finite_grid_delta(std::size_t grid_size, double delta) { return delta / (2.0 * grid_size); }

double covering_log_term(const UniformFamily& fam, std::size_t n, double delta) {
  double p = 0, x = 1;
  for (double c : fam.covering_poly) {
    p += c * x;
    x *= static_cast<double>(n);
  }
  if (!(p > 0)) throw Error(ErrorCode::InvalidArgument, "covering-number polynomial must be positive");
  return std::log(10 * p / delta);
}

UniformWidths uniform_halfwidths(const UniformFamily& fam, std::span<const double> f, double f_range,
                                 std::span<const double> g, double R, double delta) {
  std::size_t n = f.size();
  if (n < 16) throw Error(ErrorCode::TooFewSamples, "uniform bounds need n >= 16");
  if (g.size() != n) throw Error(ErrorCode::InvalidArgument, "size mismatch in uniform_halfwidths");
  UniformWidths w;
  if (fam.mode == UniformFamily::Mode::FiniteGrid) {
    if (fam.grid_size < 1) throw Error(ErrorCode::InvalidArgument, "grid must be nonempty");
    double d = finite_grid_delta(fam.grid_size, delta);
    w.eps = bernstein_eps(sample_variance(f), n, f_range, d);
    w.xi = bernstein_eps(sample_variance(g), n, R, d);
  } else {
    double l = covering_log_term(fam, n, delta);
    auto width = [&](std::span<const double> x, double range) {
      return std::sqrt(18 * sample_variance(x) * l / n) + range * 15 * l / (n - 1.0);
    };
    w.eps = width(f, f_range);
    w.xi = width(g, R);
  }
  return w;
}

}  // namespace cfr
