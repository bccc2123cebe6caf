#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cfr {

enum class BoundMethod { CLT, Bernstein };

const char* to_string(BoundMethod m);
BoundMethod bound_method_from_string(const std::string& s);

struct BoundRequest {
  std::span<const double> samples;
  double a = 0, b = 1;  // range; only checked by Bernstein
  double delta = 0.025;
  BoundMethod method = BoundMethod::CLT;
  // Inflate the CLT variance by the Maurer-Pontil deviation bound.
  bool variance_correction = false;
};

struct HalfWidth {
  double eps = 0;
  bool degenerate_variance = false;
};

HalfWidth clt_halfwidth(const BoundRequest& req);
HalfWidth bernstein_halfwidth(const BoundRequest& req);
HalfWidth halfwidth(const BoundRequest& req);

// Closed forms on precomputed moments.
double clt_eps(double var, std::size_t n, double delta);
double bernstein_eps(double var, std::size_t n, double range, double delta);

// Slack bounding the clipped weight mass from below.
double inner_slack(std::span<const double> clipped, double R, double delta);

struct InnerBounds {
  double lo = 0, hi = 0;        // B_lo - xi_lo, B_hi + xi_hi
  double b_lo = 0, b_hi = 0;
  double xi_lo = 0, xi_hi = 0;
};

// Bounds on (1/n) sum (1 - wbar_i) ell_i given per-record envelopes m_i <= ell_i <= M_i.
// When ell is empty the envelope check is skipped.
InnerBounds upsilon_inner_bounds(std::span<const double> clipped, std::span<const double> m_lo,
                                 std::span<const double> m_hi, double R, double delta,
                                 std::span<const double> ell = {});

struct UniformFamily {
  enum class Mode { FiniteGrid, CoveringNumber };
  Mode mode = Mode::FiniteGrid;
  std::size_t grid_size = 1;
  // Coefficients c_0 + c_1 n + ... of N(2n, F, 1/n) as a function of n.
  std::vector<double> covering_poly;
};

struct UniformWidths {
  double eps = 0;  // half-width for the mean of f_theta = ell * wbar
  double xi = 0;   // inner slack for the mean of g_theta = wbar
};

// Simultaneous widths for one member of the family, given its samples.
UniformWidths uniform_halfwidths(const UniformFamily& fam, std::span<const double> f, double f_range,
                                 std::span<const double> g, double R, double delta);

// Effective per-bound failure probability used by FiniteGrid mode.
double finite_grid_delta(std::size_t grid_size, double delta);
double covering_log_term(const UniformFamily& fam, std::size_t n, double delta);

}  // namespace cfr
