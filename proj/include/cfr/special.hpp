#pragma once

namespace cfr {

inline constexpr double kInf = __builtin_huge_val();

double normal_cdf(double z);
double normal_pdf(double z);
// Standard normal quantile, accurate to ~1e-15 relative.
double normal_quantile(double p);
double erfinv(double x);
// erfinv(1 - y), without the cancellation of forming 1 - y.
double erfcinv(double y);

// Log-normal law of the multiplier m = rho * exp(-sigma^2/2 + sigma*eps).
struct LogNormal {
  double rho = 1.0;
  double sigma = 0.0;

  double mu() const;
  double sample(double eps) const;
  double pdf(double m) const;
  double log_pdf(double m) const;
  // CDF; handles m = 0, +inf and sigma = 0 (step at rho).
  double cdf(double m) const;
  double mass(double lo, double hi) const { return cdf(hi) - cdf(lo); }

  // Derivatives of log_pdf with respect to (rho, sigma).
  double dlog_drho(double m) const;
  double dlog_dsigma(double m) const;
  double d2log_drho2(double m) const;
  double d2log_drho_dsigma(double m) const;
  double d2log_dsigma2(double m) const;

  bool operator==(const LogNormal&) const = default;
};

}  // namespace cfr
