#include "cfr/special.hpp"

#include <cmath>

namespace cfr {

namespace {
constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kSqrt2Pi = 2.5066282746310005024;
constexpr double kSqrtPi = 1.7724538509055160273;

// Acklam's rational approximation (relative error ~1e-9) as a starting point.
double acklam(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01, -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    double q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p > 1 - plow) {
    double q = std::sqrt(-2 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  double q = p - 0.5, r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}
}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / kSqrt2Pi; }

double normal_quantile(double p) {
  if (p <= 0) return -kInf;
  if (p >= 1) return kInf;
  // Work in the lower tail so that the Newton residual is computed without
  // cancellation, then mirror.
  if (p > 0.5) return -normal_quantile(1 - p);
  double x = acklam(p);
  // One Halley step on Phi(x) - p.
  double e = normal_cdf(x) - p;
  double u = e / normal_pdf(x);
  x = x - u / (1 + x * u / 2);
  return x;
}

double erfcinv(double y) {
  if (y <= 0) return kInf;
  if (y >= 2) return -kInf;
  // erfc(t) = 2 Phi(-t sqrt2)  =>  t = -Phi^{-1}(y/2) / sqrt2
  return -normal_quantile(y / 2) / kSqrt2;
}

double erfinv(double x) {
  if (x <= -1) return -kInf;
  if (x >= 1) return kInf;
  if (x < 0) return -erfinv(-x);
  // 1 - x is exact for x >= 0.5; near zero refine on erf itself.
  if (x >= 0.5) return erfcinv(1 - x);
  double t = normal_quantile(0.5 * (1 + x)) / kSqrt2;
  for (int i = 0; i < 2; ++i) t -= (std::erf(t) - x) / (2 / kSqrtPi * std::exp(-t * t));
  return t;
}

double LogNormal::mu() const { return std::log(rho) - 0.5 * sigma * sigma; }

double LogNormal::sample(double eps) const {
  return rho * std::exp(-0.5 * sigma * sigma + sigma * eps);
}

double LogNormal::log_pdf(double m) const {
  double z = (std::log(m) - mu()) / sigma;
  return -std::log(m) - std::log(sigma) - std::log(kSqrt2Pi) - 0.5 * z * z;
}

double LogNormal::pdf(double m) const {
  if (!(m > 0) || std::isinf(m)) return 0.0;
  return std::exp(log_pdf(m));
}

double LogNormal::cdf(double m) const {
  if (!(m > 0)) return 0.0;
  if (std::isinf(m)) return 1.0;
  if (sigma == 0) return m >= rho ? 1.0 : 0.0;
  return normal_cdf((std::log(m) - mu()) / sigma);
}

double LogNormal::dlog_drho(double m) const {
  return (std::log(m) - mu()) / (sigma * sigma * rho);
}

double LogNormal::dlog_dsigma(double m) const {
  double d = std::log(m) - mu();
  return -1 / sigma + d * d / (sigma * sigma * sigma) - d / sigma;
}

double LogNormal::d2log_drho2(double m) const {
  double d = std::log(m) - mu();
  return -(1 + d) / (sigma * sigma * rho * rho);
}

double LogNormal::d2log_drho_dsigma(double m) const {
  double d = std::log(m) - mu();
  return 1 / (sigma * rho) - 2 * d / (sigma * sigma * sigma * rho);
}

double LogNormal::d2log_dsigma2(double m) const {
  double d = std::log(m) - mu();
  double s2 = sigma * sigma;
  return 1 / s2 + 3 * d / s2 - 3 * d * d / (s2 * s2) - 1;
}

}  // namespace cfr
