#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfr/counterfactual.hpp"
#include "json.hpp"

namespace cfr {

// Coordinates of theta: location and spread of the reserve multiplier law and
// the mean of the squashing exponent law.
enum class Coord { Rho, Sigma, Alpha };
const char* to_string(Coord c);
Coord coord_from_string(const std::string& s);

// Point theta in the family of counterfactual laws, with the coordinates that
// are differentiated.
struct ParamPolicy {
  CounterfactualPolicy at;
  std::vector<Coord> coords;

  static ParamPolicy around(const Policy& p, std::vector<Coord> coords);
  std::vector<double> theta() const;
  // d log P^theta / d theta for record i.
  void score(const Columns& cols, std::size_t i, std::span<double> out) const;
  // Second derivatives of log P^theta, row-major |coords| x |coords|.
  void score_hessian(const Columns& cols, std::size_t i, std::span<double> out) const;
};

struct GradientEstimate {
  enum class Mode { OnPolicy, OffPolicy, OffPolicyCapped };
  Mode mode = Mode::OffPolicy;
  std::vector<std::string> names;
  std::vector<double> theta, value, se;
  // Capped mode: value and se refer to d Ybar / d theta; these to d Wbar / d theta.
  std::vector<double> d_wbar, d_wbar_se;
  double ybar = 0, wbar = 0, R = 0;
  bool tie_at_cap = false;
  std::size_t n = 0;
  nlohmann::json to_json() const;
};

struct HessianEstimate {
  std::vector<std::string> names;
  Eigen::MatrixXd value, se;
  std::size_t n = 0;
};

// (1/n) sum (ell_i - zeta_i) w_theta(omega_i) d log P^theta(omega_i) / d theta.
// zeta may be empty (zero predictor).
GradientEstimate counterfactual_gradient(const Columns& cols, std::span<const double> ell,
                                         std::span<const double> zeta, const Policy& actual,
                                         const ParamPolicy& theta);

HessianEstimate counterfactual_hessian(const Columns& cols, std::span<const double> ell,
                                       std::span<const double> zeta, const Policy& actual, const ParamPolicy& theta);

struct Baseline {
  enum class Kind { None, Constant, Optimal };
  Kind kind = Kind::None;
  double c = 0;
  static Baseline none() { return {}; }
  static Baseline constant(double c) { return {Kind::Constant, c}; }
  static Baseline optimal() { return {Kind::Optimal, 0}; }
};

// Records logged under pol itself; the gradient is taken at theta = pol.
GradientEstimate policy_gradient(const Columns& cols, std::span<const double> ell, const Policy& pol,
                                 const std::vector<Coord>& coords, Baseline baseline = {});

// Capped objectives Ybar = mean(ell min(w, R)) and Wbar = mean(min(w, R)) and
// their gradients; capped records contribute no derivative.
GradientEstimate offpolicy_capped_gradient(const Columns& cols, std::span<const double> ell, const Policy& actual,
                                           const ParamPolicy& theta, double R);

// Capped objective values alone, for finite differences.
struct CappedValue {
  double ybar = 0, wbar = 0;
};
CappedValue capped_value(const Columns& cols, std::span<const double> ell, const Policy& actual,
                         const CounterfactualPolicy& cf, double R);

// Score-level weights evaluated directly (no support checks beyond densities).
std::vector<double> density_weights(const Columns& cols, const Policy& actual, const CounterfactualPolicy& cf);

// Ascent on the capped lower bound Ybar over rho* (test helper).
struct AscentResult {
  double rho = 0, ybar = 0;
  int steps = 0;
};
AscentResult ascend_lower_bound(const Columns& cols, std::span<const double> ell, const Policy& actual,
                                double rho0, double R, double rho_lo, double rho_hi, double step = 0.05,
                                int max_steps = 200);

}  // namespace cfr
