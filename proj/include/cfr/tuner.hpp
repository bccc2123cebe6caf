#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cfr/counterfactual.hpp"
#include "json.hpp"

namespace cfr {

// "start:stop:step", inclusive of stop when it lands within 1e-9.
std::vector<double> parse_grid(const std::string& spec);
std::vector<double> grid_range(double start, double stop, double step);

struct SweepRow {
  CounterfactualPolicy cf;
  CounterfactualEstimate est;
};

std::vector<SweepRow> sweep(const Columns& cols, std::span<const double> ell, const Policy& actual,
                            const std::vector<CounterfactualPolicy>& grid, ReweightPoint point,
                            const EstimateOptions& opt);
std::string sweep_csv(const std::vector<SweepRow>& rows);
nlohmann::json sweep_json(const std::vector<SweepRow>& rows);

// Grid of single-reserve counterfactuals keeping the logging spreads.
std::vector<CounterfactualPolicy> rho_grid(const Policy& actual, const std::vector<double>& rhos);

struct TuneProblem {
  std::vector<CounterfactualPolicy> grid;
  double objective_range = 1;  // M of the objective metric
  std::optional<double> max_mainline;  // footprint cap C on mainline ads per page
  double mainline_range = 2;
  double delta = 0.025;
  UniformFamily family;  // grid_size is filled from the grid when FiniteGrid
  double R = 10;         // common clip level for every grid point
  ReweightPoint point = ReweightPoint::ScoreLevel;
};

struct TuneRow {
  CounterfactualPolicy cf;
  double y_hat = 0, w_hat = 0, lower = 0, upper = 0;
  double mainline_hat = 0, mainline_upper = 0;
  bool feasible = true;
};

struct TuneResult {
  std::size_t best = 0;
  CounterfactualPolicy theta;
  double lower_bound = 0;
  double slack = 0;  // C - conservative mainline bound at theta*, or +inf
  bool boundary = false;
  std::vector<TuneRow> rows;
  nlohmann::json to_json() const;
};

// Maximizes the uniform lower bound of the objective among grid points whose
// upper mainline bound satisfies the footprint cap. Ties go to smaller rho,
// then smaller alpha. mainline may be empty when there is no cap.
TuneResult tune(const Columns& cols, std::span<const double> objective, std::span<const double> mainline,
                const Policy& actual, const TuneProblem& problem);

struct LevelCell {
  double rho = 0, alpha = 0;
  double q1_hat = 0, q1_inner = 0, q2_hat = 0, q2_inner = 0;  // inner = inner-interval width
};

std::vector<LevelCell> level_curves(const Columns& cols, std::span<const double> q1, double M1,
                                    std::span<const double> q2, double M2, const Policy& actual,
                                    const std::vector<double>& rhos, const std::vector<double>& alphas,
                                    const EstimateOptions& opt);
std::string level_curves_csv(const std::vector<LevelCell>& cells);

}  // namespace cfr
