#pragma once

#include <string>
#include <vector>

#include "cfr/world.hpp"
#include "json.hpp"

namespace cfr {

struct Cell {
  int successes = 0, trials = 0;
  double rate() const { return trials ? static_cast<double>(successes) / trials : 0.0; }
};

// "93.1% (81/87)": rate rounded to one decimal.
std::string format_cell(const Cell& c, int decimals = 1);

// Two treatments (rows) by two strata, plus totals.
struct ContingencyTable {
  std::string row_names[2], strata_names[2];
  Cell cells[2][2];  // [row][stratum]
  Cell overall(int row) const;
  // True when the overall comparison favors the other row than both strata do.
  bool reversed() const;
};

struct SimpsonReport {
  ContingencyTable table;
  bool reversed = false;
  std::string text;
  nlohmann::json to_json() const;
};

ContingencyTable kidney_stone_table();
SimpsonReport simpson_demo(const ContingencyTable& t = kidney_stone_table());

// Reference second-mainline-ad counts by q1 group and q2 stratum, with the
// reference rate strings (not all are the one-decimal rounding of the counts).
struct ReferenceCell {
  Cell cell;
  std::string rate;
};
struct Table2Fixture {
  ReferenceCell overall[2];
  ReferenceCell strata[2][2];  // [q1 group][q2 stratum]
};
Table2Fixture table2_fixture();

struct Table2Options {
  double q1_threshold = 0.20;
  double q2_threshold = 0.11;
};

struct Table2Report {
  ContingencyTable table;  // rows: q1 low/high; strata: q2 low/high
  bool reversed = false;
  bool degenerate = false;
  std::vector<std::string> warnings;
  std::string text;
  nlohmann::json to_json() const;
};

// Pages with at least two mainline ads; q_p = gamma_p * beta is the intent-free
// click estimate. Counts clicks on the second mainline ad.
Table2Report table2_analysis(const std::vector<LogRecord>& records, const WorldConfig& cfg,
                             const Table2Options& opt = {});
std::string table2_fixture_text();

// World where intent raises both ad quality (through commercialness) and
// clicks, while a strong top ad takes clicks from the second one.
WorldConfig confounded_world();

}  // namespace cfr
