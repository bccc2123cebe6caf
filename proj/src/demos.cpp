#include "cfr/demos.hpp"

#include <cmath>
#include <cstdio>

#include "cfr/error.hpp"

namespace cfr {

using nlohmann::json;

std::string format_cell(const Cell& c, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f%% (%d/%d)", decimals, 100.0 * c.rate(), c.successes, c.trials);
  return buf;
}

Cell ContingencyTable::overall(int row) const {
  return {cells[row][0].successes + cells[row][1].successes, cells[row][0].trials + cells[row][1].trials};
}

bool ContingencyTable::reversed() const {
  double o = overall(0).rate() - overall(1).rate();
  double s0 = cells[0][0].rate() - cells[1][0].rate();
  double s1 = cells[0][1].rate() - cells[1][1].rate();
  return (o > 0 && s0 < 0 && s1 < 0) || (o < 0 && s0 > 0 && s1 > 0);
}

ContingencyTable kidney_stone_table() {
  ContingencyTable t;
  t.row_names[0] = "Treatment A";
  t.row_names[1] = "Treatment B";
  t.strata_names[0] = "small stones";
  t.strata_names[1] = "large stones";
  t.cells[0][0] = {81, 87};
  t.cells[0][1] = {192, 263};
  t.cells[1][0] = {234, 270};
  t.cells[1][1] = {55, 80};
  return t;
}

namespace {

std::string render(const ContingencyTable& t, const std::string& first_col) {
  char buf[256];
  std::string s;
  std::snprintf(buf, sizeof buf, "%-14s %-20s %-20s %-20s\n", first_col.c_str(), "overall",
                t.strata_names[0].c_str(), t.strata_names[1].c_str());
  s += buf;
  for (int r = 0; r < 2; ++r) {
    std::snprintf(buf, sizeof buf, "%-14s %-20s %-20s %-20s\n", t.row_names[r].c_str(),
                  format_cell(t.overall(r)).c_str(), format_cell(t.cells[r][0]).c_str(),
                  format_cell(t.cells[r][1]).c_str());
    s += buf;
  }
  return s;
}

json table_json(const ContingencyTable& t) {
  json rows = json::array();
  for (int r = 0; r < 2; ++r) {
    json row = {{"name", t.row_names[r]}};
    auto cell = [](const Cell& c) { return json{{"successes", c.successes}, {"trials", c.trials}, {"rate", c.rate()}}; };
    row["overall"] = cell(t.overall(r));
    row[t.strata_names[0]] = cell(t.cells[r][0]);
    row[t.strata_names[1]] = cell(t.cells[r][1]);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

SimpsonReport simpson_demo(const ContingencyTable& t) {
  SimpsonReport r;
  r.table = t;
  r.reversed = t.reversed();
  r.text = render(t, "") + "verdict: " + (r.reversed ? "REVERSED" : "NOT-REVERSED") + "\n";
  return r;
}

json SimpsonReport::to_json() const {
  return {{"table", table_json(table)}, {"verdict", reversed ? "REVERSED" : "NOT-REVERSED"}};
}

Table2Fixture table2_fixture() {
  Table2Fixture f;
  f.overall[0] = {{124, 2000}, "6.2%"};
  f.overall[1] = {{149, 2000}, "7.5%"};
  f.strata[0][0] = {{92, 1823}, "5.1%"};
  f.strata[0][1] = {{32, 176}, "18.1%"};
  f.strata[1][0] = {{71, 1500}, "4.8%"};
  f.strata[1][1] = {{78, 500}, "15.6%"};
  return f;
}

std::string table2_fixture_text() {
  auto f = table2_fixture();
  auto cell = [](const ReferenceCell& p) {
    return p.rate + " (" + std::to_string(p.cell.successes) + "/" + std::to_string(p.cell.trials) + ")";
  };
  char buf[256];
  std::string s;
  std::snprintf(buf, sizeof buf, "%-8s %-18s %-18s %-18s\n", "", "overall", "q2 low", "q2 high");
  s += buf;
  const char* names[2] = {"q1 low", "q1 high"};
  for (int g = 0; g < 2; ++g) {
    std::snprintf(buf, sizeof buf, "%-8s %-18s %-18s %-18s\n", names[g], cell(f.overall[g]).c_str(),
                  cell(f.strata[g][0]).c_str(), cell(f.strata[g][1]).c_str());
    s += buf;
  }
  return s;
}

Table2Report table2_analysis(const std::vector<LogRecord>& records, const WorldConfig& cfg,
                             const Table2Options& opt) {
  if (cfg.gamma_mainline.size() < 2) throw Error(ErrorCode::InvalidArgument, "need a world with two mainline positions");
  Table2Report rep;
  auto& t = rep.table;
  t.row_names[0] = "q1 low";
  t.row_names[1] = "q1 high";
  t.strata_names[0] = "q2 low";
  t.strata_names[1] = "q2 high";
  for (const auto& r : records) {
    const PlacedRec* ml[2] = {nullptr, nullptr};
    for (const auto& p : r.placed)
      if (p.position < 2) ml[p.position] = &p;
    if (!ml[0] || !ml[1]) continue;
    double q1 = cfg.gamma_mainline[0] * r.candidates[ml[0]->candidate].beta;
    double q2 = cfg.gamma_mainline[1] * r.candidates[ml[1]->candidate].beta;
    int g = q1 >= opt.q1_threshold, s = q2 >= opt.q2_threshold;
    t.cells[g][s].trials += 1;
    t.cells[g][s].successes += ml[1]->clicked ? 1 : 0;
  }
  for (int g = 0; g < 2; ++g) {
    if (t.overall(g).trials == 0) {
      rep.degenerate = true;
      rep.warnings.push_back(std::string("group '") + t.row_names[g] + "' is empty; q1 threshold leaves one group");
    }
    for (int s = 0; s < 2; ++s)
      if (t.cells[g][s].trials == 0 && t.overall(g).trials > 0)
        rep.warnings.push_back(std::string("cell '") + t.row_names[g] + " / " + t.strata_names[s] + "' is empty");
  }
  rep.reversed = !rep.degenerate && t.reversed();
  rep.text = render(t, "") + "verdict: " + (rep.degenerate ? "DEGENERATE" : rep.reversed ? "REVERSED" : "NOT-REVERSED") +
             "\n";
  return rep;
}

json Table2Report::to_json() const {
  return {{"table", table_json(table)},
          {"verdict", degenerate ? "DEGENERATE" : reversed ? "REVERSED" : "NOT-REVERSED"},
          {"warnings", warnings}};
}

WorldConfig confounded_world() {
  WorldConfig c = WorldConfig::standard();
  c.clusters = {{1.0, 0.5, 4.0, 0.05}};
  c.intent_commercial_slope = 1.0;
  c.quality_slope = 3.0;
  c.click_competition = 2.5;
  c.commercial_noise = 0.02;
  c.beta_lo = 0.1 / 1.2;
  c.beta_hi = 0.12;
  return c;
}

}  // namespace cfr
