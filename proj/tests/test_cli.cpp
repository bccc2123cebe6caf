#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <fstream>

#include "cli.hpp"
#include "json.hpp"
#include "testkit.hpp"

using namespace cfr;
auto run = [](std::vector<std::string> a) { return testkit::cli(std::move(a)); };
using testkit::scratch_file;
using testkit::slurp;

namespace {
std::size_t lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

const std::string& small_log() {
  static const std::string path = [] {
    auto p = scratch_file("cli.jsonl");
    auto r = run({"simulate", "--seed", "1", "-n", "20000", "--log", p, "--alpha-sigma", "0.1", "--bid-sigma",
                  "0.3", "--manifest", scratch_file("sim.manifest.json")});
    REQUIRE(r.code == 0);
    return p;
  }();
  return path;
}
}  // namespace

TEST_CASE("help output matches snapshots") {
  std::vector<std::string> subs = cli::subcommands();
  subs.insert(subs.begin(), "");
  for (const auto& s : subs) {
    std::vector<std::string> args;
    if (!s.empty()) args.push_back(s);
    args.push_back("--help");
    auto r = run(args);
    CHECK(r.code == 0);
    std::string name = s.empty() ? "cfr" : s;
    std::string snap = slurp(testkit::source_path("tests/snapshots/" + name + ".txt"));
    INFO("snapshot ", name);
    CHECK(r.out == snap);
  }
}

TEST_CASE("every flag is documented") {
  auto r = run({"estimate", "--help"});
  for (const char* f : {"--log", "--delta", "--out", "--format", "--threads", "--manifest", "--rho-star",
                        "--sigma-star", "--alpha-star", "--metric", "--point", "--method", "--clip"})
    CHECK(r.out.find(f) != std::string::npos);
}

TEST_CASE("exit codes") {
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"estimate", "--log", small_log(), "--bogus"}).code == cli::kExitUsage);
  auto r = run({"estimate", "--log", small_log(), "--delta", "0.7"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("delta") != std::string::npos);
  CHECK(run({"estimate", "--rho-star", "1.1"}).code == cli::kExitUsage);
  CHECK(run({"sweep", "--log", small_log(), "--rho-grid", "1:0:0.1"}).code == cli::kExitUsage);
  auto missing = run({"estimate", "--log", scratch_file("nope.jsonl"), "--manifest", scratch_file("m.json")});
  CHECK(missing.code == cli::kExitData);
  CHECK(!missing.err.empty());
  CHECK(run({"--version"}).out.find(cli::kVersion) != std::string::npos);
}

TEST_CASE("estimate and sweep") {
  auto m = scratch_file("est.manifest.json");
  auto r = run({"estimate", "--log", small_log(), "--rho-star", "1.1", "--point", "slate", "--manifest", m});
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("final")[0].get<double>() <= j.at("Y_hat").get<double>());
  CHECK(j.at("point") == "slate");
  auto man = nlohmann::json::parse(slurp(m));
  CHECK(man.at("inputs")[0].at("path") == small_log());
  CHECK(man.at("version") == cli::kVersion);
  CHECK(man.contains("created"));
  auto t = run({"estimate", "--log", small_log(), "--rho-star", "1.1", "--format", "text", "--manifest", m});
  REQUIRE(t.code == 0);
  CHECK(lines(t.out) == 5);
  CHECK(t.out.find("final [") != std::string::npos);

  auto s = run({"sweep", "--log", small_log(), "--rho-grid", "0.7:1.5:0.05", "--point", "slate", "--manifest", m});
  REQUIRE(s.code == 0);
  CHECK(lines(s.out) == 18);

  auto per = run({"estimate", "--log", small_log(), "--rho-star", "1.1,1.0,0.9", "--manifest", m});
  CHECK(per.code == 0);
  auto bad = run({"estimate", "--log", small_log(), "--rho-star", "1.1,1.0", "--manifest", m});
  CHECK(bad.code == cli::kExitData);
}

TEST_CASE("outputs do not depend on the thread count") {
  auto m = scratch_file("thr.manifest.json");
  std::vector<std::string> base = {"sweep", "--log", small_log(), "--rho-grid", "0.8:1.2:0.1", "--manifest", m};
  auto a = base, b = base;
  a.insert(a.end(), {"--threads", "1"});
  b.insert(b.end(), {"--threads", "3"});
  CHECK(run(a).out == run(b).out);
  auto la = scratch_file("t1.jsonl"), lb = scratch_file("t3.jsonl");
  run({"simulate", "-n", "3000", "--seed", "4", "--log", la, "--threads", "1", "--manifest", m});
  run({"simulate", "-n", "3000", "--seed", "4", "--log", lb, "--threads", "3", "--manifest", m});
  CHECK(slurp(la) == slurp(lb));
}

TEST_CASE("gradients, tuning and level curves") {
  auto m = scratch_file("g.manifest.json");
  auto g = run({"grad", "--log", small_log(), "--coords", "rho,alpha", "--rho-star", "1.1", "--hessian", "--manifest", m});
  REQUIRE(g.code == 0);
  auto j = nlohmann::json::parse(g.out);
  CHECK(j.at("value").size() == 2);
  CHECK(j.at("hessian").at("value").size() == 2);
  CHECK(run({"grad", "--log", small_log(), "--mode", "capped", "--manifest", m}).code == cli::kExitUsage);
  CHECK(run({"grad", "--log", small_log(), "--mode", "policy", "--baseline", "optimal", "--manifest", m}).code == 0);

  auto t = run({"tune", "--log", small_log(), "--rho-grid", "0.8:1.2:0.1", "--metric", "revenue", "--max-mainline",
                "1.0", "--manifest", m});
  REQUIRE(t.code == 0);
  CHECK(nlohmann::json::parse(t.out).contains("theta_star"));
  auto none = run({"tune", "--log", small_log(), "--rho-grid", "0.8:1.2:0.1", "--max-mainline", "0.0001",
                   "--manifest", m});
  CHECK(none.code == cli::kExitData);

  auto l = run({"levelcurves", "--log", small_log(), "--rho-grid", "0.9:1.1:0.1", "--alpha-grid", "0.9:1.1:0.1",
                "--manifest", m});
  REQUIRE(l.code == 0);
  CHECK(lines(l.out) == 10);
}

TEST_CASE("demos") {
  auto m = scratch_file("d.manifest.json");
  auto s = run({"simpson-demo", "--manifest", m});
  REQUIRE(s.code == 0);
  for (const char* cell : {"78.0% (273/350)", "82.6% (289/350)", "93.1% (81/87)", "86.7% (234/270)",
                           "73.0% (192/263)", "68.8% (55/80)", "REVERSED"})
    CHECK(s.out.find(cell) != std::string::npos);
  auto t = run({"table2-demo", "--manifest", m});
  REQUIRE(t.code == 0);
  CHECK(t.out.find("6.2% (124/2000)") != std::string::npos);
  auto d = run({"table2-demo", "--log", small_log(), "--q1-threshold", "0", "--manifest", m});
  CHECK(d.code == 0);
  CHECK(d.err.find("warning") != std::string::npos);
}

TEST_CASE("output file and default manifest path") {
  auto out = scratch_file("simpson.json");
  auto r = run({"simpson-demo", "--format", "json", "--out", out});
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  CHECK(nlohmann::json::parse(slurp(out)).at("verdict") == "REVERSED");
  CHECK(!slurp(out + ".manifest.json").empty());
}
