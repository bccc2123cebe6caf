#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <fstream>

#include "cfr/error.hpp"
#include "cfr/logstore.hpp"
#include "testkit.hpp"

using namespace cfr;
using testkit::scratch_file;
using testkit::slurp;

namespace {
std::vector<LogRecord> sample_log(std::size_t n = 500) {
  Policy pol;
  pol.bid_sigma = 0.2;
  pol.alpha_sigma = 0.05;
  return testkit::standard_log(n, 42, pol);
}

LogHeader header_for(const std::vector<LogRecord>& recs) {
  Policy pol;
  pol.bid_sigma = 0.2;
  pol.alpha_sigma = 0.05;
  return make_header(WorldConfig::standard(), pol, recs.size(), 42);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }
}  // namespace

TEST_CASE("round trip preserves every bit") {
  auto recs = sample_log();
  for (std::string ext : {".jsonl", ".jsonl.gz"}) {
    auto path = scratch_file("rt" + ext);
    write_log(path, header_for(recs), recs);
    auto back = read_log(path);
    CHECK(back.header.n == recs.size());
    CHECK(back.header.policy == header_for(recs).policy);
    REQUIRE(back.records.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      CHECK(back.records[i] == recs[i]);
      CHECK(same_bits(back.records[i].m, recs[i].m));
      CHECK(same_bits(back.records[i].m_max, recs[i].m_max));
    }
  }
}

TEST_CASE("identical inputs give identical bytes") {
  auto recs = sample_log(200);
  auto a = scratch_file("a.jsonl"), b = scratch_file("b.jsonl");
  write_log(a, header_for(recs), recs);
  write_log(b, header_for(recs), sample_log(200));
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a).find("\"inf\"") != std::string::npos);
}

TEST_CASE("projection equals the full-read slice") {
  auto recs = sample_log();
  auto path = scratch_file("proj.jsonl");
  write_log(path, header_for(recs), recs);
  LogReader rd(path, {"m", "m_min", "m_max", "clicks"});
  LogRecord r;
  std::size_t i = 0;
  while (rd.next(r)) {
    CHECK(r.m == recs[i].m);
    CHECK(r.m_min == recs[i].m_min);
    CHECK(r.m_max == recs[i].m_max);
    CHECK(r.clicks == recs[i].clicks);
    CHECK(r.candidates.empty());
    ++i;
  }
  CHECK(i == recs.size());
  CHECK(code_of([&] { LogReader bad(path, {"nonsense"}); }) == ErrorCode::SchemaMismatch);
}

TEST_CASE("corruption is reported with a line number") {
  auto recs = sample_log(50);
  auto path = scratch_file("trunc.jsonl");
  write_log(path, header_for(recs), recs);
  std::string text = slurp(path);
  {
    std::ofstream f(path, std::ios::binary);
    f << text.substr(0, text.size() - 40);
  }
  try {
    read_log(path);
    FAIL("expected ReadError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ReadError);
    CHECK(std::string(e.what()).find("line 51") != std::string::npos);
  }
  // Dropping whole records leaves fewer lines than announced.
  auto cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  {
    std::ofstream f(path, std::ios::binary);
    f << cut;
  }
  CHECK(code_of([&] { read_log(path); }) == ErrorCode::ReadError);
}

TEST_CASE("header checks") {
  auto recs = sample_log(10);
  auto path = scratch_file("hdr.jsonl");
  write_log(path, header_for(recs), recs);
  std::string text = slurp(path);
  auto bump = text;
  bump.replace(bump.find("\"schema_version\":1"), 18, "\"schema_version\":9");
  {
    std::ofstream f(path, std::ios::binary);
    f << bump;
  }
  CHECK(code_of([&] { read_log(path); }) == ErrorCode::VersionUnsupported);
  auto tamper = text;
  auto pos = tamper.find("\"advertiser_pool\":40");
  REQUIRE(pos != std::string::npos);
  tamper.replace(pos, 20, "\"advertiser_pool\":41");
  {
    std::ofstream f(path, std::ios::binary);
    f << tamper;
  }
  CHECK(code_of([&] { read_log(path); }) == ErrorCode::SchemaMismatch);
  CHECK(code_of([&] { read_log(scratch_file("missing.jsonl")); }) == ErrorCode::IoError);
}

TEST_CASE("writer rejects NaN and short logs") {
  auto recs = sample_log(3);
  auto bad = recs;
  bad[1].revenue = std::nan("");
  CHECK(code_of([&] { write_log(scratch_file("nan.jsonl"), header_for(bad), bad); }) == ErrorCode::SchemaMismatch);
  auto h = header_for(recs);
  h.n = 5;
  CHECK(code_of([&] {
          LogWriter w(scratch_file("short.jsonl"), h);
          for (const auto& r : recs) w.write(r);
          w.close();
        }) == ErrorCode::SchemaMismatch);
}

TEST_CASE("config hash") {
  auto c = WorldConfig::standard();
  auto d = c;
  CHECK(config_hash(c) == config_hash(d));
  d.clusters[0].reserve += 1e-12;
  CHECK(config_hash(c) != config_hash(d));
}
