#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "cfr/world.hpp"
#include "json.hpp"

namespace cfr {

inline constexpr int kLogSchemaVersion = 1;

struct LogHeader {
  int schema_version = kLogSchemaVersion;
  WorldConfig config;
  std::string config_hash;
  Policy policy;
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
};

std::string config_hash(const WorldConfig& c);
LogHeader make_header(const WorldConfig& c, const Policy& p, std::uint64_t n, std::uint64_t seed);

// Record <-> one JSONL line; doubles written with 17 significant digits,
// unbounded m_max as "inf".
std::string record_line(const LogRecord& r);
std::string header_line(const LogHeader& h);

// Field names usable in projections (top-level record keys).
const std::vector<std::string>& record_fields();

// Writes header + records; ".gz" paths are gzip-compressed.
class LogWriter {
 public:
  LogWriter(const std::string& path, const LogHeader& h);
  ~LogWriter();
  LogWriter(const LogWriter&) = delete;
  LogWriter& operator=(const LogWriter&) = delete;
  void write(const LogRecord& r);
  void close();  // flushes and syncs; throws SchemaMismatch if count != header n

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

LogHeader write_log(const std::string& path, const LogHeader& h, const std::vector<LogRecord>& records);

// Streaming cursor; records hold only the projected fields (empty = all).
class LogReader {
 public:
  LogReader(const std::string& path, std::set<std::string> projection = {});
  ~LogReader();
  LogReader(const LogReader&) = delete;
  LogReader& operator=(const LogReader&) = delete;
  const LogHeader& header() const;
  bool next(LogRecord& r);
  std::size_t line() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct LoadedLog {
  LogHeader header;
  std::vector<LogRecord> records;
};

LoadedLog read_log(const std::string& path, std::set<std::string> projection = {});

}  // namespace cfr
