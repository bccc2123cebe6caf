#include "cfr/logstore.hpp"

#include <unistd.h>
#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstring>

#include "cfr/error.hpp"
#include "cfr/rng.hpp"

namespace cfr {

using nlohmann::json;

std::string config_hash(const WorldConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_name(to_json(c).dump())));
  return buf;
}

LogHeader make_header(const WorldConfig& c, const Policy& p, std::uint64_t n, std::uint64_t seed) {
  LogHeader h;
  h.config = c;
  h.config_hash = config_hash(c);
  h.policy = p;
  h.n = n;
  h.seed = seed;
  return h;
}

namespace {

void put_num(std::string& out, double x) {
  if (std::isnan(x)) throw Error(ErrorCode::SchemaMismatch, "NaN cannot be written to a log");
  if (std::isinf(x)) {
    if (x < 0) throw Error(ErrorCode::SchemaMismatch, "-inf cannot be written to a log");
    out += "\"inf\"";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  out += buf;
}

void put_int(std::string& out, long long x) { out += std::to_string(x); }

void key(std::string& out, const char* k, bool first = false) {
  if (!first) out += ',';
  out += '"';
  out += k;
  out += "\":";
}

double get_num(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return kInf;
    throw Error(ErrorCode::SchemaMismatch, "unexpected string number");
  }
  return j.get<double>();
}

}  // namespace

const std::vector<std::string>& record_fields() {
  static const std::vector<std::string> f = {
      "index",   "seed",   "cluster",      "commercialness", "intent", "inventory", "candidates",
      "eps",     "m",      "alpha",        "layout",         "placed", "clicked_prices",
      "clicks",  "mainline_ads", "revenue", "ad_value",      "m_min",  "m_max"};
  return f;
}

std::string record_line(const LogRecord& r) {
  std::string o;
  o.reserve(512);
  o += '{';
  key(o, "index", true);
  put_int(o, static_cast<long long>(r.index));
  key(o, "seed");
  o += std::to_string(r.seed);
  key(o, "cluster");
  put_int(o, r.cluster);
  key(o, "commercialness");
  put_num(o, r.commercialness);
  key(o, "intent");
  put_num(o, r.intent);
  key(o, "inventory");
  put_int(o, r.inventory);
  key(o, "candidates");
  o += '[';
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    const auto& c = r.candidates[i];
    if (i) o += ',';
    o += '{';
    key(o, "ad", true);
    put_int(o, c.ad);
    key(o, "advertiser");
    put_int(o, c.advertiser);
    key(o, "bid");
    put_num(o, c.bid);
    key(o, "beta");
    put_num(o, c.beta);
    key(o, "value");
    put_num(o, c.value);
    key(o, "bid_mult");
    put_num(o, c.bid_mult);
    o += '}';
  }
  o += ']';
  key(o, "eps");
  put_num(o, r.eps);
  key(o, "m");
  put_num(o, r.m);
  key(o, "alpha");
  put_num(o, r.alpha);
  key(o, "layout");
  put_int(o, r.layout);
  key(o, "placed");
  o += '[';
  for (std::size_t j = 0; j < r.placed.size(); ++j) {
    const auto& p = r.placed[j];
    if (j) o += ',';
    o += '{';
    key(o, "candidate", true);
    put_int(o, p.candidate);
    key(o, "position");
    put_int(o, p.position);
    key(o, "rank_score");
    put_num(o, p.rank_score);
    key(o, "price");
    put_num(o, p.price);
    key(o, "charged");
    put_num(o, p.charged);
    key(o, "clicked");
    o += p.clicked ? "true" : "false";
    o += '}';
  }
  o += ']';
  key(o, "clicked_prices");
  o += '[';
  for (std::size_t j = 0; j < r.clicked_prices.size(); ++j) {
    if (j) o += ',';
    put_num(o, r.clicked_prices[j]);
  }
  o += ']';
  key(o, "clicks");
  put_int(o, r.clicks);
  key(o, "mainline_ads");
  put_int(o, r.mainline_ads);
  key(o, "revenue");
  put_num(o, r.revenue);
  key(o, "ad_value");
  put_num(o, r.ad_value);
  key(o, "m_min");
  put_num(o, r.m_min);
  key(o, "m_max");
  put_num(o, r.m_max);
  o += '}';
  return o;
}

std::string header_line(const LogHeader& h) {
  json j = {{"type", "header"},
            {"schema_version", h.schema_version},
            {"config", to_json(h.config)},
            {"config_hash", h.config_hash},
            {"policy", to_json(h.policy)},
            {"n", h.n},
            {"seed", h.seed}};
  return j.dump();
}

namespace {

void fill_field(LogRecord& r, const std::string& k, const json& v) {
  if (k == "index") r.index = v.get<std::uint64_t>();
  else if (k == "seed") r.seed = v.get<std::uint64_t>();
  else if (k == "cluster") r.cluster = v.get<int>();
  else if (k == "commercialness") r.commercialness = get_num(v);
  else if (k == "intent") r.intent = get_num(v);
  else if (k == "inventory") r.inventory = v.get<int>();
  else if (k == "candidates") {
    r.candidates.clear();
    for (const auto& c : v)
      r.candidates.push_back({c.at("ad").get<int>(), c.at("advertiser").get<int>(), get_num(c.at("bid")),
                              get_num(c.at("beta")), get_num(c.at("value")), get_num(c.at("bid_mult"))});
  } else if (k == "eps") r.eps = get_num(v);
  else if (k == "m") r.m = get_num(v);
  else if (k == "alpha") r.alpha = get_num(v);
  else if (k == "layout") r.layout = v.get<int>();
  else if (k == "placed") {
    r.placed.clear();
    for (const auto& p : v)
      r.placed.push_back({p.at("candidate").get<int>(), p.at("position").get<int>(), get_num(p.at("rank_score")),
                          get_num(p.at("price")), get_num(p.at("charged")), p.at("clicked").get<bool>()});
  } else if (k == "clicked_prices") {
    r.clicked_prices.clear();
    for (const auto& x : v) r.clicked_prices.push_back(get_num(x));
  } else if (k == "clicks") r.clicks = v.get<int>();
  else if (k == "mainline_ads") r.mainline_ads = v.get<int>();
  else if (k == "revenue") r.revenue = get_num(v);
  else if (k == "ad_value") r.ad_value = get_num(v);
  else if (k == "m_min") r.m_min = get_num(v);
  else if (k == "m_max") r.m_max = get_num(v);
  else throw Error(ErrorCode::SchemaMismatch, "unknown record field '" + k + "'");
}

bool ends_with(const std::string& s, const char* suf) {
  std::size_t n = std::strlen(suf);
  return s.size() >= n && s.compare(s.size() - n, n, suf) == 0;
}

}  // namespace

struct LogWriter::Impl {
  std::string path;
  LogHeader header;
  FILE* f = nullptr;
  gzFile gz = nullptr;
  std::uint64_t count = 0;

  void put(const std::string& s) {
    if (gz) {
      if (gzwrite(gz, s.data(), static_cast<unsigned>(s.size())) != static_cast<int>(s.size()) ||
          gzputc(gz, '\n') < 0)
        throw Error(ErrorCode::IoError, "write failed: " + path);
    } else if (std::fwrite(s.data(), 1, s.size(), f) != s.size() || std::fputc('\n', f) == EOF) {
      throw Error(ErrorCode::IoError, "write failed: " + path);
    }
  }
};

LogWriter::LogWriter(const std::string& path, const LogHeader& h) : impl_(new Impl) {
  impl_->path = path;
  impl_->header = h;
  if (ends_with(path, ".gz")) {
    impl_->gz = gzopen(path.c_str(), "wb6");
    if (!impl_->gz) throw Error(ErrorCode::IoError, "cannot open " + path);
  } else {
    impl_->f = std::fopen(path.c_str(), "wb");
    if (!impl_->f) throw Error(ErrorCode::IoError, "cannot open " + path);
  }
  impl_->put(header_line(h));
}

LogWriter::~LogWriter() {
  if (impl_->f) std::fclose(impl_->f);
  if (impl_->gz) gzclose(impl_->gz);
}

void LogWriter::write(const LogRecord& r) {
  impl_->put(record_line(r));
  ++impl_->count;
}

void LogWriter::close() {
  if (impl_->f) {
    std::fflush(impl_->f);
    ::fsync(fileno(impl_->f));
    std::fclose(impl_->f);
    impl_->f = nullptr;
  }
  if (impl_->gz) {
    gzclose(impl_->gz);
    impl_->gz = nullptr;
  }
  if (impl_->count != impl_->header.n)
    throw Error(ErrorCode::SchemaMismatch, "header announces " + std::to_string(impl_->header.n) + " records, wrote " +
                                               std::to_string(impl_->count));
}

LogHeader write_log(const std::string& path, const LogHeader& h, const std::vector<LogRecord>& records) {
  LogHeader hh = h;
  hh.n = records.size();
  LogWriter w(path, hh);
  for (const auto& r : records) w.write(r);
  w.close();
  return hh;
}

struct LogReader::Impl {
  std::string path;
  std::set<std::string> projection;
  FILE* f = nullptr;
  gzFile gz = nullptr;
  LogHeader header;
  std::size_t line = 0;
  std::uint64_t count = 0;
  std::string buf;

  // Returns false at EOF; sets complete=false if the last line lacks '\n'.
  bool getline(std::string& out, bool& complete) {
    out.clear();
    char chunk[8192];
    for (;;) {
      char* got = gz ? gzgets(gz, chunk, sizeof chunk) : std::fgets(chunk, sizeof chunk, f);
      if (!got) {
        complete = false;
        return !out.empty();
      }
      std::size_t n = std::strlen(chunk);
      if (n > 0 && chunk[n - 1] == '\n') {
        out.append(chunk, n - 1);
        complete = true;
        return true;
      }
      out.append(chunk, n);
    }
  }
};

LogReader::LogReader(const std::string& path, std::set<std::string> projection) : impl_(new Impl) {
  impl_->path = path;
  for (const auto& p : projection) {
    bool known = false;
    for (const auto& f : record_fields()) known |= f == p;
    if (!known) throw Error(ErrorCode::SchemaMismatch, "unknown projected field '" + p + "'");
  }
  impl_->projection = std::move(projection);
  if (ends_with(path, ".gz")) {
    impl_->gz = gzopen(path.c_str(), "rb");
    if (!impl_->gz) throw Error(ErrorCode::IoError, "cannot open " + path);
  } else {
    impl_->f = std::fopen(path.c_str(), "rb");
    if (!impl_->f) throw Error(ErrorCode::IoError, "cannot open " + path);
  }
  bool complete = false;
  if (!impl_->getline(impl_->buf, complete) || !complete)
    throw Error(ErrorCode::ReadError, path + ": line 1: missing header");
  impl_->line = 1;
  json h;
  try {
    h = json::parse(impl_->buf);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ReadError, path + ": line 1: " + e.what());
  }
  if (h.value("type", "") != "header") throw Error(ErrorCode::ReadError, path + ": line 1: not a log header");
  int v = h.at("schema_version").get<int>();
  if (v != kLogSchemaVersion) throw Error(ErrorCode::VersionUnsupported, "log schema " + std::to_string(v));
  auto& H = impl_->header;
  H.schema_version = v;
  H.config = world_config_from_json(h.at("config"));
  H.config_hash = h.at("config_hash").get<std::string>();
  if (H.config_hash != config_hash(H.config))
    throw Error(ErrorCode::SchemaMismatch, path + ": config hash does not match config");
  H.policy = policy_from_json(h.at("policy"));
  H.n = h.at("n").get<std::uint64_t>();
  H.seed = h.at("seed").get<std::uint64_t>();
}

LogReader::~LogReader() {
  if (impl_->f) std::fclose(impl_->f);
  if (impl_->gz) gzclose(impl_->gz);
}

const LogHeader& LogReader::header() const { return impl_->header; }
std::size_t LogReader::line() const { return impl_->line; }

bool LogReader::next(LogRecord& r) {
  auto& I = *impl_;
  bool complete = false;
  if (!I.getline(I.buf, complete)) {
    if (I.count != I.header.n)
      throw Error(ErrorCode::ReadError, I.path + ": line " + std::to_string(I.line + 1) + ": expected " +
                                            std::to_string(I.header.n) + " records, found " + std::to_string(I.count));
    return false;
  }
  ++I.line;
  if (!complete) throw Error(ErrorCode::ReadError, I.path + ": line " + std::to_string(I.line) + ": truncated record");
  if (I.count >= I.header.n)
    throw Error(ErrorCode::ReadError, I.path + ": line " + std::to_string(I.line) + ": more records than announced");
  r = LogRecord{};
  const auto& proj = I.projection;
  try {
    json j = json::parse(I.buf, [&](int depth, json::parse_event_t ev, json& parsed) {
      if (depth == 1 && ev == json::parse_event_t::key && !proj.empty())
        return proj.count(parsed.get<std::string>()) > 0;
      return true;
    });
    for (auto it = j.begin(); it != j.end(); ++it) fill_field(r, it.key(), it.value());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ReadError, I.path + ": line " + std::to_string(I.line) + ": " + e.what());
  }
  ++I.count;
  return true;
}

LoadedLog read_log(const std::string& path, std::set<std::string> projection) {
  LogReader rd(path, std::move(projection));
  LoadedLog out;
  out.header = rd.header();
  out.records.reserve(out.header.n);
  LogRecord r;
  while (rd.next(r)) out.records.push_back(std::move(r));
  return out;
}

}  // namespace cfr
