#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "prbcount/calibration.hpp"
#include "prbcount/core.hpp"
#include "prbcount/detail/hex.hpp"
#include "prbcount/simulator.hpp"

// CSV interchange formats. All files carry a header row; timestamps are
// epoch seconds. Tokens are 16 lowercase hex characters. The raw-record
// format exists only on the simulator side of the anonymization boundary.

namespace prbcount {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::int64_t parse_int(const std::string& s, const char* what) {
  std::int64_t v = 0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || p != end)
    throw std::invalid_argument(std::string("invalid ") + what + ": '" + s + "'");
  return v;
}

inline std::int64_t parse_int_range(const std::string& s, const char* what,
                                    std::int64_t lo, std::int64_t hi) {
  const std::int64_t v = parse_int(s, what);
  if (v < lo || v > hi)
    throw std::invalid_argument(std::string(what) + " out of range: '" + s + "'");
  return v;
}

inline double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("invalid ") + what + ": '" + s + "'");
  }
}

// Shortest round-trippable decimal form; integral values print as integers.
inline std::string format_double(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return std::string(buf);
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lg", &back);
  for (int prec = 1; prec < 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof probe, "%.*g", prec, v);
    std::sscanf(probe, "%lg", &back);
    if (back == v) return std::string(probe);
  }
  return std::string(buf);
}

}  // namespace detail

// "2019-04-22" -> days since epoch.
inline std::int64_t parse_iso_date(const std::string& s) {
  int y = 0, m = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  std::istringstream ss(s);
  ss >> y >> dash1 >> m >> dash2 >> d;
  if (!ss || dash1 != '-' || dash2 != '-' || m < 1 || m > 12 || d < 1 || d > 31)
    throw std::invalid_argument("invalid ISO date: '" + s + "'");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw std::invalid_argument("invalid ISO date: '" + s + "'");
  return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

// "HH:MM" -> seconds of day.
inline std::int32_t parse_time_of_day(const std::string& s) {
  int h = 0, m = 0;
  char colon = 0;
  std::istringstream ss(s);
  ss >> h >> colon >> m;
  if (!ss || colon != ':' || h < 0 || h > 23 || m < 0 || m > 59)
    throw std::invalid_argument("invalid time of day: '" + s + "'");
  return h * 3600 + m * 60;
}

inline std::string token_to_hex(AnonToken token) {
  std::array<std::uint8_t, 8> bytes;
  for (int i = 0; i < 8; ++i)
    bytes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(token.value >> (56 - 8 * i));
  return detail::to_hex(bytes);
}

inline AnonToken token_from_hex(const std::string& hex) {
  std::array<std::uint8_t, 8> bytes;
  detail::from_hex(hex, bytes);
  std::uint64_t v = 0;
  for (std::uint8_t b : bytes) v = (v << 8) | b;
  return AnonToken{v};
}

inline RawMac mac_from_string(const std::string& s) {
  RawMac mac;
  unsigned b[6];
  if (std::sscanf(s.c_str(), "%02x:%02x:%02x:%02x:%02x:%02x", &b[0], &b[1], &b[2],
                  &b[3], &b[4], &b[5]) != 6 ||
      s.size() != 17)
    throw std::invalid_argument("invalid MAC address: '" + s + "'");
  for (int i = 0; i < 6; ++i) mac.bytes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(b[i]);
  return mac;
}

// --- (timestamp, count) series ---

inline void write_count_series(std::ostream& out, const CountSeries& series) {
  out << "timestamp,count\n";
  for (const auto& s : series)
    out << s.ts << ',' << detail::format_double(s.value) << '\n';
}

inline CountSeries read_count_series(std::istream& in) {
  CountSeries out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("timestamp", 0) == 0) continue;  // header
    }
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 2)
      throw std::invalid_argument("count series row needs 2 fields: '" + line + "'");
    out.push_back({detail::parse_int(fields[0], "timestamp"),
                   detail::parse_double(fields[1], "count")});
  }
  return out;
}

inline CountSeries read_count_series_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  return read_count_series(in);
}

// --- anonymized records: ts,sensor_id,token,rssi ---

inline void write_records_csv(std::ostream& out, std::span<const ProbeRecord> records) {
  out << "ts,sensor_id,token,rssi\n";
  for (const auto& r : records)
    out << r.ts << ',' << r.sensor_id << ',' << token_to_hex(r.token) << ','
        << static_cast<int>(r.rssi) << '\n';
}

inline std::vector<ProbeRecord> read_records_csv(std::istream& in) {
  std::vector<ProbeRecord> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("ts,", 0) == 0) continue;
    }
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 4)
      throw std::invalid_argument("record row needs 4 fields: '" + line + "'");
    ProbeRecord r;
    r.ts = detail::parse_int(fields[0], "ts");
    r.sensor_id =
        static_cast<std::uint16_t>(detail::parse_int_range(fields[1], "sensor_id", 0, 65535));
    r.token = token_from_hex(fields[2]);
    r.rssi = static_cast<std::int8_t>(detail::parse_int_range(fields[3], "rssi", -128, 127));
    out.push_back(r);
  }
  return out;
}

// --- raw (pre-anonymization) records: ts,sensor_id,mac,rssi ---

inline void write_raw_records_csv(std::ostream& out, std::span<const RawProbe> probes) {
  out << "ts,sensor_id,mac,rssi\n";
  for (const auto& p : probes)
    out << p.ts << ',' << p.sensor_id << ',' << p.mac.to_string() << ','
        << static_cast<int>(p.rssi) << '\n';
}

inline std::vector<RawProbe> read_raw_records_csv(std::istream& in) {
  std::vector<RawProbe> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("ts,", 0) == 0) continue;
    }
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 4)
      throw std::invalid_argument("raw record row needs 4 fields: '" + line + "'");
    RawProbe p;
    p.ts = detail::parse_int(fields[0], "ts");
    p.sensor_id =
        static_cast<std::uint16_t>(detail::parse_int_range(fields[1], "sensor_id", 0, 65535));
    p.mac = mac_from_string(fields[2]);
    p.rssi = static_cast<std::int8_t>(detail::parse_int_range(fields[3], "rssi", -128, 127));
    out.push_back(p);
  }
  return out;
}

// --- ground truth: frame,n_ppl,X ---

inline void write_ground_truth_csv(std::ostream& out, std::span<const GroundTruthRow> rows) {
  out << "frame,n_ppl,X\n";
  for (const auto& r : rows)
    out << r.frame_index << ',' << r.n_ppl << ',' << r.distinct_bursts << '\n';
}

}  // namespace prbcount
