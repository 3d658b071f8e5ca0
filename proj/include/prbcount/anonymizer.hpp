#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <random>
#include <shared_mutex>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>

#include "prbcount/core.hpp"
#include "prbcount/detail/hex.hpp"
#include "prbcount/detail/sha256.hpp"

// Sensor-side anonymization: a per-minute rotating server pepper plus a
// static sensor pepper are prepended to the raw source address, the
// concatenation is hashed with SHA-256 and the digest truncated to 64 bits.
// Identical (address, minute) pairs map to identical tokens on every sensor;
// across minutes the tokens are unlinkable.

namespace prbcount {

using Pepper = std::array<std::uint8_t, 16>;

inline Pepper parse_pepper_hex(const std::string& hex) {
  Pepper p;
  detail::from_hex(hex, p);
  return p;
}

inline std::string pepper_to_hex(const Pepper& p) { return detail::to_hex(p); }

class EntropyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EntropySource {
 public:
  virtual ~EntropySource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;
};

// Cryptographically secure source backed by std::random_device
// (/dev/urandom on Linux). Failures surface as EntropyError.
class SystemEntropySource : public EntropySource {
 public:
  void fill(std::span<std::uint8_t> out) override {
    try {
      for (std::size_t i = 0; i < out.size(); i += 4) {
        const std::uint32_t word = dev_();
        for (std::size_t j = 0; j < 4 && i + j < out.size(); ++j)
          out[i + j] = static_cast<std::uint8_t>(word >> (8 * j));
      }
    } catch (const std::exception& e) {
      throw EntropyError(std::string("system entropy source failed: ") + e.what());
    }
  }

 private:
  std::random_device dev_;
};

// Deterministic source for tests and reproducible pipeline runs. Not
// cryptographically secure.
class SeededEntropySource : public EntropySource {
 public:
  explicit SeededEntropySource(std::uint64_t seed) : rng_(seed) {}

  void fill(std::span<std::uint8_t> out) override {
    for (std::size_t i = 0; i < out.size(); i += 8) {
      const std::uint64_t word = rng_();
      for (std::size_t j = 0; j < 8 && i + j < out.size(); ++j)
        out[i + j] = static_cast<std::uint8_t>(word >> (8 * j));
    }
  }

 private:
  std::mt19937_64 rng_;
};

class PepperError : public std::runtime_error {
 public:
  enum class Kind { Deleted, Missing };

  PepperError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline std::int64_t minute_of(std::int64_t ts) { return detail::floor_div(ts, 60); }

// Per-minute server peppers plus the static sensor pepper. One writer may
// rotate while readers look peppers up; reads never observe a partially
// rotated schedule. Peppers older than the retention window are deleted and
// cannot be recovered.
class PepperSchedule {
 public:
  PepperSchedule(Pepper sensor_pepper, std::map<std::int64_t, Pepper> server_peppers,
                 std::int64_t retention_minutes = 2)
      : sensor_(sensor_pepper),
        server_(std::move(server_peppers)),
        retention_(retention_minutes) {
    if (retention_ < 1) throw std::invalid_argument("retention must be >= 1 minute");
    deleted_below_ = server_.empty() ? 0 : server_.begin()->first;
  }

  const Pepper& sensor_pepper() const { return sensor_; }
  std::int64_t retention_minutes() const { return retention_; }

  Pepper server_pepper(std::int64_t minute) const {
    std::shared_lock lock(mu_);
    const auto it = server_.find(minute);
    if (it != server_.end()) return it->second;
    if (minute < deleted_below_)
      throw PepperError(PepperError::Kind::Deleted,
                        "pepper deleted for minute " + std::to_string(minute));
    throw PepperError(PepperError::Kind::Missing,
                      "no pepper for minute " + std::to_string(minute));
  }

  bool has_minute(std::int64_t minute) const {
    std::shared_lock lock(mu_);
    return server_.contains(minute);
  }

  // Extends the schedule up to `current_minute` and irrecoverably deletes
  // peppers older than the retention window.
  void rotate_to(std::int64_t current_minute, EntropySource& entropy) {
    std::unique_lock lock(mu_);
    for (std::int64_t m = server_.empty() ? current_minute
                                          : server_.rbegin()->first + 1;
         m <= current_minute; ++m) {
      Pepper p;
      entropy.fill(p);
      server_.emplace(m, p);
    }
    const std::int64_t keep_from = current_minute - retention_ + 1;
    for (auto it = server_.begin(); it != server_.end() && it->first < keep_from;)
      it = server_.erase(it);
    if (deleted_below_ < keep_from) deleted_below_ = keep_from;
  }

  std::map<std::int64_t, Pepper> snapshot() const {
    std::shared_lock lock(mu_);
    return server_;
  }

 private:
  mutable std::shared_mutex mu_;
  Pepper sensor_;
  std::map<std::int64_t, Pepper> server_;
  std::int64_t retention_;
  std::int64_t deleted_below_ = 0;
};

// Fresh independent 128-bit server peppers for every minute in
// [first_minute, last_minute], plus the given sensor pepper.
inline PepperSchedule generate_peppers(std::int64_t first_minute, std::int64_t last_minute,
                                       EntropySource& entropy, Pepper sensor_pepper,
                                       std::int64_t retention_minutes = 2) {
  if (last_minute < first_minute) throw std::invalid_argument("empty minute range");
  std::map<std::int64_t, Pepper> server;
  for (std::int64_t m = first_minute; m <= last_minute; ++m) {
    Pepper p;
    entropy.fill(p);
    server.emplace(m, p);
  }
  return PepperSchedule(sensor_pepper, std::move(server), retention_minutes);
}

// Token = first 8 digest bytes of SHA-256(sensor_pepper || server_pepper ||
// mac), read big-endian, so the token's hex form equals the digest's first 16
// hex characters. The MAC enters in transmission byte order. This byte-level
// layout is a wire-format constant; changing it breaks cross-sensor token
// equality.
inline AnonToken anonymize_with(const Pepper& sensor_pepper, const Pepper& server_pepper,
                                const RawMac& mac) {
  std::array<std::uint8_t, 38> input;
  std::copy(sensor_pepper.begin(), sensor_pepper.end(), input.begin());
  std::copy(server_pepper.begin(), server_pepper.end(), input.begin() + 16);
  std::copy(mac.bytes.begin(), mac.bytes.end(), input.begin() + 32);
  const auto digest = detail::Sha256::digest(input.data(), input.size());
  std::uint64_t token = 0;
  for (int i = 0; i < 8; ++i) token = (token << 8) | digest[static_cast<std::size_t>(i)];
  return AnonToken{token};
}

// Fails if the schedule has no pepper for the minute; a raw address is never
// passed through.
inline AnonToken anonymize(const RawMac& mac, std::int64_t minute,
                           const PepperSchedule& schedule) {
  return anonymize_with(schedule.sensor_pepper(), schedule.server_pepper(minute), mac);
}

// Birthday-style per-address collision probability of the 64-bit truncated
// hash over m distinct addresses: (m - 1) / 2^64.
inline double expected_collision_rate(std::uint64_t m) {
  if (m < 1) throw std::invalid_argument("m must be >= 1");
  return std::ldexp(static_cast<double>(m - 1), -64);
}

// --- pepper distribution format: one "<minute> <32 hex chars>" line per
// --- minute; stands in for the server's pepper endpoint.

inline void write_pepper_file(std::ostream& out, const std::map<std::int64_t, Pepper>& peppers) {
  for (const auto& [minute, pepper] : peppers)
    out << minute << ' ' << pepper_to_hex(pepper) << '\n';
}

inline std::map<std::int64_t, Pepper> read_pepper_file(std::istream& in) {
  std::map<std::int64_t, Pepper> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::int64_t minute;
    std::string hex;
    if (!(ls >> minute >> hex))
      throw std::invalid_argument("pepper file: malformed line " + std::to_string(line_no));
    out[minute] = parse_pepper_hex(hex);
  }
  return out;
}

}  // namespace prbcount
