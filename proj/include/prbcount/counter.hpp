#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "prbcount/core.hpp"

// Per-frame deduplicated counting. Records below their sensor's RSSI
// threshold are discarded; every surviving token is credited to the single
// sensor where it was observed with the highest RSSI, so each token is
// counted exactly once per frame. Frames are processed independently; no
// state survives from one frame to the next.

namespace prbcount {

struct FrameBatch {
  struct Entry {
    std::uint16_t sensor_id = 0;
    AnonToken token;
    std::int8_t rssi = 0;
  };

  std::int64_t frame_index = 0;
  std::vector<Entry> entries;
};

// Area -> member sensors, from configuration.
using AreaMap = std::map<std::string, std::vector<std::uint16_t>>;

struct CountResult {
  std::map<std::uint16_t, std::uint64_t> counts_per_sensor;
  std::map<std::string, std::uint64_t> area_counts;

  std::uint64_t total() const {
    std::uint64_t sum = 0;
    for (const auto& [id, n] : counts_per_sensor) sum += n;
    return sum;
  }
};

namespace detail {

// Separate-chaining table keyed by anonymized tokens. Tokens are uniformly
// distributed, so the token itself acts as the hash (bucket = token mod
// bucket count). Bucket count is sized for the requested load factor; slots
// live in one arena so a frame's table tears down in O(1) frees.
class TokenTable {
 public:
  struct Slot {
    std::uint64_t token;
    std::int32_t next;
    std::uint16_t sensor_id;
    std::int8_t rssi;
  };

  TokenTable(std::size_t expected_entries, double load_factor) {
    const auto want = static_cast<std::size_t>(
        static_cast<double>(std::max<std::size_t>(expected_entries, 1)) / load_factor);
    buckets_.assign(std::max<std::size_t>(want, 1), -1);
    slots_.reserve(expected_entries);
  }

  Slot* find(std::uint64_t token) {
    for (std::int32_t i = buckets_[bucket_of(token)]; i >= 0; i = slots_[static_cast<std::size_t>(i)].next) {
      Slot& s = slots_[static_cast<std::size_t>(i)];
      if (s.token == token) return &s;
    }
    return nullptr;
  }

  // Hints the cache about an upcoming find; large tables are latency-bound on
  // the bucket-head load, and the record stream is known in advance.
  void prefetch(std::uint64_t token) const {
#if defined(__GNUC__) || defined(__clang__)
    __builtin_prefetch(buckets_.data() + bucket_of(token), 0, 1);
#endif
  }

  void insert(std::uint64_t token, std::uint16_t sensor_id, std::int8_t rssi) {
    const std::size_t b = bucket_of(token);
    slots_.push_back(Slot{token, buckets_[b], sensor_id, rssi});
    buckets_[b] = static_cast<std::int32_t>(slots_.size() - 1);
  }

  std::span<const Slot> slots() const { return slots_; }

 private:
  std::size_t bucket_of(std::uint64_t token) const { return token % buckets_.size(); }

  std::vector<std::int32_t> buckets_;
  std::vector<Slot> slots_;
};

}  // namespace detail

inline constexpr double kDefaultLoadFactor = 0.75;

// Computes per-sensor counts for one frame. A record passes only with RSSI
// strictly above its sensor's lower bound; an existing table entry is
// replaced only by a strictly higher RSSI, so on a tie the first-encountered
// record wins and counts are order-independent whenever a token's RSSIs are
// distinct. Records referencing an unconfigured sensor are an error.
inline CountResult count_frame(const FrameBatch& batch, std::span<const SensorConfig> sensors,
                               double load_factor = kDefaultLoadFactor) {
  if (!(load_factor > 0.0 && load_factor <= 1.0))
    throw std::invalid_argument("load factor outside (0,1]");

  std::uint16_t max_id = 0;
  for (const auto& s : sensors) max_id = std::max(max_id, s.sensor_id);
  constexpr int kUnknown = INT32_MIN;
  std::vector<int> threshold(static_cast<std::size_t>(max_id) + 1, kUnknown);
  for (const auto& s : sensors) threshold[s.sensor_id] = s.rssi_lower_bound;

  detail::TokenTable table(batch.entries.size(), load_factor);
  constexpr std::size_t kLookahead = 24;
  for (std::size_t i = 0; i < batch.entries.size(); ++i) {
    if (i + kLookahead < batch.entries.size())
      table.prefetch(batch.entries[i + kLookahead].token.value);
    const auto& prb = batch.entries[i];
    if (prb.sensor_id > max_id || threshold[prb.sensor_id] == kUnknown)
      throw std::invalid_argument("record references unknown sensor " +
                                  std::to_string(prb.sensor_id));
    if (!(static_cast<int>(prb.rssi) > threshold[prb.sensor_id])) continue;
    if (detail::TokenTable::Slot* slot = table.find(prb.token.value)) {
      if (prb.rssi > slot->rssi) {
        slot->sensor_id = prb.sensor_id;
        slot->rssi = prb.rssi;
      }
    } else {
      table.insert(prb.token.value, prb.sensor_id, prb.rssi);
    }
  }

  CountResult result;
  for (const auto& s : sensors) result.counts_per_sensor[s.sensor_id] = 0;
  for (const auto& slot : table.slots()) ++result.counts_per_sensor[slot.sensor_id];
  return result;
}

// Same, plus per-area counts (sums over each area's member sensors).
inline CountResult count_frame(const FrameBatch& batch, std::span<const SensorConfig> sensors,
                               const AreaMap& areas, double load_factor = kDefaultLoadFactor) {
  CountResult result = count_frame(batch, sensors, load_factor);
  for (const auto& [area, members] : areas) {
    std::uint64_t sum = 0;
    for (std::uint16_t id : members) {
      const auto it = result.counts_per_sensor.find(id);
      if (it == result.counts_per_sensor.end())
        throw std::invalid_argument("area '" + area + "' references unknown sensor " +
                                    std::to_string(id));
      sum += it->second;
    }
    result.area_counts[area] = sum;
  }
  return result;
}

// Count estimator C_hat = beta * X for X distinct detected tokens.
inline double estimate_count(std::uint64_t distinct_tokens, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  return beta * static_cast<double>(distinct_tokens);
}

// Closed-form memory estimates for one frame, in MB: raw record storage
// (16-byte records) and the counting hash table (8 bytes per bucket at the
// given load factor plus a 16-byte chain node per entry).
struct MemoryFootprint {
  double records_mb = 0.0;
  double hash_table_mb = 0.0;
};

inline MemoryFootprint memory_footprint(std::uint64_t n_sensors, std::uint64_t n_meas,
                                        double load_factor) {
  if (!(load_factor > 0.0 && load_factor <= 1.0))
    throw std::invalid_argument("load factor outside (0,1]");
  const double entries = static_cast<double>(n_sensors) * static_cast<double>(n_meas);
  return MemoryFootprint{
      entries * 16.0 * 1e-6,
      entries * (8.0 / load_factor + 16.0) * 1e-6,
  };
}

// Groups anonymized records into per-frame batches, ordered by frame index.
// Frames with no records are omitted.
inline std::vector<FrameBatch> make_frame_batches(std::span<const ProbeRecord> records,
                                                  const FrameSpec& spec) {
  std::map<std::int64_t, FrameBatch> by_frame;
  for (const auto& r : records) {
    const std::int64_t k = frame_of(r.ts, spec);
    auto& batch = by_frame[k];
    batch.frame_index = k;
    batch.entries.push_back(FrameBatch::Entry{r.sensor_id, r.token, r.rssi});
  }
  std::vector<FrameBatch> out;
  out.reserve(by_frame.size());
  for (auto& [index, batch] : by_frame) out.push_back(std::move(batch));
  return out;
}

}  // namespace prbcount
